"""Command-line front end: ``picrasp <subcommand> ...``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from .errors import (
    BudgetInfeasibleError,
    ConditioningError,
    ConfigError,
    ConvergenceError,
    DataValidationError,
    DegenerateHypothesesError,
    DesignSingularError,
    ParameterDomainError,
    PicraspError,
    RiskSpecificationError,
)
from .model import ModelParams

EXIT_OK, EXIT_INPUT, EXIT_INFEASIBLE, EXIT_NUMERIC = 0, 2, 3, 4

# --------------------------------------------------------------------------
# configuration validation
# --------------------------------------------------------------------------


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)


def _at(prefix, key):
    return f"{prefix}.{key}" if prefix else key


def _check_model(obj, path, errs):
    if not isinstance(obj, dict):
        errs.append(f"{path or 'model'} must be an object")
        return None
    out = {}
    eta = obj.get("eta")
    if not isinstance(eta, list) or not eta:
        errs.append(f"{_at(path, 'eta')} must be a non-empty list")
    else:
        for j, e in enumerate(eta):
            if not (_num(e) and e > 0):
                errs.append(f"{_at(path, 'eta')}[{j}] must be > 0, got {e}")
        out["eta"] = eta
    if "gamma" in obj and "gammas" in obj:
        errs.append(f"{path or 'model'}: give either gamma or gammas, not both")
    elif "gamma" in obj:
        if not (_num(obj["gamma"]) and obj["gamma"] > 0):
            errs.append(f"{_at(path, 'gamma')} must be > 0, got {obj['gamma']}")
        out["gamma"] = obj["gamma"]
    elif "gammas" in obj:
        g = obj["gammas"]
        if not isinstance(g, list) or (isinstance(eta, list) and len(g) != len(eta)):
            errs.append(f"{_at(path, 'gammas')} must be a list with one entry per cause")
        else:
            for j, x in enumerate(g):
                if not (_num(x) and x > 0):
                    errs.append(f"{_at(path, 'gammas')}[{j}] must be > 0, got {x}")
        out["gammas"] = g
    else:
        errs.append(f"{path or 'model'} requires gamma or gammas")
    nu = obj.get("nu", 0.0)
    if not (_num(nu) and nu >= 0):
        errs.append(f"{_at(path, 'nu')} must be >= 0, got {nu}")
    out["nu"] = nu
    for k in obj:
        if k not in ("eta", "gamma", "gammas", "nu"):
            errs.append(f"{_at(path, k)}: unknown key")
    return out


def _check_scheme(obj, path, errs):
    if not isinstance(obj, dict):
        errs.append(f"{path or 'scheme'} must be an object")
        return None
    out = {}
    if "L" in obj:
        L = obj["L"]
        if not isinstance(L, list) or not L or not all(_num(x) for x in L):
            errs.append(f"{_at(path, 'L')} must be a non-empty list of numbers")
            return None
        if L[0] <= 0 or any(b <= a for a, b in zip(L, L[1:])):
            errs.append(f"{_at(path, 'L')} must be positive and strictly increasing")
        out["L"], M = L, len(L)
    elif "M" in obj and "h" in obj:
        M, h = obj["M"], obj["h"]
        if not (isinstance(M, int) and not isinstance(M, bool) and M >= 1):
            errs.append(f"{_at(path, 'M')} must be a positive integer, got {M}")
            M = None
        if not (_num(h) and h > 0):
            errs.append(f"{_at(path, 'h')} must be > 0, got {h}")
        out["M"], out["h"] = M, h
    else:
        errs.append(f"{path or 'scheme'} requires L, or both M and h")
        return None
    if "p_list" in obj:
        pl = obj["p_list"]
        if not isinstance(pl, list) or (M is not None and len(pl) != M):
            errs.append(f"{_at(path, 'p_list')} must have M entries")
        else:
            for i, x in enumerate(pl[:-1]):
                if not (_num(x) and 0 <= x < 1):
                    errs.append(f"{_at(path, 'p_list')}[{i}] must be in [0, 1), got {x}")
            if pl and pl[-1] != 1:
                errs.append(f"{_at(path, 'p_list')}[{len(pl) - 1}] must be 1")
        out["p_list"] = pl
    else:
        p = obj.get("p", 0.0)
        if not (_num(p) and 0 <= p < 1):
            errs.append(f"{_at(path, 'p')} must be in [0, 1), got {p}")
        out["p"] = p
    return out


def _check_costs(obj, path, errs):
    if not isinstance(obj, dict):
        errs.append(f"{path} must be an object")
        return None
    out = {}
    for k in ("c_sample", "c_time", "c_failure", "c_inspection"):
        v = obj.get(k)
        if not (_num(v) and v >= 0):
            errs.append(f"{_at(path, k)} must be >= 0, got {v}")
        out[k] = v
    b = obj.get("budget")
    if b is not None and not (_num(b) and b > 0):
        errs.append(f"{_at(path, 'budget')} must be > 0, got {b}")
    out["budget"] = b
    return out


def _check_risk(obj, path, errs):
    if not isinstance(obj, dict):
        errs.append(f"{path} must be an object")
        return None
    out = {}
    for k in ("alpha", "beta"):
        v = obj.get(k)
        if not (_num(v) and 0 < v < 1):
            errs.append(f"{_at(path, k)} must be in (0, 1), got {v}")
        out[k] = v
    t0 = obj.get("t0")
    if not (_num(t0) and t0 > 0):
        errs.append(f"{_at(path, 't0')} must be > 0, got {t0}")
    out["t0"] = t0
    d = obj.get("d", None)
    if d is not None:
        ds = d if isinstance(d, list) else [d]
        for j, x in enumerate(ds):
            if not (_num(x) and x >= 1):
                errs.append(f"{_at(path, 'd')}{f'[{j}]' if isinstance(d, list) else ''} must be >= 1, got {x}")
        out["d"] = d
    return out


def _n_params(model):
    J = len(model["eta"])
    return J + (1 if "gamma" in model else J) + (1 if model.get("nu", 0) > 0 else 0)


def validate_config(json_text: str) -> dict:
    """Validate a configuration document and return it normalized.

    Accepts a full document with any of ``model``, ``scheme``, ``costs``,
    ``risk`` and ``design`` sections, or a bare model or scheme object.
    Every violation is collected, each prefixed by its path; a ConfigError
    carries the whole list.
    """
    try:
        doc = json.loads(json_text)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise ConfigError([f"malformed JSON: {exc}"]) from None
    errs: list[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["top level must be a JSON object"])
    if "eta" in doc:
        out = _check_model(doc, "", errs)
        if errs:
            raise ConfigError(errs)
        return out
    if "L" in doc or "M" in doc:
        out = _check_scheme(doc, "", errs)
        if errs:
            raise ConfigError(errs)
        return out
    known = {"model", "scheme", "costs", "risk", "design"}
    out = {}
    for k in doc:
        if k not in known:
            errs.append(f"{k}: unknown section")
    if "model" in doc:
        out["model"] = _check_model(doc["model"], "model", errs)
    if "scheme" in doc:
        out["scheme"] = _check_scheme(doc["scheme"], "scheme", errs)
    if "costs" in doc:
        out["costs"] = _check_costs(doc["costs"], "costs", errs)
    if "risk" in doc:
        out["risk"] = _check_risk(doc["risk"], "risk", errs)
    if "design" in doc:
        des = doc["design"]
        if not isinstance(des, dict):
            errs.append("design must be an object")
        else:
            out["design"] = dict(des)
            Ms = des.get("M", [])
            for k, M in enumerate(Ms if isinstance(Ms, list) else [Ms]):
                if not (isinstance(M, int) and M >= 1):
                    errs.append(f"design.M must hold positive integers, got {M}")
            ps = des.get("p", [])
            for p in ps if isinstance(ps, list) else [ps]:
                if not (_num(p) and 0 <= p < 1):
                    errs.append(f"design.p must be in [0, 1), got {p}")
    model = out.get("model")
    if model and "eta" in model and all(_num(e) for e in model["eta"]):
        s = _n_params(model)
        sch = out.get("scheme") or {}
        Ms = []
        if "L" in sch:
            Ms.append(("scheme.L", len(sch["L"])))
        elif isinstance(sch.get("M"), int):
            Ms.append(("scheme.M", sch["M"]))
        dM = (out.get("design") or {}).get("M")
        for M in dM if isinstance(dM, list) else ([dM] if dM is not None else []):
            if isinstance(M, int):
                Ms.append(("design.M", M))
        mm = (out.get("design") or {}).get("M_max")
        if isinstance(mm, int):
            Ms.append(("design.M_max", mm))
        for where, M in Ms:
            if M < s:
                errs.append(f"{where}: M must be >= s (M={M}, s={s} parameters)")
    if errs:
        raise ConfigError(errs)
    return out


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------


def _round(obj, precision):
    if isinstance(obj, float):
        return float(f"{obj:.{precision}g}") if math.isfinite(obj) else None
    if isinstance(obj, (np.floating,)):
        return _round(float(obj), precision)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: _round(v, precision) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, precision) for v in obj]
    return obj


def _fmt(v, precision):
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.{precision}g}"
    return str(v)


def _csv_text(header, rows, precision):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v, precision) for v in row])
    return buf.getvalue()


class _Emitter:
    def __init__(self, args):
        self.out = args.out
        self.precision = args.precision

    def text(self, text: str):
        if self.out:
            Path(self.out).write_text(text)
        else:
            sys.stdout.write(text)

    def json(self, obj):
        self.text(json.dumps(_round(obj, self.precision), indent=2) + "\n")

    def csv(self, header, rows):
        self.text(_csv_text(header, rows, self.precision))


def _info(msg):
    print(msg, file=sys.stderr)


# --------------------------------------------------------------------------
# argument assembly
# --------------------------------------------------------------------------


def _load_json_arg(text):
    """A JSON literal, or ``@path`` to read it from a file."""
    if text.startswith("@"):
        return Path(text[1:]).read_text()
    return text


def _merged_config(args) -> dict:
    doc = json.loads(_load_json_arg(args.config)) if getattr(args, "config", None) else {}
    if not isinstance(doc, dict):
        raise ConfigError(["config must be a JSON object"])
    if getattr(args, "model", None):
        doc["model"] = json.loads(_load_json_arg(args.model))
    elif getattr(args, "eta0", None):
        doc["model"] = {"eta": args.eta0, "gamma": args.gamma, "nu": args.nu or 0.0}
    if getattr(args, "scheme", None):
        doc["scheme"] = json.loads(_load_json_arg(args.scheme))
    risk = dict(doc.get("risk", {}))
    for k in ("alpha", "beta", "t0", "d"):
        v = getattr(args, k, None)
        if v is not None:
            risk[k] = v if not isinstance(v, list) or len(v) > 1 else v[0]
    if risk:
        doc["risk"] = risk
    costs = dict(doc.get("costs", {}))
    for k in ("c_sample", "c_time", "c_failure", "c_inspection", "budget"):
        v = getattr(args, k, None)
        if v is not None:
            costs[k] = v
    if costs:
        doc["costs"] = costs
    design = dict(doc.get("design", {}))
    for k, attr in (("M", "M"), ("p", "p"), ("M_max", "M_max")):
        v = getattr(args, attr, None)
        if v is not None:
            design[k] = v
    if design:
        doc["design"] = design
    return validate_config(json.dumps(doc))


def _require(cfg, *sections):
    missing = [s for s in sections if not cfg.get(s)]
    if missing:
        raise ConfigError([f"{s}: required (pass --{s} or a --config section)" for s in missing])


def _spec(cfg):
    from .plans import RiskSpec

    _require(cfg, "model", "risk")
    theta0 = ModelParams.from_dict(cfg["model"])
    risk = cfg["risk"]
    if "d" not in risk:
        raise ConfigError(["risk.d: required"])
    return RiskSpec.from_discrimination(
        risk["alpha"], risk["beta"], risk["t0"], theta0.eta, risk["d"], theta0.shape, theta0.nu
    )


def _scheme(cfg):
    from .scheme import PicScheme

    _require(cfg, "scheme")
    return PicScheme.from_dict(cfg["scheme"])


def _h_bounds(args):
    if args.h_min is None and args.h_max is None:
        return None
    return (args.h_min if args.h_min is not None else 0.01, args.h_max)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_plan(args, out: _Emitter):
    from .plans import design_plan

    cfg = _merged_config(args)
    plan = design_plan(_spec(cfg), _scheme(cfg), round_up=args.round_up)
    out.json(plan.to_dict())
    _info(plan.summary())


def cmd_oc(args, out: _Emitter):
    from .plans import RiskSpec, design_plan, oc_curve

    cfg = _merged_config(args)
    base = _spec(cfg)
    scheme = _scheme(cfg)
    nus = args.compare_nu if args.compare_nu else [base.theta0.nu]
    rows = []
    for nu in nus:
        spec = RiskSpec.from_discrimination(
            base.alpha, base.beta, base.t0, base.theta0.eta, cfg["risk"]["d"], base.theta0.shape, nu
        )
        plan = design_plan(spec, scheme, round_up=args.round_up)
        curve = oc_curve(plan, spec.theta0, spec.theta1, grid_size=args.grid_size, span=(args.lam_min, args.lam_max))
        rows += [(dp, pa, nu) for dp, pa in curve]
    out.csv(["defective_proportion", "acceptance_probability", "nu"], rows)


def cmd_design(args, out: _Emitter):
    from .design import design_unconstrained

    cfg = _merged_config(args)
    spec = _spec(cfg)
    des = cfg.get("design", {})
    Ms = des.get("M") or [4]
    ps = des.get("p")
    ps = [0.0] if ps is None else ps
    Ms = Ms if isinstance(Ms, list) else [Ms]
    ps = ps if isinstance(ps, list) else [ps]
    results = []
    for p in ps:
        for M in Ms:
            r = design_unconstrained(spec, M, p, _h_bounds(args), round_up=args.round_up)
            results.append((p, r))
            if r.boundary:
                _info(f"warning: M={M}, p={p}: optimum on the boundary of the h range")
    if args.emit_table == "csv":
        rows = [(p, spec.theta0.nu, r.M, r.h, r.phi, r.plan.n_star, r.plan.pi_c) for p, r in results]
        out.csv(["p", "nu", "M", "h", "phi", "n", "pi_c"], rows)
    else:
        out.json([{"p": p, **r.to_dict()} for p, r in results])


def cmd_design_budget(args, out: _Emitter):
    from .design import design_budget
    from .scheme import CostParams

    cfg = _merged_config(args)
    spec = _spec(cfg)
    _require(cfg, "costs")
    c = cfg["costs"]
    if c.get("budget") is None:
        raise ConfigError(["costs.budget: required"])
    costs = CostParams.from_dict(c)
    des = cfg.get("design", {})
    ps = des.get("p")
    ps = [0.0] if ps is None else (ps if isinstance(ps, list) else [ps])
    M_max = des.get("M_max", 10)
    results = [
        (p, design_budget(spec, costs, p, M_max, _h_bounds(args), args.round_up, workers=args.threads)) for p in ps
    ]
    if args.emit_table == "csv":
        rows = [
            (p, spec.theta0.nu, r.M, r.h, r.phi, r.plan.n_star, r.plan.pi_c,
             r.cost.e_d, r.cost.e_tau, r.cost.e_inspections, r.cost.total)
            for p, r in results
        ]
        out.csv(["p", "nu", "M", "h", "phi", "n", "pi_c", "E_D", "E_tau", "E_I", "TC"], rows)
    else:
        out.json([{"p": p, **r.to_dict()} for p, r in results])


def cmd_fit(args, out: _Emitter):
    from .inference import ObservedData, estimate_reliability, fit_mle
    from .plans import decide

    data = ObservedData.from_csv(Path(args.data).read_text())
    fit = fit_mle(data, args.variant, restarts=args.restarts, seed=args.seed)
    res = fit.to_dict()
    if args.t0 is not None:
        est, se = estimate_reliability(fit, args.t0)
        res["reliability"] = {"t0": args.t0, "estimate": est, "se": se}
        if args.pi_c is not None:
            res["decision"] = decide(est, args.pi_c)
    out.json(res)
    if not fit.converged:
        raise ConvergenceError("fit did not converge")


def cmd_simulate(args, out: _Emitter):
    from .simulate import simulate_dataset

    cfg = _merged_config(args)
    _require(cfg, "model")
    data = simulate_dataset(ModelParams.from_dict(cfg["model"]), _scheme(cfg), args.n, args.seed, args.replicate)
    out.text(data.to_csv())


def cmd_mc_eval(args, out: _Emitter):
    from .plans import design_plan
    from .simulate import mc_evaluate

    cfg = _merged_config(args)
    spec = _spec(cfg)
    plan = design_plan(spec, _scheme(cfg), round_up=args.round_up)
    s = mc_evaluate(plan, spec.theta0, spec.theta1, reps=args.reps, seed=args.seed, workers=args.threads)
    header = [
        "n", "M", "h", "p", "pi0", "avg_R", "rmsd_R", "avg_S2", "rmsd_S2", "alpha_hat", "beta_hat",
        "reps", "failures_h0", "failures_h1", "boundary_fits", "s2_undefined",
    ]
    sch = plan.scheme
    row = [
        plan.n_star, sch.M, sch.h if sch.h is not None else math.nan, sch.p[0] if sch.M > 1 else 0.0, s.pi0,
        s.avg_r0, s.rmsd_r0, s.avg_s2, s.rmsd_s2, s.alpha_hat, s.beta_hat,
        s.reps, s.failures_h0, s.failures_h1, s.boundary_fits, s.s2_undefined,
    ]
    out.csv(header, [row])


def cmd_validate(args, out: _Emitter):
    text = Path(args.file).read_text() if args.file != "-" else sys.stdin.read()
    out.json(validate_config(text))


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------


def _add_common(p):
    p.add_argument("--precision", type=int, default=6, help="significant digits in output (default 6)")
    p.add_argument("--out", help="write results to this file instead of stdout")
    p.add_argument("--threads", type=int, default=1, help="worker count for parallel stages")


def _add_model(p):
    p.add_argument("--config", help="JSON config document, or @file")
    p.add_argument("--model", help='model JSON, e.g. {"eta":[..],"gamma":..,"nu":..}, or @file')
    p.add_argument("--eta0", type=float, nargs="+", help="H0 scales (alternative to --model)")
    p.add_argument("--gamma", type=float, help="common shape with --eta0")
    p.add_argument("--nu", type=float, help="frailty variance with --eta0")


def _add_risk(p):
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--t0", type=float)
    p.add_argument("--d", type=float, nargs="+", help="discrimination ratio(s), one or one per cause")
    p.add_argument("--round-up", action="store_true", help="use ceil(n) instead of floor(n)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="picrasp", description="Acceptance sampling plans for PIC-I competing-risks life tests.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="sample size and acceptance limit on a given scheme")
    _add_common(p), _add_model(p), _add_risk(p)
    p.add_argument("--scheme", help='scheme JSON, e.g. {"M":4,"h":0.2,"p":0}')
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("oc", help="operating characteristic curve as CSV")
    _add_common(p), _add_model(p), _add_risk(p)
    p.add_argument("--scheme")
    p.add_argument("--grid-size", type=int, default=50)
    p.add_argument("--lam-min", type=float, default=-0.5, help="path start (0 is H0)")
    p.add_argument("--lam-max", type=float, default=1.5, help="path end (1 is H1)")
    p.add_argument("--compare-nu", type=float, nargs="+", help="emit one curve per frailty variance")
    p.set_defaults(func=cmd_oc)

    for name, func, help_ in (
        ("design", cmd_design, "c-optimal spacing for given M and p"),
        ("design-budget", cmd_design_budget, "c-optimal (M, h) under a cost budget"),
    ):
        p = sub.add_parser(name, help=help_)
        _add_common(p), _add_model(p), _add_risk(p)
        p.add_argument("--p", type=float, nargs="+", help="common withdrawal proportion(s)")
        p.add_argument("--h-min", type=float)
        p.add_argument("--h-max", type=float)
        p.add_argument("--emit-table", choices=["csv"])
        if name == "design":
            p.add_argument("--M", type=int, nargs="+", help="inspection count(s)")
        else:
            p.add_argument("--M-max", dest="M_max", type=int)
            p.add_argument("--c-sample", type=float)
            p.add_argument("--c-time", type=float)
            p.add_argument("--c-failure", type=float)
            p.add_argument("--c-inspection", type=float)
            p.add_argument("--budget", type=float)
        p.set_defaults(func=func)

    p = sub.add_parser("fit", help="maximum-likelihood fit of a PIC-I data CSV")
    _add_common(p)
    p.add_argument("--data", required=True, help="CSV with header i,L_lower,L_upper,d_1..d_J,r")
    p.add_argument("--variant", default="dependent-equal",
                   choices=["independent-equal", "dependent-equal", "independent-unequal", "dependent-unequal"])
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t0", type=float, help="also report R(t0) and its standard error")
    p.add_argument("--pi-c", type=float, help="also report the lot decision at this acceptance limit")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="simulate one PIC-I dataset as CSV")
    _add_common(p), _add_model(p)
    p.add_argument("--scheme")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicate", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("mc-eval", help="Monte Carlo evaluation of a plan")
    _add_common(p), _add_model(p), _add_risk(p)
    p.add_argument("--scheme")
    p.add_argument("--reps", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_mc_eval)

    p = sub.add_parser("validate", help="validate a JSON config and echo it normalized")
    _add_common(p)
    p.add_argument("file", help="JSON file, or - for stdin")
    p.set_defaults(func=cmd_validate)
    return parser


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, (BudgetInfeasibleError, DegenerateHypothesesError)):
        return EXIT_INFEASIBLE
    if isinstance(exc, (DesignSingularError, ConvergenceError, ConditioningError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ParameterDomainError, DataValidationError, ConfigError, RiskSpecificationError)):
        return EXIT_INPUT
    return EXIT_NUMERIC


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    out = _Emitter(args)
    try:
        args.func(args, out)
    except ConfigError as exc:
        for e in exc.errors:
            _info(f"error: {e}")
        return EXIT_INPUT
    except PicraspError as exc:
        _info(f"error: {exc}")
        if isinstance(exc, BudgetInfeasibleError) and exc.min_cost is not None:
            _info(f"minimum achievable expected cost: {exc.min_cost:.6g}")
        return exit_code_for(exc)
    except (json.JSONDecodeError, OSError) as exc:
        _info(f"error: {exc}")
        return EXIT_INPUT
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
