"""Command-line interface: ``htype <command> [options]``.

Exit codes: 0 success, 1 validation/verification failure, 2 input errors
(unreadable files, malformed JSON, unknown group names, bad flags).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import StepTwoAlgebra, load_group, to_json, validate
from .anisotropic import conjecture_scan, verify_fundamental
from .calculus import sup_defect
from .deviation import SolverConfig, deviation, deviation_at_metric
from .metric import VerticalMetric

COMMANDS = ("validate", "deviation", "defects", "verify-fundamental", "conjecture", "catalog")

# residual limits used by verify-fundamental
VERIFY_LIMITS = {"harmonic": 1e-9, "harmonic_jet": 1e-9, "frame": 1e-12, "pqr": 1e-12}
VERIFY_DEFAULT_LIMIT = 1e-6

CATALOG = [
    ("heis(1)", "Heisenberg group, n = 1"),
    ("heis(1,1)", "isotropic Heisenberg group, n = 2"),
    ("heis(1,2)", "anisotropic Heisenberg group b = (1, 2)"),
    ("heis(0.5,1,1,1)", "anisotropic Heisenberg group b = (1/2, 1, 1, 1)"),
    ("free(3)", "free step-two group of rank 3"),
    ("free(4)", "free step-two group of rank 4"),
    ("geps(2,1)", "[X_j, Y_j] = T, [X_1, X_2] = eps U, n = 2, eps = 1"),
    ("gbar(2,1)", "[X_j, Y_j] = T, [X_1, X_2] = eps T, n = 2, eps = 1"),
    ("hhalf(3)", "H^n(1/2, 1, ..., 1), n = 3"),
    ("hhalf2(3)", "same group with b = (1, 2, ..., 2), n = 3"),
]


class UsageError(Exception):
    """Bad input; reported with exit code 2."""


def fmt(x) -> str:
    """17 significant digits, '.' decimal."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def parse_range(text: str) -> list[int]:
    """``"2..4"`` -> [2, 3, 4]; ``"5"`` -> [5]; ``"2,5"`` -> [2, 5]."""
    try:
        if ".." in text:
            a, b = text.split("..")
            vals = list(range(int(a), int(b) + 1))
        else:
            vals = [int(v) for v in text.split(",")]
    except ValueError as exc:
        raise UsageError(f"bad --n value {text!r} (expected e.g. 2..4)") from exc
    if not vals or min(vals) < 2:
        raise UsageError(f"--n must select values >= 2, got {text!r}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="htype", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--solver-file", help="JSON file with SolverConfig fields")
    common.add_argument("--restarts", type=int)
    common.add_argument("--max-iters", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--grid-density", type=int)
    common.add_argument("--threads", type=int, default=1,
                        help="worker cap (computations currently run sequentially)")
    common.add_argument("--output", "-o", help="write the report here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    grp = argparse.ArgumentParser(add_help=False)
    grp.add_argument("--group", required=True, help="catalog name such as 'free(4)' or a JSON path")

    metric_help = "'identity', 'optimal' (minimax argmin) or a JSON path with key G"

    sub.add_parser("validate", parents=[common, grp], help="check the algebraic invariants")
    p = sub.add_parser("deviation", parents=[common, grp], help="H-type deviation")
    p.add_argument("--metric", default="optimal", help=metric_help + " (default: optimal)")
    p = sub.add_parser("defects", parents=[common, grp], help="sup of the defect functionals")
    p.add_argument("--metric", default="identity", help=metric_help + " (default: identity)")
    p.add_argument("--samples", type=int, help="alias for --grid-density")
    p = sub.add_parser("verify-fundamental", parents=[common],
                       help="check the closed forms on H^n(1/2, 1, ..., 1)")
    p.add_argument("--n", default="2..3")
    p.add_argument("--samples", type=int, default=100)
    p = sub.add_parser("conjecture", parents=[common], help="scan |N L_inf N| on the unit sphere, t = 0")
    p.add_argument("--n", default="2..4")
    p.add_argument("--samples", type=int, help="alias for --grid-density")
    sub.add_parser("catalog", parents=[common], help="list the built-in groups")
    return ap


def solver_from_args(args) -> SolverConfig:
    base = {}
    if args.solver_file:
        base = dict(_read_json(args.solver_file))
    for key in ("restarts", "max_iters", "tol", "seed", "grid_density"):
        val = getattr(args, key, None)
        if val is not None:
            base[key] = val
    if getattr(args, "samples", None) is not None and args.command in ("defects", "conjecture"):
        base["grid_density"] = args.samples
    try:
        return SolverConfig.from_json(base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid solver configuration: {exc}") from exc


def _read_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {path}: {exc}") from exc


def _group(spec: str) -> StepTwoAlgebra:
    try:
        return load_group(spec)
    except KeyError as exc:
        raise UsageError(exc.args[0] if exc.args else f"unknown group {spec!r}") from exc
    except OSError as exc:
        raise UsageError(f"cannot read {spec}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed JSON in {spec}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(f"bad group definition in {spec}: {exc}") from exc


def _metric(spec: str, algebra: StepTwoAlgebra, cfg: SolverConfig):
    if spec == "identity":
        return VerticalMetric.identity(algebra.m2), None
    if spec == "optimal":
        rep = deviation(algebra, cfg)
        return rep.metric, rep
    obj = _read_json(spec)
    try:
        metric = VerticalMetric.from_json(obj, algebra.m2)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad metric in {spec}: {exc}") from exc
    if metric.m2 != algebra.m2:
        raise UsageError(f"metric in {spec} is {metric.m2}-dimensional, group has m2={algebra.m2}")
    return metric, None


def _require_valid(algebra: StepTwoAlgebra):
    rep = validate(algebra)
    if not rep.ok:
        return {"valid": False, "violations": list(rep.violations)}
    return None


# -- commands ---------------------------------------------------------------------

def cmd_validate(args, cfg):
    alg = _group(args.group)
    rep = validate(alg)
    body = {"group": args.group, "m": alg.m, "m2": alg.m2, "Q": alg.Q,
            "valid": rep.ok, "violations": list(rep.violations)}
    rows = [["valid", "violation"]] + ([[fmt(rep.ok), v] for v in rep.violations]
                                       or [[fmt(rep.ok), ""]])
    return (0 if rep.ok else 1), body, rows


def cmd_deviation(args, cfg):
    alg = _group(args.group)
    bad = _require_valid(alg)
    if bad:
        return 1, {"group": args.group, **bad}, [["violation"]] + [[v] for v in bad["violations"]]
    if args.metric == "optimal":
        rep = deviation(alg, cfg)
    else:
        metric, _ = _metric(args.metric, alg, cfg)
        rep = deviation_at_metric(alg, metric, cfg)
    body = {"group": args.group, "metric_source": args.metric, "report": rep.to_json()}
    header = (["value"] + [f"witness_t{q + 1}" for q in range(alg.m2)]
              + [f"G{i + 1}{j + 1}" for i in range(alg.m2) for j in range(alg.m2)]
              + ["inner_converged", "outer_converged", "evaluations"])
    row = ([fmt(rep.value)] + [fmt(v) for v in rep.witness_t]
           + [fmt(v) for v in rep.metric.G.ravel()]
           + [fmt(rep.inner_converged), fmt(rep.outer_converged), fmt(rep.evaluations)])
    return 0, body, [header, row]


def cmd_defects(args, cfg):
    alg = _group(args.group)
    bad = _require_valid(alg)
    if bad:
        return 1, {"group": args.group, **bad}, [["violation"]] + [[v] for v in bad["violations"]]
    metric, dev = _metric(args.metric, alg, cfg)
    results = {}
    rows = [["kind"] + [f"x{i + 1}" for i in range(alg.m)]
            + [f"t{q + 1}" for q in range(alg.m2)] + ["value"]]
    for kind in ("eikonal", "harmonic", "scaled_harmonic"):
        res = sup_defect(alg, metric, kind, cfg)
        results[kind] = res.to_json()
        rows.append([kind] + [fmt(v) for v in res.witness.x] + [fmt(v) for v in res.witness.t]
                    + [fmt(res.sup)])
    body = {"group": args.group, "metric_source": args.metric, "metric": metric.to_json(),
            "defects": results}
    if dev is not None:
        body["deviation"] = dev.to_json()
    return 0, body, rows


def cmd_verify(args, cfg):
    ns = parse_range(args.n)
    if args.samples < 1:
        raise UsageError("--samples must be >= 1")
    per_n = {}
    rows = [["n", "check", "residual", "limit", "ok"]]
    ok_all = True
    for n in ns:
        res = verify_fundamental(n, args.samples, cfg.seed)
        per_n[str(n)] = {}
        for key in sorted(res):
            lim = VERIFY_LIMITS.get(key, VERIFY_DEFAULT_LIMIT)
            ok = res[key] <= lim
            ok_all &= ok
            per_n[str(n)][key] = {"residual": res[key], "limit": lim, "ok": ok}
            rows.append([str(n), key, fmt(res[key]), fmt(lim), fmt(ok)])
    body = {"samples": args.samples, "results": per_n, "ok": ok_all}
    return (0 if ok_all else 1), body, rows


def cmd_conjecture(args, cfg):
    ns = parse_range(args.n)
    rows = [["n", "sup", "delta_sq", "ratio", "witness_z1", "witness_zp", "witness_t",
             "value_at_zprime", "symmetry_residual"]]
    per_n = {}
    for n in ns:
        r = conjecture_scan(n, cfg)
        per_n[str(n)] = r.to_json()
        rows.append([str(n), fmt(r.sup), fmt(r.delta_sq), fmt(r.ratio),
                     fmt(float(np.linalg.norm(r.witness.z1))),
                     fmt(float(np.linalg.norm(r.witness.zprime))), fmt(r.witness.t),
                     fmt(r.value_at_zprime), fmt(r.symmetry_residual)])
    nsup = [n * per_n[str(n)]["sup"] for n in ns]
    ratios = [per_n[str(n)]["ratio"] for n in ns]
    body = {"results": per_n,
            "n_times_sup_spread": max(nsup) / min(nsup) if min(nsup) > 0 else math.inf,
            "ratio_spread": max(ratios) / min(ratios) if min(ratios) > 0 else math.inf}
    return 0, body, rows


def cmd_catalog(args, cfg):
    from .algebra import from_name

    entries = []
    rows = [["name", "m", "m2", "Q", "description"]]
    for name, desc in CATALOG:
        alg = from_name(name)
        entries.append({"name": name, "m": alg.m, "m2": alg.m2, "Q": alg.Q,
                        "description": desc, "algebra": to_json(alg)})
        rows.append([name, str(alg.m), str(alg.m2), str(alg.Q), desc])
    return 0, {"groups": entries}, rows


HANDLERS = {
    "validate": cmd_validate,
    "deviation": cmd_deviation,
    "defects": cmd_defects,
    "verify-fundamental": cmd_verify,
    "conjecture": cmd_conjecture,
    "catalog": cmd_catalog,
}


def _config_json(args, cfg: SolverConfig) -> dict:
    out = {"command": args.command, "solver": cfg.to_json(), "threads": args.threads,
           "format": args.format}
    for key in ("group", "metric", "n", "samples"):
        if getattr(args, key, None) is not None:
            out[key] = getattr(args, key)
    return out


def render(args, cfg, body, rows) -> str:
    if args.format == "csv":
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(rows)
        return buf.getvalue()
    doc = {"config": _config_json(args, cfg), "seed": cfg.seed, "version": __version__, **body}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors already; keep 0 for --help
        return int(exc.code or 0)
    try:
        if args.threads is not None and args.threads < 1:
            raise UsageError("--threads must be >= 1")
        cfg = solver_from_args(args)
        code, body, rows = HANDLERS[args.command](args, cfg)
        text = render(args, cfg, body, rows)
        if args.output:
            try:
                Path(args.output).write_text(text)
            except OSError as exc:
                raise UsageError(f"cannot write {args.output}: {exc.strerror or exc}") from exc
        else:
            sys.stdout.write(text)
        return code
    except UsageError as exc:
        print(f"htype: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
