"""Command-line entry point: ``elliptope {generate,solve,certify,experiment,round}``.

Exit codes: 0 success, 1 soft failure (nothing converged), 2 usage or input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any

import numpy as np

from . import rounding
from .certify import TolProfile, certify
from .experiment import ExperimentGrid, run_experiment
from .instances import InstanceSpec, build_instance
from .manifold import read_point, write_point
from .refsdp import RefConfig, sdp_reference
from .solver import SolverConfig, multi_restart
from .symmat import SymMatrix, op_norm, read_matrix_market, write_matrix_market

log = logging.getLogger("elliptope")

EXIT_OK, EXIT_SOFT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def workers_from_env() -> int:
    raw = os.environ.get("ELLIPTOPE_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"ELLIPTOPE_THREADS must be an integer, got {raw!r}") from None
    return (os.cpu_count() or 1) if n == 0 else max(1, n)


def _dump(doc: dict[str, Any], out: str | None) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_json_arg(arg: str) -> dict[str, Any]:
    """Inline JSON or a path to a JSON file."""
    try:
        if not arg.lstrip().startswith("{") and Path(arg).is_file():
            doc = json.loads(Path(arg).read_text(encoding="utf-8"))
        else:
            doc = json.loads(arg)
    except (json.JSONDecodeError, OSError) as exc:
        raise UsageError(f"cannot parse JSON argument: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError("JSON argument must be an object")
    return doc


def _read_matrix(path: str) -> SymMatrix:
    try:
        return read_matrix_market(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read matrix {path}: {exc}") from None


def _read_sigma(path: str, n: int) -> np.ndarray:
    try:
        sigma = read_point(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read point {path}: {exc}") from None
    if sigma.shape[0] != n:
        raise UsageError(f"point has {sigma.shape[0]} rows, matrix has n={n}")
    dev = np.abs(np.linalg.norm(sigma, axis=1) - 1.0).max()
    if dev > 1e-6:
        raise UsageError(f"point rows are not unit vectors (max deviation {dev:.3g})")
    return sigma / np.linalg.norm(sigma, axis=1, keepdims=True)


def _solver_config(args, base: SolverConfig = SolverConfig()) -> SolverConfig:
    kw: dict[str, Any] = {}
    for flag, name in (("method", "method"), ("tol", "grad_tol"), ("seed", "seed"),
                       ("max_sweeps", "max_sweeps"), ("max_iters", "max_iters")):
        val = getattr(args, flag, None)
        if val is not None:
            kw[name] = val
    if getattr(args, "shuffle", False):
        kw["shuffle"] = True
    if getattr(args, "perturb_on_stall", False):
        kw["perturb_on_stall"] = True
    try:
        return replace(base, **kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_generate(args) -> int:
    try:
        spec = InstanceSpec.from_dict(_load_json_arg(args.spec))
        inst = build_instance(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad instance spec: {exc}") from None
    write_matrix_market(inst.a, args.out)
    if inst.truth is not None:
        Path(f"{args.out}.truth").write_text("".join(f"{int(v)}\n" for v in inst.truth), encoding="utf-8")
    log.info("wrote %s (n=%d)", args.out, inst.a.n)
    return EXIT_OK


def cmd_solve(args) -> int:
    a = _read_matrix(args.matrix)
    if not 1 <= args.k <= a.n:
        raise UsageError(f"--k must lie in [1, {a.n}]")
    cfg = replace(_solver_config(args), workers=workers_from_env())
    res = multi_restart(a, args.k, args.restarts, cfg)
    sigma_path = args.sigma
    if sigma_path is None and args.out:
        sigma_path = str(Path(args.out).with_suffix("")) + ".sigma.csv"
    if sigma_path:
        write_point(res.best.sigma, sigma_path)
    doc = res.best.to_dict(sigma_path)
    doc["restarts"] = [r.to_dict() for r in res.reports]
    doc["config"] = asdict(cfg)
    del doc["config"]["workers"]
    _dump(doc, args.out)
    if not any(r.converged for r in res.reports):
        log.warning("no restart converged; best-effort report written")
        return EXIT_SOFT
    return EXIT_OK


def cmd_certify(args) -> int:
    a = _read_matrix(args.matrix)
    sigma = _read_sigma(args.sigma, a.n)
    a_norm = op_norm(a).value
    tol = TolProfile(seed=args.seed)
    ref_doc = None
    if args.sdp_ref is None:
        ref_val, ref_err = None, 0.0
    elif args.sdp_ref == "auto":
        ref = sdp_reference(a, RefConfig(tol=tol), a_norm)
        ref_val, ref_err = ref.value, ref.certified_error
        ref_doc = ref.to_dict()
    else:
        try:
            ref_val, ref_err = float(args.sdp_ref), 0.0
        except ValueError:
            raise UsageError(f"--sdp-ref must be a number or 'auto', got {args.sdp_ref!r}") from None
    cert = certify(a, sigma, ref_val, ref_err, tol, a_norm)
    doc = cert.to_dict()
    if ref_doc is not None:
        doc["reference"] = ref_doc
    _dump(doc, args.out)
    return EXIT_OK


def cmd_experiment(args) -> int:
    overrides = {}
    if args.method:
        overrides["method"] = args.method
    doc = _load_json_arg(args.grid)
    if args.allow_k1:
        doc["allow_k1"] = True
    try:
        grid = ExperimentGrid.from_dict(doc, overrides)
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(f"bad experiment grid: {exc}") from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_experiment(grid, workers=workers_from_env())
    (out / "results.csv").write_text(result.csv_text(), encoding="utf-8")
    (out / "summary.json").write_text(result.summary_json(), encoding="utf-8")
    lines = ["cell,instance,family,n,k,seconds"]
    lines += [f"{t['cell']},{t['instance']},{t['family']},{t['n']},{t['k']},{t['seconds']:.6f}" for t in result.timings]
    (out / "timings.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    s = result.summary
    log.info("%d rows, %d converged, bound holds everywhere: %s", s["rows"], s["converged"], s["all_hold"])
    return EXIT_OK if s["converged"] else EXIT_SOFT


def cmd_round(args) -> int:
    if args.overlap and not args.truth:
        raise UsageError("--overlap needs --truth")
    try:
        sigma = read_point(args.sigma)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read point {args.sigma}: {exc}") from None
    a = _read_matrix(args.matrix) if args.matrix else None
    if args.mode == "hyperplane":
        if a is None:
            raise UsageError("hyperplane mode scores assignments and needs --matrix")
        x, _ = rounding.round_hyperplane(a, sigma, args.trials, args.seed)
    else:
        x = rounding.round_sign_first_col(sigma)
    doc: dict[str, Any] = {"mode": args.mode, "n": len(x)}
    if a is not None:
        doc["objective"] = rounding.quadratic_value(a, x)
        doc["cut_value"] = rounding.cut_value(a, x)
    if args.truth:
        try:
            truth = np.array([float(t) for t in Path(args.truth).read_text(encoding="utf-8").split()])
        except (OSError, ValueError) as exc:
            raise UsageError(f"cannot read truth {args.truth}: {exc}") from None
        if len(truth) != len(x):
            raise UsageError(f"truth has {len(truth)} entries, assignment has {len(x)}")
        doc["overlap"] = rounding.overlap(x, truth)
    doc["assignment"] = [int(v) for v in x]
    _dump(doc, args.out)
    return EXIT_OK


def dump_config() -> dict[str, Any]:
    return {"solver": asdict(SolverConfig()), "reference": {k: v for k, v in asdict(RefConfig()).items()
                                                            if k not in ("solver", "tol")},
            "tolerances": asdict(TolProfile())}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="elliptope", description=__doc__.splitlines()[0])
    p.add_argument("--dump-config", action="store_true", help="print default settings as JSON and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command")

    g = sub.add_parser("generate", help="write an instance as Matrix Market")
    g.add_argument("spec", help="instance spec, inline JSON or a file")
    g.add_argument("out")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="multi-restart rank-k ascent")
    s.add_argument("matrix")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--method", choices=("coordinate", "rgrad"))
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--seed", type=int)
    s.add_argument("--tol", type=float, help="gradient tolerance (scaled by max(1,|A|) sqrt(n))")
    s.add_argument("--max-sweeps", type=int)
    s.add_argument("--max-iters", type=int)
    s.add_argument("--shuffle", action="store_true", help="random row order per sweep")
    s.add_argument("--perturb-on-stall", action="store_true")
    s.add_argument("--out", help="report JSON (default stdout)")
    s.add_argument("--sigma", help="CSV for the best point (default <out>.sigma.csv)")
    s.set_defaults(func=cmd_solve)

    c = sub.add_parser("certify", help="check a point and report the gap bound")
    c.add_argument("matrix")
    c.add_argument("sigma")
    c.add_argument("--sdp-ref", help="reference SDP value, or 'auto' to compute one")
    c.add_argument("--seed", type=int, default=0, help="seed for sampled submatrix checks")
    c.add_argument("--out")
    c.set_defaults(func=cmd_certify)

    e = sub.add_parser("experiment", help="run a grid of solves and certificates")
    e.add_argument("grid", help="grid JSON, inline or a file")
    e.add_argument("--out", required=True, help="output directory")
    e.add_argument("--method", choices=("coordinate", "rgrad"))
    e.add_argument("--allow-k1", action="store_true", help="permit k = 1 cells (theorem reported inapplicable)")
    e.set_defaults(func=cmd_experiment)

    r = sub.add_parser("round", help="round a point to a +-1 assignment")
    r.add_argument("sigma")
    r.add_argument("--matrix", help="problem matrix (required for hyperplane mode)")
    r.add_argument("--mode", choices=("sign_first_col", "hyperplane"), default="hyperplane")
    r.add_argument("--trials", type=int, default=100)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--truth", help="planted +-1 vector, one entry per line")
    r.add_argument("--overlap", action="store_true", help="require an overlap report")
    r.add_argument("--out")
    r.set_defaults(func=cmd_round)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    if args.dump_config:
        _dump(dump_config(), None)
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"elliptope {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
