"""Grid runs: solve, certify and compare against the local-maximum gap bound."""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields, replace
from typing import Any

import numpy as np

from . import rng
from .certify import PROOF_CONSTANT, TolProfile, certify
from .instances import InstanceSpec, build_instance
from .refsdp import RefConfig, ReferenceValue, sdp_reference
from .solver import SolverConfig, multi_restart
from .symmat import op_norm

CSV_COLUMNS = (
    "family", "n", "k", "restart", "seed", "objective", "sdp_ref", "gap", "bound8",
    "bound5sqrt2", "dual_eps", "xi_min", "grad_norm", "iters", "method", "holds",
)


@dataclass(frozen=True)
class ExperimentGrid:
    instances: list[InstanceSpec]
    ks: list[int]
    restarts: int = 50
    seed: int = 0
    reference_restarts: int = 5
    allow_k1: bool = False
    solver: SolverConfig = SolverConfig()
    tol: TolProfile = TolProfile()

    def __post_init__(self):
        if not self.instances:
            raise ValueError("experiment grid has no instances")
        if not self.ks:
            raise ValueError("experiment grid has an empty k list")
        bad = [k for k in self.ks if k < (1 if self.allow_k1 else 2)]
        if bad:
            raise ValueError(f"k values {bad} not allowed (k >= 2 unless allow_k1)")
        if self.restarts < 1 or self.reference_restarts < 1:
            raise ValueError("restart counts must be >= 1")

    @classmethod
    def from_dict(cls, d: dict[str, Any], solver_overrides: dict[str, Any] | None = None) -> "ExperimentGrid":
        """Parse a grid document; ``solver_overrides`` (e.g. from flags) win over its ``solver`` block."""
        known = {f.name for f in fields(SolverConfig)}
        solver_kw = {key: val for key, val in dict(d.get("solver", {})).items() if key in known}
        if "method" in d:
            solver_kw["method"] = d["method"]
        solver_kw.update(solver_overrides or {})
        return cls(
            instances=[InstanceSpec.from_dict(s) for s in d.get("instances", [])],
            ks=[int(k) for k in d.get("k", d.get("ks", []))],
            restarts=int(d.get("restarts", 50)),
            seed=int(d.get("seed", 0)),
            reference_restarts=int(d.get("reference_restarts", 5)),
            allow_k1=bool(d.get("allow_k1", False)),
            solver=SolverConfig(**solver_kw),
        )


@dataclass
class ExperimentResult:
    rows: list[dict[str, Any]]
    summary: dict[str, Any]
    timings: list[dict[str, Any]] = field(default_factory=list)

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow([_cell(row[c]) for c in CSV_COLUMNS])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps(self.summary, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _cell(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if not math.isfinite(v) else f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def fit_exponent(ks, gaps) -> float | None:
    """Least-squares alpha in gap ~ C k^(-alpha) on a log-log scale; None if under two usable points."""
    pts = [(math.log(k), math.log(g)) for k, g in zip(ks, gaps) if g is not None and g > 0]
    if len(pts) < 2 or len({p[0] for p in pts}) < 2:
        return None
    x, y = np.array(pts).T
    slope = np.polyfit(x, y, 1)[0]
    return float(-slope)


def _run_cell(grid: ExperimentGrid, inst_index: int, spec: InstanceSpec, a, a_norm: float,
              ref: ReferenceValue, k: int, cell_index: int) -> tuple[list[dict[str, Any]], float]:
    start = time.perf_counter()
    cfg = replace(grid.solver, seed=rng.derive_seed(grid.seed, rng.CELL, cell_index), workers=1)
    res = multi_restart(a, k, grid.restarts, cfg, a_norm)
    rows = []
    for rep in res.reports:
        cert = certify(a, rep.sigma, ref.value, ref.certified_error, grid.tol, a_norm)
        if cert.theorem_status == "inapplicable_k1":
            holds: Any = "inapplicable"
        else:
            holds = bool(cert.theorem_holds)
        rows.append({
            "family": spec.family, "n": a.n, "k": k, "restart": rep.restart, "seed": rep.restart_seed,
            "objective": rep.objective, "sdp_ref": ref.value, "gap": cert.theorem_gap,
            "bound8": cert.theorem_bound, "bound5sqrt2": cert.theorem_bound_5sqrt2,
            "dual_eps": cert.dual_eps, "xi_min": cert.gram_min_eig, "grad_norm": rep.grad_norm,
            "iters": rep.iterations, "method": rep.method, "holds": holds,
            # in-memory only
            "instance": inst_index, "converged": rep.converged, "certificate": cert,
        })
    return rows, time.perf_counter() - start


def _error_row(spec: InstanceSpec, n: int, k: int, inst_index: int) -> dict[str, Any]:
    row: dict[str, Any] = {c: None for c in CSV_COLUMNS}
    row.update(family=spec.family, n=n, k=k, restart=-1, method="", holds="error",
               instance=inst_index, converged=False, certificate=None)
    return row


def run_experiment(grid: ExperimentGrid, workers: int = 1) -> ExperimentResult:
    """Run every (instance, k) cell; a failing cell becomes an ``error`` row and the run continues.

    Cell ``c`` (instances major, k minor) solves with seed
    ``derive_seed(grid.seed, CELL, c)``, so results do not depend on
    ``workers``.  Rows are sorted by (family, n, instance, k, restart).
    """
    prepared = []
    failures: list[dict[str, Any]] = []
    references: list[dict[str, Any]] = []
    ref_cfg = RefConfig(restarts=grid.reference_restarts, solver=replace(grid.solver, method="coordinate"),
                        tol=grid.tol)
    for i, spec in enumerate(grid.instances):
        try:
            a = build_instance(spec).a
            a_norm = op_norm(a).value
            ref = sdp_reference(a, ref_cfg, a_norm)
        except Exception as exc:  # recorded, run continues
            failures.append({"instance": i, "k": None, "error": f"{type(exc).__name__}: {exc}"})
            prepared.append(None)
            continue
        prepared.append((a, a_norm, ref))
        references.append({"instance": i, **spec.to_dict(), "op_norm": a_norm, **ref.to_dict()})

    jobs = []
    for i, spec in enumerate(grid.instances):
        for j, k in enumerate(grid.ks):
            jobs.append((i, spec, k, i * len(grid.ks) + j))

    def work(job):
        i, spec, k, c = job
        if prepared[i] is None:
            return [_error_row(spec, spec.n, k, i)], 0.0, "instance failed"
        a, a_norm, ref = prepared[i]
        try:
            rows, secs = _run_cell(grid, i, spec, a, a_norm, ref, k, c)
            return rows, secs, None
        except Exception as exc:  # recorded, run continues
            return [_error_row(spec, a.n, k, i)], 0.0, f"{type(exc).__name__}: {exc}"

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(work, jobs))
    else:
        outcomes = [work(job) for job in jobs]

    rows: list[dict[str, Any]] = []
    timings = []
    for (i, spec, k, c), (cell_rows, secs, err) in zip(jobs, outcomes):
        rows.extend(cell_rows)
        timings.append({"cell": c, "instance": i, "family": spec.family, "n": cell_rows[0]["n"], "k": k,
                        "seconds": secs})
        if err is not None and prepared[i] is not None:
            failures.append({"instance": i, "k": k, "error": err})
    rows.sort(key=lambda r: (r["family"], r["n"], r["instance"], r["k"], r["restart"]))
    return ExperimentResult(rows, _summarize(grid, rows, references, failures), timings)


def _summarize(grid, rows, references, failures) -> dict[str, Any]:
    groups: dict[int, dict[str, Any]] = {}
    for i, spec in enumerate(grid.instances):
        groups[i] = {"instance": i, **spec.to_dict(), "per_k": {}}
    for row in rows:
        if row["holds"] == "error":
            continue
        per_k = groups[row["instance"]]["per_k"].setdefault(str(row["k"]), {
            "rows": 0, "converged": 0, "max_gap": None, "mean_gap": None, "all_hold": True, "_gaps": []})
        per_k["rows"] += 1
        per_k["converged"] += bool(row["converged"])
        if row["holds"] is False:
            per_k["all_hold"] = False
        if row["converged"]:
            per_k["_gaps"].append(row["gap"])
    floors = {r["instance"]: max(r["certified_error"], 1e-9 * (1.0 + abs(r["value"]))) for r in references}
    for i, g in groups.items():
        ks, maxes = [], []
        # gaps at or below the reference's own error are zero to within resolution; a log-log fit through them
        # measures rounding noise, so they are left out
        floor = floors.get(i, 0.0)
        for k, cell in sorted(g["per_k"].items(), key=lambda kv: int(kv[0])):
            gaps = cell.pop("_gaps")
            if gaps:
                cell["max_gap"] = max(gaps)
                cell["mean_gap"] = float(np.mean(gaps))
                if int(k) >= 2 and cell["max_gap"] > floor:
                    ks.append(int(k))
                    maxes.append(cell["max_gap"])
        g["gap_floor"] = floor
        g["alpha_ks"] = ks
        g["alpha"] = fit_exponent(ks, maxes)
    checked = [r for r in rows if r["holds"] in (True, False)]
    return {
        "rows": len(rows),
        "converged": sum(bool(r["converged"]) for r in rows),
        "all_hold": all(r["holds"] is True for r in checked) and bool(checked),
        "bound_constants": {"bound8": 8.0, "bound5sqrt2": PROOF_CONSTANT},
        "instances": list(groups.values()),
        "references": references,
        "failures": failures,
        "grid": {"k": list(grid.ks), "restarts": grid.restarts, "seed": grid.seed,
                 "method": grid.solver.method, "reference_restarts": grid.reference_restarts},
    }
