"""Ascent methods on S(n, k) and the multi-restart driver."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
from numba import njit

from . import rng
from .manifold import (StepRejected, check_point, normalize_rows, project_tangent,
                       random_point, random_tangent, retract)
from .symmat import SymMatrix, op_norm

log = logging.getLogger(__name__)

METHODS = ("coordinate", "rgrad")
STEP_RULES = ("bb", "fixed")


@dataclass(frozen=True)
class SolverConfig:
    method: str = "coordinate"
    # converged when |riemannian grad|_F <= grad_tol * max(1, |A|_2) * sqrt(n)
    grad_tol: float = 1e-8
    # per-sweep gain threshold, relative to 1 + |F|
    obj_tol: float = 1e-10
    max_sweeps: int = 20000
    max_iters: int = 20000
    init_step: float = 1.0
    shrink: float = 0.5
    armijo: float = 1e-4
    max_halvings: int = 60
    # first trial step of each line search: "fixed" always starts at init_step,
    # "bb" uses the Barzilai-Borwein length from the previous step
    step_rule: str = "bb"
    seed: int = 0
    shuffle: bool = False
    perturb_on_stall: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"unknown step rule {self.step_rule!r}; expected one of {', '.join(STEP_RULES)}")
        if min(self.grad_tol, self.obj_tol, self.init_step, self.armijo) <= 0:
            raise ValueError("tolerances and step parameters must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass
class SolveReport:
    sigma: np.ndarray
    objective_trace: list[float]
    grad_norm: float
    iterations: int
    converged: bool
    restart_seed: int
    method: str = "coordinate"
    restart: int = 0
    extra: dict[str, Any] = field(default_factory=dict)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    def to_dict(self, sigma_path: str | None = None) -> dict[str, Any]:
        out: dict[str, Any] = {
            "objective": self.objective,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "restart_seed": self.restart_seed,
            "restart": self.restart,
            "method": self.method,
            "n": int(self.sigma.shape[0]),
            "k": int(self.sigma.shape[1]),
        }
        if sigma_path is not None:
            out["sigma_path"] = str(sigma_path)
        return out


@njit(cache=True, nogil=True)
def _sweep_dense(a, sigma, order):
    n, k = sigma.shape
    h = np.empty(k)
    for p in range(order.shape[0]):
        i = order[p]
        h[:] = 0.0
        for j in range(n):
            aij = a[i, j]
            if j != i and aij != 0.0:
                for c in range(k):
                    h[c] += aij * sigma[j, c]
        nrm = 0.0
        for c in range(k):
            nrm += h[c] * h[c]
        nrm = np.sqrt(nrm)
        if nrm >= 1e-14:
            for c in range(k):
                sigma[i, c] = h[c] / nrm


@njit(cache=True, nogil=True)
def _sweep_csr(indptr, indices, data, sigma, order):
    k = sigma.shape[1]
    h = np.empty(k)
    for p in range(order.shape[0]):
        i = order[p]
        h[:] = 0.0
        for q in range(indptr[i], indptr[i + 1]):
            j = indices[q]
            if j != i:
                aij = data[q]
                for c in range(k):
                    h[c] += aij * sigma[j, c]
        nrm = 0.0
        for c in range(k):
            nrm += h[c] * h[c]
        nrm = np.sqrt(nrm)
        if nrm >= 1e-14:
            for c in range(k):
                sigma[i, c] = h[c] / nrm


def _sweep(a: SymMatrix, sigma: np.ndarray, order: np.ndarray) -> None:
    if a.is_sparse:
        csr = a.csr
        _sweep_csr(csr.indptr.astype(np.int64), csr.indices.astype(np.int64), csr.data, sigma, order)
    else:
        _sweep_dense(np.ascontiguousarray(a.dense()), sigma, order)


def grad_threshold(a: SymMatrix, cfg: SolverConfig, a_norm: float) -> float:
    return cfg.grad_tol * max(1.0, a_norm) * np.sqrt(a.n)


def _state(a: SymMatrix, sigma: np.ndarray) -> tuple[float, float]:
    g = a.matmat(sigma)
    f = float(np.sum(sigma * g))
    gn = 2.0 * float(np.linalg.norm(project_tangent(sigma, g)))
    return f, gn


def coordinate_ascent(a: SymMatrix, sigma0: np.ndarray, cfg: SolverConfig = SolverConfig(),
                      a_norm: float | None = None, restart_seed: int = 0) -> SolveReport:
    """Block coordinate ascent: each row jumps to the exact maximizer of F over that row.

    Row ``i`` is replaced by ``h_i / |h_i|`` with ``h_i = sum_{j != i} A_ij sigma_j``
    (rows with ``|h_i| < 1e-14`` are kept), sweeping rows in ascending order
    unless ``cfg.shuffle`` is set.  ``objective_trace[0]`` is the starting
    value and entry ``s`` the value after sweep ``s``.  Stops once a sweep
    gains at most ``obj_tol * (1 + |F|)`` with the gradient under tolerance,
    or after ``max_sweeps``.
    """
    sigma = np.array(check_point(sigma0), dtype=float, order="C")
    if sigma.shape[0] != a.n:
        raise ValueError(f"point has {sigma.shape[0]} rows, matrix has n={a.n}")
    if a_norm is None:
        a_norm = op_norm(a).value
    gtol = grad_threshold(a, cfg, a_norm)
    order = np.arange(a.n, dtype=np.int64)
    shuffler = rng.stream(restart_seed, rng.SHUFFLE) if cfg.shuffle else None

    f, gn = _state(a, sigma)
    trace = [f]
    converged = False
    sweeps = 0
    while sweeps < cfg.max_sweeps:
        if shuffler is not None:
            order = shuffler.permutation(a.n).astype(np.int64)
        _sweep(a, sigma, order)
        sweeps += 1
        f_new, gn = _state(a, sigma)
        trace.append(f_new)
        gain = f_new - f
        f = f_new
        if gn <= gtol and gain <= cfg.obj_tol * (1.0 + abs(f)):
            converged = True
            break
    return SolveReport(sigma, trace, gn, sweeps, converged, restart_seed, "coordinate")


def _tangent_grad(sigma: np.ndarray, g: np.ndarray) -> np.ndarray:
    # projecting twice leaves a normal component of order eps * |grad| rather
    # than eps * |g|, which the line search needs once |grad| << |g|
    return 2.0 * project_tangent(sigma, project_tangent(sigma, g))


def _retraction_gain(a: SymMatrix, sigma: np.ndarray, g: np.ndarray, xi: np.ndarray, a_xi: np.ndarray,
                     t: float) -> float:
    """F(retract(sigma, xi, t)) - F(sigma) for tangent ``xi``, without cancellation.

    Rows of the retracted point are ``w_i (sigma_i + t xi_i)`` with
    ``w_i = 1 + d_i``, ``d_i = -t^2 |xi_i|^2 / (r_i (1 + r_i))``,
    ``r_i = sqrt(1 + t^2 |xi_i|^2)``.  Expanding F in ``d`` and ``t`` leaves
    only small terms, so the gain keeps its relative accuracy even when it is
    far below the rounding error of F itself.
    """
    sq = t * t * np.einsum("ij,ij->i", xi, xi)
    r = np.sqrt(1.0 + sq)
    d = -sq / (r * (1.0 + r))
    w = 1.0 + d
    ds = d[:, None] * sigma
    a_ds = a.matmat(ds)
    wx = w[:, None] * xi
    a_wx = a_xi + a.matmat(d[:, None] * xi)
    gain = float(np.sum(ds * a_ds)) + 2.0 * float(np.dot(d, np.einsum("ij,ij->i", sigma, g)))
    gain += 2.0 * t * float(np.sum(wx * (g + a_ds)))
    gain += t * t * float(np.sum(wx * a_wx))
    return gain


def riemannian_ascent(a: SymMatrix, sigma0: np.ndarray, cfg: SolverConfig = SolverConfig(),
                      a_norm: float | None = None, restart_seed: int = 0) -> SolveReport:
    """Riemannian gradient ascent with normalization retraction and Armijo backtracking.

    Each iteration tries ``t0, t0*shrink, ...`` until the gain along the
    retraction is at least ``armijo * t * |grad|^2``.  ``t0`` is ``init_step``
    on the first iteration (and always, with ``step_rule="fixed"``);
    otherwise it is the Barzilai-Borwein length ``<s,s>/<s,y>`` of the
    previous step, falling back to ``init_step`` when ``<s,y> <= 0``.  If
    ``max_halvings`` trials all fail the run stops with ``converged=False``.
    """
    sigma = np.array(check_point(sigma0), dtype=float)
    if sigma.shape[0] != a.n:
        raise ValueError(f"point has {sigma.shape[0]} rows, matrix has n={a.n}")
    if a_norm is None:
        a_norm = op_norm(a).value
    gtol = grad_threshold(a, cfg, a_norm)

    g = a.matmat(sigma)
    f = float(np.sum(sigma * g))
    grad = _tangent_grad(sigma, g)
    trace = [f]
    converged = False
    t0 = cfg.init_step
    it = 0
    while True:
        gn = float(np.linalg.norm(grad))
        if gn <= gtol:
            converged = True
            break
        if it >= cfg.max_iters:
            break
        a_xi = a.matmat(grad)
        t = t0
        accepted = False
        for _ in range(cfg.max_halvings):
            if _retraction_gain(a, sigma, g, grad, a_xi, t) >= cfg.armijo * t * gn * gn:
                try:
                    cand = retract(sigma, grad, t)
                    accepted = True
                    break
                except StepRejected:
                    pass
            t *= cfg.shrink
        if not accepted:
            log.debug("line search failed at iteration %d (grad norm %.3g)", it, gn)
            break
        g_c = a.matmat(cand)
        grad_c = _tangent_grad(cand, g_c)
        if cfg.step_rule == "bb":
            s = cand - sigma
            # ascent on F is descent on -F: y = -(grad_c - grad moved to the new tangent space)
            y = project_tangent(cand, grad) - grad_c
            sy = float(np.sum(s * y))
            t0 = min(max(float(np.sum(s * s)) / sy, 1e-8), 1e8) if sy > 0 else cfg.init_step
        sigma, g, grad = cand, g_c, grad_c
        f = float(np.sum(sigma * g))
        it += 1
        trace.append(f)
    return SolveReport(sigma, trace, gn, it, converged, restart_seed, "rgrad")


def solve(a: SymMatrix, sigma0: np.ndarray, cfg: SolverConfig = SolverConfig(),
          a_norm: float | None = None, restart_seed: int = 0) -> SolveReport:
    """Dispatch on ``cfg.method``; applies the optional stall perturbation."""
    run = coordinate_ascent if cfg.method == "coordinate" else riemannian_ascent
    if a_norm is None:
        a_norm = op_norm(a).value
    rep = run(a, sigma0, cfg, a_norm, restart_seed)
    if cfg.perturb_on_stall:
        gen = rng.stream(restart_seed, rng.PERTURB)
        u = random_tangent(rep.sigma, gen)
        nu = np.linalg.norm(u)
        if nu > 0:
            kicked = normalize_rows(rep.sigma + 1e-6 * u / nu)
            again = run(a, kicked, cfg, a_norm, restart_seed)
            if again.objective > rep.objective:
                again.objective_trace = rep.objective_trace + again.objective_trace
                again.iterations += rep.iterations
                again.extra["perturbed"] = True
                rep = again
    return rep


@dataclass
class MultiRestartResult:
    best: SolveReport
    reports: list[SolveReport]


def initial_point(n: int, k: int, restart_seed: int) -> np.ndarray:
    return random_point(n, k, np.random.default_rng(restart_seed))


def multi_restart(a: SymMatrix, k: int, restarts: int, cfg: SolverConfig = SolverConfig(),
                  a_norm: float | None = None) -> MultiRestartResult:
    """Best of ``restarts`` independent solves from uniform random starts.

    Restart ``r`` starts from a point drawn with seed
    ``derive_seed(cfg.seed, RESTART, r)``, so the outcome does not depend on
    scheduling.  Ties in the objective go to the lowest restart index.
    """
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    if a_norm is None:
        a_norm = op_norm(a).value

    def one(r: int) -> SolveReport:
        seed = rng.derive_seed(cfg.seed, rng.RESTART, r)
        rep = solve(a, initial_point(a.n, k, seed), cfg, a_norm, seed)
        rep.restart = r
        return rep

    if cfg.workers > 1 and restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            reports = list(pool.map(one, range(restarts)))
    else:
        reports = [one(r) for r in range(restarts)]
    best = reports[0]
    for rep in reports[1:]:
        if rep.objective > best.objective:
            best = rep
    return MultiRestartResult(best, reports)


def with_seed(cfg: SolverConfig, seed: int) -> SolverConfig:
    return replace(cfg, seed=seed)
