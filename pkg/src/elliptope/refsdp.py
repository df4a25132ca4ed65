"""Reference values of SDP(A) = max <A, X> over the elliptope.

:func:`sdp_reference` solves the factorized problem at rank about
``sqrt(2n)`` and lets the dual bound decide whether that was enough.
:func:`brute_force_sdp` is an independent grid-search oracle for ``n <= 5``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .certify import TolProfile, dual_certificate, multipliers
from .solver import SolverConfig, SolveReport, multi_restart
from .symmat import SymMatrix, op_norm


@dataclass(frozen=True)
class RefConfig:
    restarts: int = 5
    max_escalations: int = 3
    # sigma counts as rank-deficient when s_min <= rank_tol * s_max
    rank_tol: float = 1e-3
    solver: SolverConfig = SolverConfig()
    tol: TolProfile = TolProfile()


@dataclass(frozen=True)
class ReferenceValue:
    value: float
    upper_bound: float
    certified_error: float
    method: str
    k_used: int
    certified: bool

    def to_dict(self) -> dict:
        return asdict(self)


def reference_rank(n: int) -> int:
    return min(n, math.ceil(math.sqrt(2 * n)) + 1)


def sdp_reference(a: SymMatrix, cfg: RefConfig = RefConfig(), a_norm: float | None = None,
                  best_out: list[SolveReport] | None = None) -> ReferenceValue:
    """Best certified objective of a high-rank multi-restart solve.

    Starts at ``k = min(n, ceil(sqrt(2n)) + 1)``.  If the best point is not
    certified globally optimal the rank doubles (at most ``max_escalations``
    times) and a last attempt runs at ``k = n``.  Escalation stops early when
    the best point is numerically rank-deficient: then the remaining gap is
    a convergence issue, not a rank one.  ``value`` is the largest
    objective seen and ``upper_bound`` the smallest dual bound seen, so
    ``certified_error = upper_bound - value`` is honest whatever happens.
    If ``best_out`` is a list, the best solve report is appended to it.
    """
    if a_norm is None:
        a_norm = op_norm(a).value
    k = reference_rank(a.n)
    ranks = [k]
    for _ in range(cfg.max_escalations):
        k = min(a.n, 2 * k)
        if k not in ranks:
            ranks.append(k)
    if a.n not in ranks:
        ranks.append(a.n)

    best: SolveReport | None = None
    upper = math.inf
    certified = False
    for k in ranks:
        res = multi_restart(a, k, cfg.restarts, cfg.solver, a_norm)
        mult = multipliers(a, res.best.sigma)
        dual = dual_certificate(a, res.best.sigma, mult, cfg.tol, a_norm)
        upper = min(upper, dual.sdp_upper_bound)
        if best is None or res.best.objective > best.objective:
            best = res.best
        if dual.is_global_certified:
            certified = True
            break
        if is_rank_deficient(res.best.sigma, cfg.rank_tol):
            # spare rank already; more columns cannot close the gap, only more iterations can
            break
    value = best.objective
    upper = max(upper, value)
    if best_out is not None:
        best_out.append(best)
    return ReferenceValue(value, upper, upper - value, "highrank_bm", best.sigma.shape[1], certified)


def is_rank_deficient(sigma: np.ndarray, rank_tol: float) -> bool:
    sv = np.linalg.svd(sigma, compute_uv=False)
    return sigma.shape[1] > sigma.shape[0] or sv[-1] <= rank_tol * sv[0]


def _rank2_values(a: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """F_A for a batch of angle vectors (rows of ``theta``) in S(n, 2)."""
    c, s = np.cos(theta), np.sin(theta)
    return np.einsum("mi,mi->m", c @ a, c) + np.einsum("mi,mi->m", s @ a, s)


def brute_force_sdp(a: SymMatrix, resolution: float = 2 * math.pi / 60, refinements: int = 3,
                    candidates: int = 8, chunk: int = 1 << 16) -> float:
    """Grid search over ``sigma_i = (cos t_i, sin t_i)`` with ``t_1 = 0``.

    A coarse grid of spacing ``resolution`` over ``[0, 2 pi)^(n-1)`` is
    followed by ``refinements`` rounds of local search, each on a grid ten
    times finer spanning one previous step on either side of the incumbent;
    the ``candidates`` best coarse cells are each refined.  Returns the best
    value found, a lower bound on SDP(A) that is tight for ``n <= 5`` up to
    grid error, because the elliptope always has a rank-2 optimum there.  Ties in the coarse grid go to the lowest cell index.
    """
    n = a.n
    if n > 5:
        raise ValueError(f"brute force is limited to n <= 5, got n={n}")
    d = a.dense()
    if n == 1:
        return float(d[0, 0])
    free = n - 1
    steps = max(1, int(round(2 * math.pi / resolution)))
    grid = np.arange(steps) * (2 * math.pi / steps)

    # keep the best `candidates` coarse cells; refining several guards
    # against near-tied basins
    cand_vals = np.empty(0)
    cand_theta = np.empty((0, n))
    total = steps ** free
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        block = np.stack(np.unravel_index(idx, (steps,) * free), axis=1)
        theta = np.zeros((len(block), n))
        theta[:, 1:] = grid[block]
        vals = np.concatenate([cand_vals, _rank2_values(d, theta)])
        theta = np.concatenate([cand_theta, theta])
        keep = np.argsort(-vals, kind="stable")[:candidates]
        cand_vals, cand_theta = vals[keep], theta[keep]

    offsets = np.arange(-10, 11) / 10.0
    local_base = np.array(list(itertools.product(offsets, repeat=free)))
    best_val = -math.inf
    for val, th in zip(cand_vals, cand_theta):
        step = 2 * math.pi / steps
        for _ in range(refinements):
            theta = np.tile(th, (len(local_base), 1))
            theta[:, 1:] += local_base * step
            vals = _rank2_values(d, theta)
            p = int(np.argmax(vals))
            if vals[p] >= val:
                val, th = float(vals[p]), theta[p].copy()
            step /= 10.0
        best_val = max(best_val, float(val))
    return best_val


def closed_form_2x2(a: SymMatrix) -> float:
    """SDP value of a 2x2 matrix: A_11 + A_22 + 2 |A_12|."""
    if a.n != 2:
        raise ValueError("closed form needs a 2x2 matrix")
    d = a.dense()
    return float(d[0, 0] + d[1, 1] + 2 * abs(d[0, 1]))


def with_restarts(cfg: RefConfig, restarts: int) -> RefConfig:
    return replace(cfg, restarts=restarts)
