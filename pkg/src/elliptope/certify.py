"""Lagrange multipliers, local-maximum checks, dual bounds and the gap report.

At a local maximum ``sigma`` of F_A on S(n, k) the multipliers are
``lambda_i = |g_i|`` with ``g = A sigma``, and the following hold:

* ``(Lambda - A) sigma = 0``;
* ``F_A(sigma) = tr(Lambda)``;
* every principal submatrix of ``Lambda - A`` of size at most ``k - 1`` is PSD;
* ``sum_i lambda_i^2 <= n |A|_2^2``;
* the smallest eigenvalue of ``sigma^T sigma`` is at most ``n / k``.

Independently of stationarity, ``Lambda + eps I - A >= 0`` with
``eps = max(0, -lambda_min(Lambda - A))`` makes ``tr(Lambda) + n eps`` an
upper bound on the SDP value.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from . import rng
from .manifold import objective
from .symmat import SymMatrix, min_eig, op_norm

THEOREM_CONSTANT = 8.0
PROOF_CONSTANT = 5.0 * math.sqrt(2.0)


@dataclass(frozen=True)
class TolProfile:
    # |F - tr(Lambda)| <= rel * (1 + |F|)
    rel: float = 1e-8
    # eigenvalue checks: >= -eig * |A|_2
    eig: float = 1e-6
    # |(Lambda - A) sigma|_F <= stationarity * max(1, |A|_2) * sqrt(n)
    stationarity: float = 1e-7
    # sum lambda_i^2 <= n |A|_2^2 (1 + norm)
    norm: float = 1e-6
    # xi_min(sigma^T sigma) <= n/k + gram * n
    gram: float = 1e-8
    subsets: int = 50
    seed: int = 0


@dataclass(frozen=True)
class Multipliers:
    lam: np.ndarray
    trace: float


def multipliers(a: SymMatrix, sigma: np.ndarray) -> Multipliers:
    """``lam_i = A_ii + |sum_{j != i} A_ij sigma_j|``.

    For zero-diagonal ``A`` this is ``|(A sigma)_i|``.  Splitting off the
    diagonal keeps the multipliers right when ``A_ii`` is negative: a
    stationary row then has ``(A sigma)_i = lam_i sigma_i`` with ``lam_i < 0``,
    which the plain norm would report with the wrong sign.
    """
    d = a.diag()
    h = a.matmat(sigma) - d[:, None] * sigma
    lam = d + np.linalg.norm(h, axis=1)
    return Multipliers(lam, float(lam.sum()))


def first_order_residual(a: SymMatrix, sigma: np.ndarray, lam: np.ndarray) -> float:
    """Frobenius norm of ``(Lambda - A) sigma``."""
    return float(np.linalg.norm(lam[:, None] * sigma - a.matmat(sigma)))


def stationarity_threshold(a: SymMatrix, a_norm: float, tol: TolProfile) -> float:
    return tol.stationarity * max(1.0, a_norm) * math.sqrt(a.n)


def gram_min_eig(sigma: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(sigma.T @ sigma)[0])


def delta_diagnostic(sigma: np.ndarray) -> tuple[float, float]:
    """``|sigma x|_2`` for the bottom eigenvector ``x`` of ``sigma^T sigma``, and ``sqrt(n/k)``."""
    n, k = sigma.shape
    _, vecs = np.linalg.eigh(sigma.T @ sigma)
    return float(np.linalg.norm(sigma @ vecs[:, 0])), math.sqrt(n / k)


def _subsets(n: int, size: int, count: int, seed: int):
    if size < 1 or count < 1:
        return []
    total = math.comb(n, size)
    if total <= count:
        return [np.array(c) for c in itertools.combinations(range(n), size)]
    gen = rng.stream(seed, rng.SUBSETS)
    return [np.sort(gen.choice(n, size=size, replace=False)) for _ in range(count)]


def submatrix_psd_check(a: SymMatrix, lam: np.ndarray, k: int, tol: TolProfile, a_norm: float) -> tuple[int, int, float]:
    """Sampled check that ``(Lambda - A)_{S,S}`` is PSD for ``|S| = k - 1``.

    Returns ``(checked, failures, smallest eigenvalue seen)``; subsets of
    size ``k - 1`` cover all smaller ones by interlacing.
    """
    size = min(k - 1, a.n)
    subs = _subsets(a.n, size, tol.subsets, tol.seed)
    floor = -tol.eig * a_norm
    failures = 0
    lowest = math.inf
    for s in subs:
        block = np.diag(lam[s]) - a.submatrix(s)
        e = float(np.linalg.eigvalsh(block)[0])
        lowest = min(lowest, e)
        failures += e < floor
    return len(subs), failures, (lowest if subs else float("nan"))


def check_local_max_conditions(a: SymMatrix, sigma: np.ndarray, mult: Multipliers, tol: TolProfile = TolProfile(),
                               a_norm: float | None = None) -> dict[str, Any]:
    """All local-maximum necessary conditions; every outcome is returned as data."""
    if a_norm is None:
        a_norm = op_norm(a).value
    n, k = sigma.shape
    lam = mult.lam
    f = objective(a, sigma)
    resid = first_order_residual(a, sigma, lam)
    stationary = resid <= stationarity_threshold(a, a_norm, tol)
    trace_gap = abs(f - mult.trace)
    norm_sq = float(np.sum(lam * lam))
    norm_bound = n * a_norm ** 2
    xi = gram_min_eig(sigma)
    checked, failures, sub_min = submatrix_psd_check(a, lam, k, tol, a_norm)
    return {
        "objective": f,
        "trace_lambda": mult.trace,
        "first_order_residual": resid,
        "stationary": bool(stationary),
        "status": "ok" if stationary else "not_at_stationary_point",
        "trace_gap": trace_gap,
        "trace_matches_objective": bool(trace_gap <= tol.rel * (1.0 + abs(f))),
        "min_multiplier": float(lam.min()),
        # (Lambda - A)_ii >= 0, i.e. lam_i >= 0 when A has zero diagonal
        "multipliers_nonnegative": bool(np.min(lam - a.diag()) >= -1e-10 * a_norm),
        "multiplier_norm_sq": norm_sq,
        "multiplier_norm_bound": norm_bound,
        "multiplier_norm_ok": bool(norm_sq <= norm_bound * (1.0 + tol.norm)),
        "gram_min_eig": xi,
        "gram_bound": n / k,
        "gram_ok": bool(xi <= n / k + tol.gram * n),
        "submatrix_checks": checked,
        "submatrix_psd_failures": int(failures),
        "submatrix_min_eig": sub_min,
    }


@dataclass(frozen=True)
class DualCertificate:
    sdp_upper_bound: float
    dual_min_eig: float
    dual_eps: float
    is_global_certified: bool
    determinate: bool


def dual_certificate(a: SymMatrix, sigma: np.ndarray, mult: Multipliers, tol: TolProfile = TolProfile(),
                     a_norm: float | None = None) -> DualCertificate:
    """Weak-duality upper bound ``tr(Lambda) + n eps`` and the global-optimality verdict.

    Certification needs a small dual infeasibility ``eps``, first-order
    stationarity and ``F = tr(Lambda)``; the last condition rejects
    stationary points that are not maxima.
    """
    if a_norm is None:
        a_norm = op_norm(a).value
    est = min_eig(a.shifted(mult.lam))
    eps = max(0.0, -est.value)
    upper = mult.trace + a.n * eps
    f = objective(a, sigma)
    resid = first_order_residual(a, sigma, mult.lam)
    certified = (
        est.converged
        and eps <= tol.eig * max(a_norm, np.finfo(float).tiny)
        and resid <= stationarity_threshold(a, a_norm, tol)
        and abs(f - mult.trace) <= tol.rel * (1.0 + abs(f))
    )
    return DualCertificate(upper, est.value, eps, bool(certified), est.converged)


@dataclass(frozen=True)
class TheoremGap:
    applicable: bool
    theorem_gap: float
    theorem_bound: float
    theorem_bound_5sqrt2: float
    slack: float
    holds: bool
    status: str


def theorem_bound(n: int, k: int, a_norm: float, constant: float = THEOREM_CONSTANT) -> float:
    return constant * n * a_norm / math.sqrt(k)


def theorem_gap_report(a: SymMatrix, sigma: np.ndarray, sdp_reference: float | None,
                       reference_error: float = 0.0, a_norm: float | None = None,
                       norm_rel_tol: float = 1e-6) -> TheoremGap:
    """Compare ``sdp_reference - F_A(sigma)`` against ``8 n |A|_2 / sqrt(k)``.

    The slack is ``reference_error + norm_rel_tol * n |A|_2``.  For ``k = 1``
    the report is marked ``inapplicable_k1``.
    """
    if sdp_reference is None:
        raise ValueError("an SDP reference value is required for the gap report")
    if a_norm is None:
        a_norm = op_norm(a).value
    n, k = sigma.shape
    gap = sdp_reference - objective(a, sigma)
    slack = reference_error + norm_rel_tol * n * a_norm
    if k < 2:
        nan = float("nan")
        return TheoremGap(False, gap, nan, nan, slack, False, "inapplicable_k1")
    b8 = theorem_bound(n, k, a_norm)
    b5 = theorem_bound(n, k, a_norm, PROOF_CONSTANT)
    return TheoremGap(True, gap, b8, b5, slack, bool(gap <= b8 + slack), "ok")


@dataclass
class Certificate:
    n: int
    k: int
    objective: float
    op_norm: float
    trace_lambda: float
    first_order_residual: float
    stationary: bool
    status: str
    trace_gap: float
    trace_matches_objective: bool
    min_multiplier: float
    multipliers_nonnegative: bool
    multiplier_norm_sq: float
    multiplier_norm_bound: float
    multiplier_norm_ok: bool
    gram_min_eig: float
    gram_bound: float
    gram_ok: bool
    submatrix_checks: int
    submatrix_psd_failures: int
    submatrix_min_eig: float
    dual_min_eig: float
    dual_eps: float
    dual_determinate: bool
    sdp_upper_bound: float
    is_global_certified: bool
    delta_norm: float
    delta_bound: float
    sdp_reference: float | None = None
    reference_error: float | None = None
    theorem_status: str = "no_reference"
    theorem_gap: float | None = None
    theorem_bound: float | None = None
    theorem_bound_5sqrt2: float | None = None
    theorem_slack: float | None = None
    theorem_holds: bool | None = None

    @property
    def local_max_ok(self) -> bool:
        return (self.trace_matches_objective and self.multiplier_norm_ok and self.gram_ok
                and self.multipliers_nonnegative and self.submatrix_psd_failures == 0)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        for key, val in out.items():
            if isinstance(val, float) and not math.isfinite(val):
                out[key] = None
        return out


def certify(a: SymMatrix, sigma: np.ndarray, sdp_reference: float | None = None, reference_error: float = 0.0,
            tol: TolProfile = TolProfile(), a_norm: float | None = None) -> Certificate:
    """Run every check on ``sigma`` and, given a reference value, the gap report."""
    if a_norm is None:
        a_norm = op_norm(a).value
    n, k = sigma.shape
    mult = multipliers(a, sigma)
    lem = check_local_max_conditions(a, sigma, mult, tol, a_norm)
    dual = dual_certificate(a, sigma, mult, tol, a_norm)
    dnorm, dbound = delta_diagnostic(sigma)
    cert = Certificate(
        n=n, k=k, op_norm=a_norm, **lem,
        dual_min_eig=dual.dual_min_eig, dual_eps=dual.dual_eps, dual_determinate=dual.determinate,
        sdp_upper_bound=dual.sdp_upper_bound, is_global_certified=dual.is_global_certified,
        delta_norm=dnorm, delta_bound=dbound,
    )
    if k < 2:
        cert.theorem_status = "inapplicable_k1"
    if sdp_reference is not None:
        rep = theorem_gap_report(a, sigma, sdp_reference, reference_error, a_norm)
        cert.sdp_reference = sdp_reference
        cert.reference_error = reference_error
        cert.theorem_status = rep.status
        cert.theorem_gap = rep.theorem_gap
        cert.theorem_slack = rep.slack
        if rep.applicable:
            cert.theorem_bound = rep.theorem_bound
            cert.theorem_bound_5sqrt2 = rep.theorem_bound_5sqrt2
            cert.theorem_holds = rep.holds
    return cert
