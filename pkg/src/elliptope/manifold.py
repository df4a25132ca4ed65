"""The product of spheres S(n, k) and the objective F_A on it.

Points are plain ``(n, k)`` float arrays whose rows have unit norm; tangent
vectors are ``(n, k)`` arrays whose rows are orthogonal to the matching rows
of the base point.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from .symmat import SymMatrix

ROW_NORM_TOL = 1e-12
TANGENT_TOL = 1e-10
ZERO_ROW = 1e-14


class StepRejected(ValueError):
    """A retraction would normalize a (numerically) zero row."""


def check_point(sigma: np.ndarray, tol: float = ROW_NORM_TOL) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float)
    if sigma.ndim != 2 or sigma.shape[1] < 1:
        raise ValueError(f"expected an (n, k) array, got shape {sigma.shape}")
    dev = np.abs(np.linalg.norm(sigma, axis=1) - 1.0)
    if dev.size and dev.max() > tol:
        raise ValueError(f"row {int(dev.argmax())} has norm off by {dev.max():.3g}")
    return sigma


def check_tangent(sigma: np.ndarray, u: np.ndarray, tol: float = TANGENT_TOL) -> np.ndarray:
    if u.shape != sigma.shape:
        raise ValueError(f"tangent shape {u.shape} does not match point {sigma.shape}")
    inner = np.abs(np.einsum("ij,ij->i", sigma, u))
    if inner.size and inner.max() > tol:
        raise ValueError(f"row {int(inner.argmax())} is not tangent (<sigma_i, u_i> = {inner.max():.3g})")
    return u


def normalize_rows(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def random_point(n: int, k: int, gen: np.random.Generator) -> np.ndarray:
    """Rows drawn uniformly from the unit sphere in R^k."""
    x = gen.standard_normal((n, k))
    norms = np.linalg.norm(x, axis=1)
    while np.any(norms < ZERO_ROW):  # measure zero, but k = 1 makes it cheap to guard
        bad = norms < ZERO_ROW
        x[bad] = gen.standard_normal((int(bad.sum()), k))
        norms = np.linalg.norm(x, axis=1)
    return x / norms[:, None]


def project_tangent(sigma: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Remove the radial component of every row of ``x``."""
    return x - np.einsum("ij,ij->i", sigma, x)[:, None] * sigma


def random_tangent(sigma: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    return project_tangent(sigma, gen.standard_normal(sigma.shape))


def _check_dims(a: SymMatrix, sigma: np.ndarray) -> None:
    if sigma.ndim != 2 or sigma.shape[0] != a.n:
        raise ValueError(f"point has shape {sigma.shape}, matrix has n={a.n}")


def objective(a: SymMatrix, sigma: np.ndarray) -> float:
    """F_A(sigma) = sum_ij A_ij <sigma_i, sigma_j>."""
    _check_dims(a, sigma)
    return float(np.sum(sigma * a.matmat(sigma)))


def euclidean_grad(a: SymMatrix, sigma: np.ndarray) -> np.ndarray:
    _check_dims(a, sigma)
    return 2.0 * a.matmat(sigma)


def riemannian_grad(a: SymMatrix, sigma: np.ndarray) -> np.ndarray:
    """Tangent projection of the Euclidean gradient: rows 2 g_i - 2 <g_i, sigma_i> sigma_i."""
    return project_tangent(sigma, euclidean_grad(a, sigma))


def retract(sigma: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
    """Row-wise normalization of ``sigma + t u``."""
    y = sigma + t * u
    norms = np.linalg.norm(y, axis=1)
    if norms.size and norms.min() < ZERO_ROW:
        raise StepRejected(f"row {int(norms.argmin())} collapses to zero at t={t}")
    return y / norms[:, None]


def geodesic_curve(sigma: np.ndarray, u: np.ndarray, t: float) -> np.ndarray:
    """sigma_i cos(|u_i| t) + (u_i / |u_i|) sin(|u_i| t); rows with u_i = 0 stay put."""
    norms = np.linalg.norm(u, axis=1)
    moving = norms >= ZERO_ROW
    out = sigma.copy()
    nm = norms[moving]
    uhat = u[moving] / nm[:, None]
    out[moving] = sigma[moving] * np.cos(nm * t)[:, None] + uhat * np.sin(nm * t)[:, None]
    return out


def second_order_form(a: SymMatrix, lam: np.ndarray, u: np.ndarray) -> float:
    """sum_ij (Lambda - A)_ij <u_i, u_j> for diagonal Lambda = diag(lam)."""
    _check_dims(a, u)
    lam = np.asarray(lam, dtype=float)
    return float(np.sum(lam * np.einsum("ij,ij->i", u, u)) - np.sum(u * a.matmat(u)))


def taylor_coefficients(a: SymMatrix, sigma: np.ndarray, u: np.ndarray) -> tuple[float, float]:
    """First and second Taylor coefficients of t -> F_A(geodesic_curve(sigma, u, t)) at 0.

    ``F(t) = F(0) + c1 t + c2 t^2 + O(t^3)`` with
    ``c1 = 2 sum_i <u_i, g_i>`` and
    ``c2 = sum_ij A_ij <u_i, u_j> - sum_i |u_i|^2 <sigma_i, g_i>``, where
    ``g = A sigma``.  Valid at any point; at a stationary point the second
    coefficient equals ``-second_order_form``.
    """
    g = a.matmat(sigma)
    c1 = 2.0 * float(np.sum(u * g))
    c2 = float(np.sum(u * a.matmat(u)) - np.sum(np.einsum("ij,ij->i", u, u) * np.einsum("ij,ij->i", sigma, g)))
    return c1, c2


def write_point(sigma: np.ndarray, path: str | os.PathLike) -> None:
    n, k = sigma.shape
    lines = [f"# n={n} k={k}"]
    lines.extend(",".join(f"{v:.17g}" for v in row) for row in sigma)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_point(path: str | os.PathLike) -> np.ndarray:
    """Read a point written by :func:`write_point`; row norms are not checked here."""
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ValueError(f"{path}: missing '# n=<n> k=<k>' header")
    fields = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    try:
        n, k = int(fields["n"]), int(fields["k"])
    except (KeyError, ValueError):
        raise ValueError(f"{path}: bad header {lines[0]!r}") from None
    rows = [ln for ln in lines[1:] if ln.strip()]
    if len(rows) != n:
        raise ValueError(f"{path}: header says n={n} but found {len(rows)} rows")
    sigma = np.array([[float(v) for v in ln.split(",")] for ln in rows], dtype=float).reshape(n, -1)
    if sigma.shape[1] != k:
        raise ValueError(f"{path}: header says k={k} but rows have {sigma.shape[1]} entries")
    return sigma
