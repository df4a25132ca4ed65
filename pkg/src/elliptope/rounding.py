"""Rounding a factorization to a +-1 assignment."""

from __future__ import annotations

import numpy as np

from . import rng
from .symmat import SymMatrix


def signs(v: np.ndarray) -> np.ndarray:
    """Elementwise sign with sign(0) = +1."""
    return np.where(v >= 0, 1.0, -1.0)


def quadratic_value(a: SymMatrix, x: np.ndarray) -> float:
    """x^T A x, i.e. F_A at the rank-one point x x^T."""
    return float(x @ a.matvec(x))


def cut_value(a: SymMatrix, x: np.ndarray) -> float:
    """Weight of edges cut by ``x`` when edge weights are ``-A_ij`` (the max-cut encoding)."""
    r, c, v = a.triplets()
    off = r != c
    return float(np.sum(-v[off] * (1.0 - x[r[off]] * x[c[off]]) / 2.0))


def overlap(x: np.ndarray, truth: np.ndarray) -> float:
    return float(abs(x @ truth) / len(x))


def round_sign_first_col(sigma: np.ndarray) -> np.ndarray:
    return signs(sigma[:, 0])


def round_hyperplane(a: SymMatrix, sigma: np.ndarray, trials: int = 100, seed: int = 0) -> tuple[np.ndarray, float]:
    """Random-hyperplane rounding, keeping the assignment with the largest x^T A x.

    Trial ``t`` uses the direction drawn from stream ``(seed, HYPERPLANE, t)``;
    ties keep the earliest trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    best_x, best_val = None, -np.inf
    for t in range(trials):
        r = rng.stream(seed, rng.HYPERPLANE, t).standard_normal(sigma.shape[1])
        x = signs(sigma @ r)
        val = quadratic_value(a, x)
        if val > best_val:
            best_x, best_val = x, val
    return best_x, best_val
