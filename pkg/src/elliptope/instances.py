"""Problem instance generators and fixed test matrices.

Stream layout (see :mod:`elliptope.rng`):

* ``gen_goe(n, seed)`` draws from ``(seed, GOE, 0)``: first the ``n(n-1)/2``
  strictly-upper entries in row-major order, then the ``n`` diagonal entries.
* ``gen_z2sync(n, lam, seed)`` takes its noise from ``gen_goe(n, seed)`` (so
  ``lam = 0`` reproduces the GOE sample exactly) and the planted signs from
  ``(seed, Z2SYNC, 0)``.
* ``gen_sbm(n, a, b, seed)`` draws the planted signs from ``(seed, SBM, 0)``
  and one uniform per strictly-upper pair, row-major, from ``(seed, SBM, 1)``.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import rng
from .symmat import SymMatrix, read_matrix_market

FAMILIES = ("goe", "z2sync", "sbm", "maxcut", "file", "fixture")


@dataclass(frozen=True)
class PlantedInstance:
    a: SymMatrix
    truth: np.ndarray | None = None


@dataclass(frozen=True)
class InstanceSpec:
    family: str
    n: int = 0
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.family in ("goe", "z2sync", "sbm") and self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        if self.family == "z2sync" and float(self.params.get("lambda", 0.0)) < 0:
            raise ValueError("z2sync requires lambda >= 0")
        if self.family == "sbm":
            a, b = float(self.params.get("a", -1)), float(self.params.get("b", -1))
            # a == b is the no-signal null model
            if not (a >= b >= 0):
                raise ValueError(f"sbm requires a >= b >= 0, got a={a}, b={b}")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "InstanceSpec":
        d = dict(d)
        try:
            family = d.pop("family")
        except KeyError:
            raise ValueError("instance spec has no 'family'") from None
        n = int(d.pop("n", 0))
        seed = int(d.pop("seed", 0))
        return cls(family=family, n=n, seed=seed, params=d)

    @classmethod
    def from_json(cls, text: str) -> "InstanceSpec":
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict[str, Any]:
        return {"family": self.family, "n": self.n, "seed": self.seed, **self.params}


def gen_goe(n: int, seed: int) -> SymMatrix:
    """W_ii ~ N(0, 2/n), W_ij ~ N(0, 1/n) for i < j."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    gen = rng.stream(seed, rng.GOE)
    upper = gen.standard_normal(n * (n - 1) // 2) / np.sqrt(n)
    diag = gen.standard_normal(n) * np.sqrt(2.0 / n)
    w = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    w[iu] = upper
    w = w + w.T
    w[np.diag_indices(n)] = diag
    return SymMatrix.from_dense(w)


def random_signs(n: int, gen: np.random.Generator) -> np.ndarray:
    return gen.integers(0, 2, size=n) * 2.0 - 1.0


def gen_z2sync(n: int, lam: float, seed: int) -> PlantedInstance:
    """A = (lam / n) x0 x0^T + W with W from :func:`gen_goe`."""
    if lam < 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    w = gen_goe(n, seed)
    x0 = random_signs(n, rng.stream(seed, rng.Z2SYNC))
    a = w.dense() + (lam / n) * np.outer(x0, x0)
    return PlantedInstance(SymMatrix.from_dense(a), x0)


def gen_sbm(n: int, a: float, b: float, seed: int, centering: str = "density") -> PlantedInstance:
    """Two-community sparse stochastic block model.

    Edge ``(i, j)`` appears with probability ``a/n`` inside a community and
    ``b/n`` across.  With ``centering="density"`` the average density
    ``(a+b)/(2n)`` is subtracted from every off-diagonal entry (dense result);
    ``centering="none"`` returns the plain adjacency as a sparse matrix.
    """
    if not (a >= b >= 0):
        raise ValueError(f"sbm requires a >= b >= 0, got a={a}, b={b}")
    if a / n > 1 or b / n > 1:
        raise ValueError("edge probabilities a/n and b/n must not exceed 1")
    if centering not in ("density", "none"):
        raise ValueError(f"unknown centering {centering!r}")
    x0 = random_signs(n, rng.stream(seed, rng.SBM, 0))
    iu, ju = np.triu_indices(n, 1)
    u = rng.stream(seed, rng.SBM, 1).random(len(iu))
    p = np.where(x0[iu] == x0[ju], a / n, b / n)
    hit = u < p
    ei, ej = iu[hit], ju[hit]
    if centering == "none":
        return PlantedInstance(SymMatrix.from_triplets(n, ei, ej, np.ones(len(ei))), x0)
    adj = np.zeros((n, n))
    adj[ei, ej] = 1.0
    adj[ej, ei] = 1.0
    adj -= (a + b) / (2.0 * n)
    adj[np.diag_indices(n)] = 0.0
    return PlantedInstance(SymMatrix.from_dense(adj), x0)


def gen_maxcut(edges, n: int | None = None) -> SymMatrix:
    """A = -adjacency of an unweighted graph given as 0-based ``(u, v)`` pairs."""
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if n is None:
        n = int(edges.max()) + 1 if len(edges) else 1
    if np.any(edges[:, 0] == edges[:, 1]):
        raise ValueError("self-loops are not allowed")
    try:
        return SymMatrix.from_triplets(n, edges[:, 0], edges[:, 1], -np.ones(len(edges)))
    except ValueError as exc:
        raise ValueError(f"bad edge list: {exc}") from None


def read_edge_list(path: str | os.PathLike) -> np.ndarray:
    pairs = []
    for no, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if len(tok) != 2:
            raise ValueError(f"{path}:{no}: expected 'u v', got {line!r}")
        pairs.append((int(tok[0]), int(tok[1])))
    return np.array(pairs, dtype=np.int64).reshape(-1, 2)


@dataclass(frozen=True)
class Fixture:
    name: str
    a: SymMatrix
    sdp_value: float


def fixtures() -> list[Fixture]:
    """Small matrices with known SDP values."""
    two = np.array([[1.0, -2.0], [-2.0, 1.0]])
    tri = -(np.ones((3, 3)) - np.eye(3))
    return [
        Fixture("zero", SymMatrix.from_dense(np.zeros((4, 4))), 0.0),
        Fixture("identity", SymMatrix.from_dense(np.eye(4)), 4.0),
        Fixture("ones", SymMatrix.from_dense(np.ones((4, 4))), 16.0),
        Fixture("two_by_two", SymMatrix.from_dense(two), two[0, 0] + two[1, 1] + 2 * abs(two[0, 1])),
        Fixture("triangle", SymMatrix.from_dense(tri), 3.0),
    ]


def fixture(name: str) -> Fixture:
    for f in fixtures():
        if f.name == name:
            return f
    raise ValueError(f"unknown fixture {name!r}; expected one of {', '.join(f.name for f in fixtures())}")


def build_instance(spec: InstanceSpec) -> PlantedInstance:
    p = spec.params
    if spec.family == "goe":
        return PlantedInstance(gen_goe(spec.n, spec.seed))
    if spec.family == "z2sync":
        return gen_z2sync(spec.n, float(p.get("lambda", 0.0)), spec.seed)
    if spec.family == "sbm":
        return gen_sbm(spec.n, float(p["a"]), float(p["b"]), spec.seed, p.get("sbm_centering", "density"))
    if spec.family == "maxcut":
        if "edges" not in p:
            raise ValueError("maxcut spec needs 'edges' (path to an edge list)")
        return PlantedInstance(gen_maxcut(read_edge_list(p["edges"]), spec.n or None))
    if spec.family == "file":
        if "path" not in p:
            raise ValueError("file spec needs 'path'")
        return PlantedInstance(read_matrix_market(p["path"]))
    return PlantedInstance(fixture(p.get("name", "")).a)
