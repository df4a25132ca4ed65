"""Symmetric problem matrices: storage, Matrix Market I/O, extremal eigenvalues."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from . import rng

DENSE_EIG_THRESHOLD = 2048

MM_COORDINATE_HEADER = "%%MatrixMarket matrix coordinate real symmetric"
MM_ARRAY_HEADER = "%%MatrixMarket matrix array real symmetric"


class MatrixMarketError(ValueError):
    """Malformed Matrix Market input; ``lineno`` is 1-based (0 when unknown)."""

    def __init__(self, message: str, lineno: int = 0):
        self.lineno = lineno
        super().__init__(f"line {lineno}: {message}" if lineno else message)


class SymMatrix:
    """Immutable real symmetric matrix, dense or sparse.

    Dense storage keeps the full ``n x n`` array (read-only); sparse storage
    keeps the sorted lower-triangle triplets plus a full CSR copy with sorted
    column indices, so every row sum runs in ascending column order.
    """

    __slots__ = ("n", "_dense", "_csr", "_tri")

    def __init__(self, n: int, dense: np.ndarray | None = None, csr: sp.csr_matrix | None = None,
                 tri: tuple[np.ndarray, np.ndarray, np.ndarray] | None = None):
        if n < 1:
            raise ValueError(f"matrix dimension must be positive, got {n}")
        self.n = int(n)
        self._dense = dense
        self._csr = csr
        self._tri = tri

    @classmethod
    def from_dense(cls, a) -> "SymMatrix":
        a = np.array(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {a.shape}")
        if not np.array_equal(a, a.T):
            raise ValueError("matrix is not exactly symmetric")
        a.setflags(write=False)
        return cls(a.shape[0], dense=a)

    @classmethod
    def from_lower(cls, a) -> "SymMatrix":
        """Build from the lower triangle of ``a``; the upper triangle is ignored."""
        a = np.asarray(a, dtype=float)
        low = np.tril(a)
        return cls.from_dense(low + np.tril(a, -1).T)

    @classmethod
    def from_triplets(cls, n: int, rows, cols, vals) -> "SymMatrix":
        """Sparse matrix from 0-based ``(i, j, value)`` entries in either triangle.

        An entry and its mirror image count as the same position; giving a
        position twice raises ``ValueError``.
        """
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        vals = np.asarray(vals, dtype=float).ravel()
        if not (len(rows) == len(cols) == len(vals)):
            raise ValueError("triplet arrays differ in length")
        if len(rows) and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            raise ValueError(f"triplet index out of range for n={n}")
        hi = np.maximum(rows, cols)
        lo = np.minimum(rows, cols)
        order = np.lexsort((lo, hi))
        hi, lo, vals = hi[order], lo[order], vals[order]
        if len(hi) > 1:
            dup = (hi[1:] == hi[:-1]) & (lo[1:] == lo[:-1])
            if dup.any():
                p = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry at ({hi[p]}, {lo[p]})")
        for arr in (hi, lo, vals):
            arr.setflags(write=False)
        off = hi != lo
        full_r = np.concatenate([hi, lo[off]])
        full_c = np.concatenate([lo, hi[off]])
        full_v = np.concatenate([vals, vals[off]])
        csr = sp.csr_matrix((full_v, (full_r, full_c)), shape=(n, n))
        csr.sort_indices()
        return cls(n, csr=csr, tri=(hi, lo, vals))

    @property
    def is_sparse(self) -> bool:
        return self._dense is None

    @property
    def csr(self) -> sp.csr_matrix:
        if self._csr is None:
            csr = sp.csr_matrix(self._dense)
            csr.sort_indices()
            self._csr = csr
        return self._csr

    def dense(self) -> np.ndarray:
        """Full dense array (read-only view for dense storage)."""
        if self._dense is not None:
            return self._dense
        return self._csr.toarray()

    def triplets(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Lower-triangle ``(row, col, value)`` arrays with ``row >= col``, sorted."""
        if self._tri is not None:
            return self._tri
        r, c = np.tril_indices(self.n)
        order = np.lexsort((c, r))
        r, c = r[order], c[order]
        v = self._dense[r, c]
        nz = v != 0
        return r[nz], c[nz], v[nz]

    def diag(self) -> np.ndarray:
        if self._dense is not None:
            return np.diag(self._dense).copy()
        return self._csr.diagonal()

    def submatrix(self, idx) -> np.ndarray:
        idx = np.asarray(idx, dtype=np.int64)
        if self._dense is not None:
            return self._dense[np.ix_(idx, idx)]
        return self._csr[idx][:, idx].toarray()

    def frobenius_norm(self) -> float:
        if self._dense is not None:
            return float(np.linalg.norm(self._dense))
        return float(sp.linalg.norm(self._csr))

    def matvec(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ValueError(f"vector length {x.shape} does not match n={self.n}")
        return self._apply(x)

    def matmat(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[0] != self.n:
            raise ValueError(f"array shape {x.shape} does not match n={self.n}")
        return self._apply(x)

    def _apply(self, x: np.ndarray) -> np.ndarray:
        if self._dense is not None:
            return self._dense @ x
        return self._csr @ x

    def shifted(self, diag_shift) -> "SymMatrix":
        """``diag(diag_shift) - A`` with the same storage kind."""
        d = np.broadcast_to(np.asarray(diag_shift, dtype=float), (self.n,))
        if self._dense is not None:
            out = -self._dense.copy()
            out[np.diag_indices(self.n)] += d
            return SymMatrix.from_dense(out)
        r, c, v = self.triplets()
        on = r == c
        dv = d.copy()
        dv[r[on]] -= v[on]
        keep = ~on
        rows = np.concatenate([r[keep], np.arange(self.n)])
        cols = np.concatenate([c[keep], np.arange(self.n)])
        vals = np.concatenate([-v[keep], dv])
        return SymMatrix.from_triplets(self.n, rows, cols, vals)

    def __repr__(self) -> str:
        kind = f"sparse nnz={self._csr.nnz}" if self.is_sparse else "dense"
        return f"SymMatrix(n={self.n}, {kind})"


@dataclass(frozen=True)
class OpNormEstimate:
    value: float
    rel_tol_achieved: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class EigEstimate:
    value: float
    converged: bool
    iterations: int = 0


def op_norm(a: SymMatrix, rel_tol: float = 1e-9, max_iter: int = 20000, seed: int = 0) -> OpNormEstimate:
    """Largest absolute eigenvalue of ``a`` by power iteration on ``a @ a``.

    Returns the square root of the Rayleigh quotient of ``a @ a``, i.e.
    ``|a v|`` at the unit iterate ``v``.  Convergence is declared when the
    estimate moves by at most ``rel_tol`` (relative) on two consecutive steps.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    v = rng.stream(seed, rng.POWER_ITER).standard_normal(a.n)
    v /= np.linalg.norm(v)
    est = 0.0
    change = np.inf
    calm = 0
    for it in range(1, max_iter + 1):
        w = a.matvec(v)
        new = float(np.linalg.norm(w))
        if new == 0.0:
            # v in the null space; restart cannot help if a == 0
            if a.frobenius_norm() == 0.0:
                return OpNormEstimate(0.0, 0.0, it, True)
            v = rng.stream(seed, rng.POWER_ITER, it).standard_normal(a.n)
            v /= np.linalg.norm(v)
            continue
        change = abs(new - est) / new
        est = new
        calm = calm + 1 if change <= rel_tol else 0
        if calm >= 2:
            return OpNormEstimate(est, change, it, True)
        v = a.matvec(w)
        nv = np.linalg.norm(v)
        if nv == 0.0:
            return OpNormEstimate(est, change, it, True)
        v /= nv
    return OpNormEstimate(est, change, max_iter, False)


def min_eig(m: SymMatrix, abs_tol: float = 1e-10, dense_threshold: int = DENSE_EIG_THRESHOLD) -> EigEstimate:
    """Smallest eigenvalue of ``m``.

    Dense symmetric eigensolver up to ``dense_threshold``; Lanczos (ARPACK)
    above it, converged to ``abs_tol * max(1, |m|_2)``.
    """
    if m.n <= dense_threshold:
        return EigEstimate(float(np.linalg.eigvalsh(m.dense())[0]), True, 1)
    scale = max(1.0, op_norm(m, rel_tol=1e-6).value)
    op = LinearOperator((m.n, m.n), matvec=m.matvec, dtype=float)
    v0 = rng.stream(0, rng.POWER_ITER, 1).standard_normal(m.n)
    try:
        w = eigsh(op, k=1, which="SA", tol=abs_tol, v0=v0,
                  return_eigenvectors=False, maxiter=20 * m.n)
        return EigEstimate(float(w[0]), True, 0)
    except ArpackNoConvergence as exc:
        vals = exc.eigenvalues
        best = float(vals.min()) if len(vals) else -scale
        return EigEstimate(best, False, 0)


def _format(v: float) -> str:
    return f"{v:.17g}"


def write_matrix_market(a: SymMatrix, path: str | os.PathLike, fmt: str | None = None) -> None:
    """Write ``a``; dense storage goes to ``array`` form, sparse to ``coordinate``."""
    fmt = fmt or ("coordinate" if a.is_sparse else "array")
    n = a.n
    lines: list[str] = []
    if fmt == "array":
        lines.append(MM_ARRAY_HEADER)
        lines.append(f"{n} {n}")
        d = a.dense()
        for j in range(n):
            lines.extend(_format(v) for v in d[j:, j])
    elif fmt == "coordinate":
        r, c, v = a.triplets()
        order = np.lexsort((r, c))  # column-major, as customary
        lines.append(MM_COORDINATE_HEADER)
        lines.append(f"{n} {n} {len(v)}")
        lines.extend(f"{r[p] + 1} {c[p] + 1} {_format(v[p])}" for p in order)
    else:
        raise ValueError(f"unknown Matrix Market format {fmt!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_matrix_market(path: str | os.PathLike) -> SymMatrix:
    text = Path(path).read_text(encoding="utf-8")
    return parse_matrix_market(text)


def parse_matrix_market(text: str) -> SymMatrix:
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty file", 1)
    header = " ".join(lines[0].split()).lower()
    if header == MM_COORDINATE_HEADER.lower():
        coordinate = True
    elif header == MM_ARRAY_HEADER.lower():
        coordinate = False
    else:
        raise MatrixMarketError(f"unsupported header {lines[0]!r}", 1)

    body = [(no, ln.split()) for no, ln in enumerate(lines[1:], start=2)
            if ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError("missing size line", len(lines))
    size_no, size = body[0]
    try:
        dims = [int(t) for t in size]
    except ValueError:
        raise MatrixMarketError(f"bad size line {' '.join(size)!r}", size_no) from None
    if len(dims) != (3 if coordinate else 2) or dims[0] != dims[1] or dims[0] < 1:
        raise MatrixMarketError(f"bad size line {' '.join(size)!r}", size_no)
    n = dims[0]
    entries = body[1:]

    if not coordinate:
        want = n * (n + 1) // 2
        if len(entries) != want:
            no = entries[want][0] if len(entries) > want else len(lines)
            raise MatrixMarketError(f"expected {want} values, found {len(entries)}", no)
        vals = np.empty(want)
        for p, (no, tok) in enumerate(entries):
            if len(tok) != 1:
                raise MatrixMarketError("expected one value per line", no)
            vals[p] = _parse_float(tok[0], no)
        a = np.zeros((n, n))
        p = 0
        for j in range(n):
            a[j:, j] = vals[p:p + n - j]
            p += n - j
        a = a + np.tril(a, -1).T
        return SymMatrix.from_dense(a)

    nnz = dims[2]
    if len(entries) != nnz:
        no = entries[nnz][0] if len(entries) > nnz else len(lines)
        raise MatrixMarketError(f"expected {nnz} entries, found {len(entries)}", no)
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz)
    seen: dict[tuple[int, int], int] = {}
    for p, (no, tok) in enumerate(entries):
        if len(tok) != 3:
            raise MatrixMarketError("expected 'row col value'", no)
        try:
            i, j = int(tok[0]), int(tok[1])
        except ValueError:
            raise MatrixMarketError(f"bad index in {' '.join(tok)!r}", no) from None
        if not (1 <= i <= n and 1 <= j <= n):
            raise MatrixMarketError(f"index ({i}, {j}) out of range for n={n}", no)
        key = (max(i, j), min(i, j))
        if key in seen:
            raise MatrixMarketError(f"duplicate entry ({i}, {j}), first given on line {seen[key]}", no)
        seen[key] = no
        rows[p], cols[p], vals[p] = i - 1, j - 1, _parse_float(tok[2], no)
    return SymMatrix.from_triplets(n, rows, cols, vals)


def _parse_float(tok: str, lineno: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MatrixMarketError(f"bad value {tok!r}", lineno) from None
