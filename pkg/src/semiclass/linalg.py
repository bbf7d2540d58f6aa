"""Dense matrices over a FieldSpec.

`Mat` is an immutable value wrapping an integer array of element codes.
Bulk work (ranks of many small matrices) goes through `batch_rank`, which
runs one Gaussian elimination over a stack of matrices at once.
"""

from __future__ import annotations

from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .gf import Automorphism, FieldError, FieldSpec


class SingularMatrixError(ValueError):
    pass


class Mat:
    __slots__ = ("field", "a", "_hash")

    def __init__(self, field: FieldSpec, entries):
        a = np.array(entries, dtype=np.int64)
        if a.ndim == 1:
            a = a.reshape(1, -1)
        if a.ndim != 2:
            raise ValueError("entries must be two dimensional")
        if a.size and (a.min() < 0 or a.max() >= field.size):
            raise FieldError("entry outside the field")
        a.setflags(write=False)
        self.field = field
        self.a = a
        self._hash = None

    @classmethod
    def _wrap(cls, field: FieldSpec, a: np.ndarray) -> "Mat":
        m = cls.__new__(cls)
        a = np.ascontiguousarray(a, dtype=np.int64)
        a.setflags(write=False)
        m.field = field
        m.a = a
        m._hash = None
        return m

    @classmethod
    def zeros(cls, field: FieldSpec, rows: int, cols: Optional[int] = None) -> "Mat":
        return cls._wrap(field, np.zeros((rows, rows if cols is None else cols), dtype=np.int64))

    @classmethod
    def identity(cls, field: FieldSpec, n: int) -> "Mat":
        return cls._wrap(field, np.eye(n, dtype=np.int64))

    @classmethod
    def diag(cls, field: FieldSpec, entries: Sequence[int]) -> "Mat":
        return cls._wrap(field, np.diag(np.asarray(entries, dtype=np.int64)))

    @property
    def rows(self) -> int:
        return self.a.shape[0]

    @property
    def cols(self) -> int:
        return self.a.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.a.shape

    def __getitem__(self, ij):
        return int(self.a[ij])

    def tolist(self) -> List[List[int]]:
        return self.a.tolist()

    def __eq__(self, other):
        return (
            isinstance(other, Mat)
            and self.field == other.field
            and self.a.shape == other.a.shape
            and bool(np.array_equal(self.a, other.a))
        )

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.a.shape, self.a.tobytes()))
        return self._hash

    def __repr__(self):
        return f"Mat({self.tolist()})"

    def _same(self, other: "Mat"):
        if self.field != other.field:
            raise FieldError("field mismatch")

    def __add__(self, other: "Mat") -> "Mat":
        self._same(other)
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return Mat._wrap(self.field, self.field.vadd(self.a, other.a))

    def __sub__(self, other: "Mat") -> "Mat":
        self._same(other)
        if self.shape != other.shape:
            raise ValueError("shape mismatch")
        return Mat._wrap(self.field, self.field.vsub(self.a, other.a))

    def __neg__(self) -> "Mat":
        return Mat._wrap(self.field, self.field.vneg(self.a))

    def __matmul__(self, other: "Mat") -> "Mat":
        self._same(other)
        if self.cols != other.rows:
            raise ValueError("shape mismatch")
        f = self.field
        prod = f.vmul(self.a[:, :, None], other.a[None, :, :])
        return Mat._wrap(f, f.vsum(prod, axis=1))

    def scale(self, c: int) -> "Mat":
        return Mat._wrap(self.field, self.field.vmul(self.a, c))

    @property
    def T(self) -> "Mat":
        return Mat._wrap(self.field, self.a.T)

    def is_zero(self) -> bool:
        return not self.a.any()

    def rank(self) -> int:
        return rank(self)

    def inverse(self) -> "Mat":
        return inverse(self)


MatLike = Union[Mat, np.ndarray]


def rank(A: Mat) -> int:
    """Rank by Gaussian elimination, first nonzero pivot in column order."""
    return int(batch_rank(A.field, A.a[None])[0])


def rref(field: FieldSpec, a: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    """Reduced row echelon form of a 2-d code array; returns (rref, pivot columns)."""
    m = np.array(a, dtype=np.int64)
    rows, cols = m.shape
    pivots: List[int] = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.nonzero(m[r:, c])[0]
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        m[r] = field.vmul(m[r], field.inv(int(m[r, c])))
        col = m[:, c].copy()
        col[r] = 0
        others = np.nonzero(col)[0]
        if others.size:
            m[others] = field.vsub(m[others], field.vmul(col[others, None], m[r][None, :]))
        pivots.append(c)
        r += 1
    return m, pivots


def echelon_basis(field: FieldSpec, a: np.ndarray) -> np.ndarray:
    """Nonzero rows of the reduced row echelon form."""
    m, piv = rref(field, a)
    return m[: len(piv)]


def inverse(A: Mat) -> Mat:
    if A.rows != A.cols:
        raise ValueError("inverse of a non-square matrix")
    f = A.field
    n = A.rows
    aug = np.concatenate([A.a, np.eye(n, dtype=np.int64)], axis=1)
    m, piv = rref(f, aug)
    if piv[:n] != list(range(n)):
        raise SingularMatrixError("matrix is singular")
    return Mat._wrap(f, m[:, n:])


def solve_left(field: FieldSpec, basis: np.ndarray, target: np.ndarray) -> Optional[np.ndarray]:
    """Coefficients c with c @ basis = target, or None if target is not in the row space."""
    k = basis.shape[0]
    aug = np.concatenate([basis.T, np.asarray(target, dtype=np.int64).reshape(-1, 1)], axis=1)
    m, piv = rref(field, aug)
    if piv and piv[-1] == k:
        return None
    c = np.zeros(k, dtype=np.int64)
    for r, p in enumerate(piv):
        c[p] = m[r, k]
    return c


def kron(A: Mat, B: Mat) -> Mat:
    A._same(B)
    f = A.field
    prod = f.vmul(A.a[:, None, :, None], B.a[None, :, None, :])
    return Mat._wrap(f, prod.reshape(A.rows * B.rows, A.cols * B.cols))


def vec(A: Mat) -> Mat:
    """Column-major stacking as a column vector: entry (i, j) lands at j*rows + i."""
    return Mat._wrap(A.field, A.a.T.reshape(-1, 1))


def unvec(v: Mat, rows: int) -> Mat:
    return Mat._wrap(v.field, v.a.reshape(-1, rows).T)


def map_entries(A: Mat, rho: Automorphism) -> Mat:
    if rho.field != A.field:
        raise FieldError("automorphism of a different field")
    return Mat._wrap(A.field, rho.apply(A.a))


def block_diag(blocks: Sequence[Mat]) -> Mat:
    f = blocks[0].field
    r = sum(b.rows for b in blocks)
    c = sum(b.cols for b in blocks)
    out = np.zeros((r, c), dtype=np.int64)
    i = j = 0
    for b in blocks:
        out[i : i + b.rows, j : j + b.cols] = b.a
        i += b.rows
        j += b.cols
    return Mat._wrap(f, out)


def batch_rank(field: FieldSpec, arr: np.ndarray) -> np.ndarray:
    """Ranks of a stack of matrices, shape (N, r, c)."""
    a = np.array(arr, dtype=np.int64)
    if a.ndim != 3:
        raise ValueError("expected a stack of matrices")
    N, r, c = a.shape
    rk = np.zeros(N, dtype=np.int64)
    if N == 0 or r == 0 or c == 0:
        return rk
    rows = np.arange(r)
    for col in range(c):
        live = np.nonzero(rk < r)[0]
        if live.size == 0:
            break
        sub = a[live]
        rks = rk[live]
        cand = (sub[:, :, col] != 0) & (rows[None, :] >= rks[:, None])
        has = cand.any(axis=1)
        if not has.any():
            continue
        idx = live[has]
        sub = sub[has]
        cand = cand[has]
        rks = rks[has]
        piv = cand.argmax(axis=1)
        bi = np.arange(idx.size)
        prow = sub[bi, piv].copy()
        # swap pivot row into position rk
        sub[bi, piv] = sub[bi, rks]
        sub[bi, rks] = prow
        pinv = field.inv_table[prow[:, col]]
        prow = field.vmul(prow, pinv[:, None])
        below = rows[None, :] > rks[:, None]
        factors = np.where(below, sub[:, :, col], 0)
        sub = field.vsub(sub, field.vmul(factors[:, :, None], prow[:, None, :]))
        a[idx] = sub
        rk[idx] += 1
    return rk


def batch_matmul(field: FieldSpec, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Batched product of stacks (..., r, c) @ (..., c, t)."""
    prod = field.vmul(x[..., :, :, None], y[..., None, :, :])
    return field.vsum(prod, axis=-2)
