"""From M_n(F_{q^s}) to M_{ns}(F_q) and back to a direct sum over F_{q^s}.

`phi` is the regular representation with respect to the power basis, using the
column convention: column l of phi(a) holds the coordinates of a * t^l.  With
that convention the Moore matrix Z of the power basis itself satisfies
Z phi(a) Z^-1 = diag(a, a^q, ..., a^(q^(s-1))), and conjugating the block map
phibar(A) by P (I_n (x) Z) gives psi(A) = A + A^sigma + ... (direct sum).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Sequence

import numpy as np

from .gf import FieldError, FieldSpec, field_make
from .linalg import Mat, block_diag, inverse, kron, map_entries, rank


class EmbedError(ValueError):
    pass


@dataclass(frozen=True)
class RegularRep:
    big_field: FieldSpec
    base_order: int

    def __post_init__(self):
        if self.base_order != self.big_field.p:
            raise FieldError("regular representation is implemented over the prime field only")

    @property
    def s(self) -> int:
        return self.big_field.d

    @cached_property
    def base_field(self) -> FieldSpec:
        return field_make(self.big_field.p, 1)

    @cached_property
    def table(self) -> np.ndarray:
        """table[a] is phi(a) as an (s, s) array of prime-field codes."""
        f = self.big_field
        s = self.s
        out = np.zeros((f.size, s, s), dtype=np.int64)
        powers = [f.exp(l) for l in range(s)]
        for a in range(f.size):
            for l, t in enumerate(powers):
                out[a, :, l] = f.digits(f.mul(a, t))
        return out


def phi(rep: RegularRep, a: int) -> Mat:
    return Mat._wrap(rep.base_field, rep.table[rep.big_field.check(a)])


def phibar_array(rep: RegularRep, A: np.ndarray) -> np.ndarray:
    """Block map on a stack of (..., n, n) code arrays -> (..., ns, ns) prime-field codes."""
    A = np.asarray(A, dtype=np.int64)
    n = A.shape[-1]
    s = rep.s
    blocks = rep.table[A]  # (..., n, n, s, s)
    blocks = np.swapaxes(blocks, -3, -2)  # (..., n, s, n, s)
    return blocks.reshape(A.shape[:-2] + (n * s, n * s))


def phibar(rep: RegularRep, A: Mat, n: Optional[int] = None) -> Mat:
    if A.field != rep.big_field:
        raise FieldError("matrix is not over the representation's field")
    if A.rows != A.cols or (n is not None and A.rows != n):
        raise EmbedError("dimension mismatch")
    return Mat._wrap(rep.base_field, phibar_array(rep, A.a))


def lift(A: Mat, target: FieldSpec) -> Mat:
    """Reinterpret a prime-field matrix over an extension field."""
    if A.field.d != 1 or A.field.p != target.p:
        raise FieldError("can only lift prime-field matrices")
    return Mat._wrap(target, A.a)


def psi(A: Mat, base_order: int) -> Mat:
    f = A.field
    if A.rows != A.cols:
        raise EmbedError("psi needs a square matrix")
    s = f.d // f.subfield_degree(base_order)
    q_aut = [a for a in f.automorphisms() if a.power == f.subfield_degree(base_order) % f.d][0]
    blocks = []
    cur = A
    for _ in range(s):
        blocks.append(cur)
        cur = map_entries(cur, q_aut)
    return block_diag(blocks)


def moore_matrix(f: FieldSpec, base_order: int, basis: Sequence[int]) -> Mat:
    s = len(basis)
    rows = [[f.frobenius(base_order, v, i) for v in basis] for i in range(s)]
    Z = Mat(f, rows)
    if rank(Z) < s:
        raise EmbedError("basis elements are dependent over the base field")
    return Z


def power_basis(f: FieldSpec) -> List[int]:
    return [f.exp(i) for i in range(f.d)]


def dual_basis(f: FieldSpec) -> List[int]:
    """Trace-dual basis of the power basis over the prime field."""
    p = f.p
    pb = power_basis(f)

    def tr(x):
        acc = 0
        for j in range(f.d):
            acc = f.add(acc, f.frobenius(p, x, j))
        return acc

    out = []
    for i in range(f.d):
        hits = [
            w
            for w in range(f.size)
            if all(tr(f.mul(b, w)) == (1 if j == i else 0) for j, b in enumerate(pb))
        ]
        out.append(hits[0])
    return out


def dickson_moore(rep: RegularRep) -> Mat:
    """Moore matrix Z with Z phi(a) Z^-1 = diag(a, a^q, ...): tries the power basis, then its dual."""
    f = rep.big_field
    t = f.generator if f.d > 1 else f.exp(1)
    target = Mat.diag(f, [f.frobenius(rep.base_order, t, i) for i in range(rep.s)])
    for basis in (power_basis(f), dual_basis(f)):
        try:
            Z = moore_matrix(f, rep.base_order, basis)
        except EmbedError:
            continue
        if Z @ lift(phi(rep, t), f) @ inverse(Z) == target:
            return Z
    raise EmbedError("no candidate basis diagonalises the regular representation")


def block_perm(n: int, s: int, field: Optional[FieldSpec] = None) -> Mat:
    """Permutation matrix P with P e_(a*s+u) = e_(u*n+a)."""
    field = field or field_make(2, 1)
    N = n * s
    P = np.zeros((N, N), dtype=np.int64)
    for a in range(n):
        for u in range(s):
            P[u * n + a, a * s + u] = 1
    return Mat._wrap(field, P)


def conjugator(rep: RegularRep, n: int) -> Mat:
    """P (I_n (x) Z) over the big field."""
    f = rep.big_field
    Z = dickson_moore(rep)
    return block_perm(n, rep.s, f) @ kron(Mat.identity(f, n), Z)
