"""F_q-subspaces of M_n(F_{q^s}) and semifield spread sets.

A `MatrixCode` stores a basis as an integer array of shape (k, n, n) holding
codes of F_{q^s}; q must be prime, so that the digits of a code are exactly its
coordinates over F_q.  Span elements are indexed little-endian: element
sum(c_i q^i) is sum(c_i A_i).
"""

from __future__ import annotations

import json
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .gf import FieldError, FieldSpec, default_embedding, field_from_json, field_make
from .linalg import Mat, batch_rank, echelon_basis

Vector = Tuple[int, ...]


class SpreadSetError(ValueError):
    pass


def span_array(field: FieldSpec, q: int, gens: np.ndarray) -> np.ndarray:
    """All F_q-combinations of gens (k, ...) as an array (q^k, ...)."""
    gens = np.asarray(gens, dtype=np.int64)
    out = np.zeros((1,) + gens.shape[1:], dtype=np.int64)
    scalars = list(range(q))
    for g in gens:
        parts = [out]
        for c in scalars[1:]:
            parts.append(field.vadd(out, field.vmul(g, c)[None]))
        out = np.concatenate(parts, axis=0)
    return out


def det2(field: FieldSpec, a: np.ndarray) -> np.ndarray:
    """Determinants of a stack (..., 2, 2)."""
    return field.vsub(
        field.vmul(a[..., 0, 0], a[..., 1, 1]), field.vmul(a[..., 0, 1], a[..., 1, 0])
    )


def all_invertible(field: FieldSpec, mats: np.ndarray) -> bool:
    mats = np.asarray(mats)
    if mats.shape[0] == 0:
        return True
    n = mats.shape[-1]
    if n == 2:
        return bool(np.all(det2(field, mats) != 0))
    return bool(np.all(batch_rank(field, mats) == n))


class MatrixCode:
    """An F_q-subspace of M_n(F_{q^s}) given by an F_q-independent basis."""

    def __init__(self, q: int, n: int, s: int, basis, field: Optional[FieldSpec] = None):
        self.field = field or field_make(q, s)
        if self.field.p != q or self.field.d != s:
            raise FieldError("field does not match (q, s)")
        self.q, self.n, self.s = q, n, s
        b = np.asarray(basis, dtype=np.int64).reshape(-1, n, n)
        b.setflags(write=False)
        self.basis = b
        if len(self.echelon) != self.k:
            raise SpreadSetError("basis is not independent over F_q")
        if self.k > n * n * s:
            raise SpreadSetError("too many basis elements")

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def params(self) -> Tuple[int, int, int]:
        return (self.q, self.n, self.s)

    def vectorize(self, mats: np.ndarray) -> np.ndarray:
        """F_q-coordinates: column-major entries, then the digits of each entry."""
        mats = np.asarray(mats, dtype=np.int64)
        digits = self.field._digit_table[mats]  # (..., n, n, s)
        digits = np.swapaxes(digits, -3, -2)
        return digits.reshape(mats.shape[:-2] + (self.n * self.n * self.s,))

    def unvectorize(self, vecs: np.ndarray) -> np.ndarray:
        vecs = np.asarray(vecs, dtype=np.int64)
        n, s = self.n, self.s
        d = vecs.reshape(vecs.shape[:-1] + (n, n, s))
        codes = d @ self.field._weights
        return np.swapaxes(codes, -1, -2)

    @cached_property
    def echelon(self) -> np.ndarray:
        pf = field_make(self.q, 1)
        if self.k == 0:
            return np.zeros((0, self.n * self.n * self.s), dtype=np.int64)
        return echelon_basis(pf, self.vectorize(self.basis))

    @cached_property
    def elements(self) -> np.ndarray:
        out = span_array(self.field, self.q, self.basis)
        out.setflags(write=False)
        return out

    def mats(self) -> List[Mat]:
        return [Mat._wrap(self.field, b) for b in self.basis]

    def __eq__(self, other):
        return (
            isinstance(other, MatrixCode)
            and self.params == other.params
            and self.field == other.field
            and self.k == other.k
            and bool(np.array_equal(self.echelon, other.echelon))
        )

    def __hash__(self):
        return hash((self.params, self.echelon.tobytes()))

    def __repr__(self):
        return f"MatrixCode(q={self.q}, n={self.n}, s={self.s}, k={self.k})"

    def contains(self, A) -> bool:
        v = self.vectorize(np.asarray(A, dtype=np.int64)[None])
        pf = field_make(self.q, 1)
        return len(echelon_basis(pf, np.concatenate([self.echelon, v]))) == self.k

    def extend(self, A) -> "MatrixCode":
        A = np.asarray(A, dtype=np.int64).reshape(1, self.n, self.n)
        return MatrixCode(self.q, self.n, self.s, np.concatenate([self.basis, A]), self.field)

    def transform(self, X: Mat, Y: Mat, rho=None) -> "MatrixCode":
        """The code {X A^rho Y : A in C}, on the same basis order."""
        from .linalg import batch_matmul

        b = self.basis if rho is None else rho.apply(self.basis)
        out = batch_matmul(self.field, batch_matmul(self.field, X.a[None], b), Y.a[None])
        return MatrixCode(self.q, self.n, self.s, out, self.field)

    def to_json(self) -> dict:
        return {
            "field": self.field.to_json(),
            "subfield_order": self.q,
            "n": self.n,
            "s": self.s,
            "basis": self.basis.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MatrixCode":
        try:
            f = field_from_json(obj["field"])
            q, n, s = int(obj["subfield_order"]), int(obj["n"]), int(obj["s"])
            basis = np.array(obj["basis"], dtype=np.int64).reshape(-1, n, n)
        except (KeyError, TypeError, ValueError) as exc:
            raise SpreadSetError(f"malformed spread-set file: {exc}") from exc
        return cls(q, n, s, basis, f)


def save_code(C: MatrixCode, path) -> None:
    with open(path, "w") as fh:
        json.dump(C.to_json(), fh)


def load_code(path) -> MatrixCode:
    with open(path) as fh:
        return MatrixCode.from_json(json.load(fh))


def zero_code(q: int, n: int, s: int) -> MatrixCode:
    return MatrixCode(q, n, s, np.zeros((0, n, n), dtype=np.int64))


# -- semifield checks ------------------------------------------------------

def is_semifield_code(C: MatrixCode) -> bool:
    """True iff every nonzero element of the span is invertible."""
    return all_invertible(C.field, C.elements[1:])


def is_semifield_extension(C_old: MatrixCode, A) -> bool:
    """Same as is_semifield_code(C_old.extend(A)) for a known-good C_old;
    only elements involving A are examined."""
    f = C_old.field
    A = np.asarray(A, dtype=np.int64)
    old = C_old.elements
    for c in range(1, C_old.q):
        cand = f.vadd(old, f.vmul(A, c)[None])
        if not all_invertible(f, cand):
            return False
    return True


# -- first rows and canonical bases -----------------------------------------

def seed_first_rows(q: int, n: int, s: int, field: Optional[FieldSpec] = None) -> List[Vector]:
    """First rows t^i e_j in seed order k = i + (j-1)s + 1."""
    f = field or field_make(q, s)
    rows = []
    for j in range(n):
        for i in range(s):
            v = [0] * n
            v[j] = f.exp(i) if f.d > 1 else f.pow(f.generator, i)
            rows.append(tuple(v))
    return rows


def first_row_index(C: MatrixCode) -> Dict[Vector, int]:
    """Map first row -> index of the unique span element with that first row."""
    rows = C.elements[:, 0, :]
    table: Dict[Vector, int] = {}
    for idx, r in enumerate(map(tuple, rows.tolist())):
        if r in table:
            raise SpreadSetError("two span elements share a first row")
        table[r] = idx
    return table


def canonical_basis(C: MatrixCode) -> MatrixCode:
    """First-row basis for full spread sets; reduced echelon basis otherwise."""
    if C.k == C.n * C.s:
        table = first_row_index(C)
        try:
            idx = [table[r] for r in seed_first_rows(C.q, C.n, C.s, C.field)]
        except KeyError as exc:
            raise SpreadSetError("first-row map is not bijective") from exc
        return MatrixCode(C.q, C.n, C.s, C.elements[idx], C.field)
    return MatrixCode(C.q, C.n, C.s, C.unvectorize(C.echelon), C.field)


class SeedSets:
    """The ns sets of invertible matrices with prescribed first rows."""

    def __init__(self, q: int, n: int, s: int, field: Optional[FieldSpec] = None):
        self.field = f = field or field_make(q, s)
        self.q, self.n, self.s = q, n, s
        self.first_rows = seed_first_rows(q, n, s, f)
        rest = span_array(
            f, f.size, np.eye(n * (n - 1), dtype=np.int64).reshape(-1, n - 1, n)
        ) if n > 1 else np.zeros((1, 0, n), dtype=np.int64)
        # span over the full field of unit matrices enumerates all lower blocks
        self.sets: List[np.ndarray] = []
        for r in self.first_rows:
            mats = np.concatenate(
                [np.broadcast_to(np.array(r, dtype=np.int64), (rest.shape[0], 1, n)), rest], axis=1
            )
            keep = batch_rank(f, mats) == n if n != 2 else det2(f, mats) != 0
            m = mats[keep]
            m.setflags(write=False)
            self.sets.append(m)

    def __len__(self):
        return len(self.sets)

    def __getitem__(self, k: int) -> np.ndarray:
        """S_k for k = 1..ns."""
        if not 1 <= k <= len(self.sets):
            raise IndexError(k)
        return self.sets[k - 1]


def seed_sets(q: int, n: int, s: int) -> SeedSets:
    return SeedSets(q, n, s)


# -- construction from a multiplication -------------------------------------

Mult = Callable[[Vector, Vector], Vector]


def spread_from_mult(q: int, n: int, s: int, mult: Mult, field: Optional[FieldSpec] = None,
                     check_linearity: bool = True) -> MatrixCode:
    """Spread set {R_y} of a presemifield on (F_{q^s})^n, left-linear over F_{q^s}.

    R_y acts on row vectors: x R_y = x * y, so row i of R_y is e_i * y.
    """
    f = field or field_make(q, s)
    units = [tuple(1 if i == j else 0 for i in range(n)) for j in range(n)]
    ys = seed_first_rows(q, n, s, f)

    def R(y):
        return np.array([mult(e, y) for e in units], dtype=np.int64)

    basis = np.stack([R(y) for y in ys])
    if check_linearity:
        lam = f.generator
        for y in ys:
            for e in units:
                lhs = mult(tuple(f.mul(lam, c) for c in e), y)
                rhs = tuple(f.mul(lam, c) for c in mult(e, y))
                if tuple(lhs) != rhs:
                    raise SpreadSetError("multiplication is not left-linear over F_{q^s}")
            for a, b in zip(units, units[1:]):
                lhs = mult(tuple(f.add(x, z) for x, z in zip(a, b)), y)
                rhs = tuple(f.add(x, z) for x, z in zip(mult(a, y), mult(b, y)))
                if tuple(lhs) != rhs:
                    raise SpreadSetError("multiplication is not additive in the left argument")
    try:
        C = MatrixCode(q, n, s, basis, f)
    except SpreadSetError as exc:
        raise SpreadSetError("zero divisors: some nonzero R_y vanishes") from exc
    if not is_semifield_code(C):
        raise SpreadSetError("zero divisors: some nonzero R_y is singular")
    return C


def field_mult(q: int, n: int, s: int) -> Mult:
    """Multiplication of F_{q^(ns)} in coordinates over F_{q^s} w.r.t. 1, w, ..., w^(n-1)."""
    small = field_make(q, s)
    big = field_make(q, n * s)
    emb = default_embedding(small, big)
    w = big.generator if big.d > 1 else 1
    wp = [big.pow(w, i) for i in range(n)]
    coords: Dict[int, Vector] = {}
    for idx in range(small.size ** n):
        v = []
        for _ in range(n):
            v.append(idx % small.size)
            idx //= small.size
        x = 0
        for c, b in zip(v, wp):
            x = big.add(x, big.mul(emb(c), b))
        coords[x] = tuple(v)
    if len(coords) != small.size ** n:
        raise SpreadSetError("powers of w are not a basis")  # pragma: no cover
    to_big = {v: x for x, v in coords.items()}

    def mult(x: Vector, y: Vector) -> Vector:
        return coords[big.mul(to_big[tuple(x)], to_big[tuple(y)])]

    return mult


def desarguesian(q: int, n: int, s: int) -> MatrixCode:
    return spread_from_mult(q, n, s, field_mult(q, n, s))


def random_spread_set(q: int, n: int, s: int, rng: np.random.Generator,
                      seeds: Optional[SeedSets] = None, max_tries: int = 10_000) -> MatrixCode:
    """A spread set built by random depth-first choices from the seed sets."""
    seeds = seeds or SeedSets(q, n, s)
    for _ in range(max_tries):
        C = zero_code(q, n, s)
        ok = True
        for k in range(1, n * s + 1):
            S = seeds[k]
            order = rng.permutation(len(S))
            for i in order[:64]:
                if is_semifield_extension(C, S[i]):
                    C = C.extend(S[i])
                    break
            else:
                ok = False
                break
        if ok:
            return C
    raise SpreadSetError("random search failed")  # pragma: no cover


# -- packed char-2 representation ----------------------------------------------

class Packer:
    """n x n matrices over GF(2^s) packed into one int, entry (i, j) at bits w*(i*n+j).

    Addition is XOR.  The n = 2 products and inverses use closed forms.
    """

    def __init__(self, field: FieldSpec, n: int):
        if field.p != 2:
            raise FieldError("packed matrices need characteristic 2")
        self.field = field
        self.n = n
        self.w = field.d
        self.mask = (1 << self.w) - 1
        self.shifts = [self.w * t for t in range(n * n)]
        self._exp = field._exp
        self._log = field._log
        self.order = field.order

    def pack(self, a) -> int:
        flat = np.asarray(a, dtype=np.int64).reshape(-1).tolist()
        x = 0
        for c, sh in zip(flat, self.shifts):
            x |= c << sh
        return x

    def pack_many(self, arr: np.ndarray) -> np.ndarray:
        arr = np.asarray(arr, dtype=np.int64).reshape(-1, self.n * self.n)
        return (arr << np.array(self.shifts, dtype=np.int64)[None, :]).sum(axis=1)

    def unpack(self, x: int) -> Tuple[int, ...]:
        m = self.mask
        return tuple((x >> sh) & m for sh in self.shifts)

    def unpack_many(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.int64)
        out = (xs[..., None] >> np.array(self.shifts, dtype=np.int64)) & self.mask
        return out.reshape(xs.shape + (self.n, self.n))

    def to_array(self, x: int) -> np.ndarray:
        return np.array(self.unpack(x), dtype=np.int64).reshape(self.n, self.n)

    def _mul(self, a: int, b: int) -> int:
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def mul(self, x: int, y: int) -> int:
        if self.n == 2:
            w, m = self.w, self.mask
            a, b, c, d = x & m, (x >> w) & m, (x >> 2 * w) & m, x >> 3 * w
            e, f, g, h = y & m, (y >> w) & m, (y >> 2 * w) & m, y >> 3 * w
            ex, lg = self._exp, self._log
            la, lb, lc, ld = lg[a], lg[b], lg[c], lg[d]
            le, lf, lgg, lh = lg[e], lg[f], lg[g], lg[h]
            # log of zero is a sentinel; guard products with a zero factor
            r0 = (ex[la + le] if a and e else 0) ^ (ex[lb + lgg] if b and g else 0)
            r1 = (ex[la + lf] if a and f else 0) ^ (ex[lb + lh] if b and h else 0)
            r2 = (ex[lc + le] if c and e else 0) ^ (ex[ld + lgg] if d and g else 0)
            r3 = (ex[lc + lf] if c and f else 0) ^ (ex[ld + lh] if d and h else 0)
            return r0 | (r1 << w) | (r2 << 2 * w) | (r3 << 3 * w)
        n = self.n
        a = self.unpack(x)
        b = self.unpack(y)
        fm = self._mul
        out = 0
        for i in range(n):
            for j in range(n):
                acc = 0
                for t in range(n):
                    acc ^= fm(a[i * n + t], b[t * n + j])
                out |= acc << self.shifts[i * n + j]
        return out

    def det(self, x: int) -> int:
        if self.n == 2:
            a, b, c, d = self.unpack(x)
            return self._mul(a, d) ^ self._mul(b, c)
        # product of pivots of an LU-style elimination
        m = self.to_array(x)
        f = self.field
        det = 1
        n = self.n
        for c in range(n):
            nz = [r for r in range(c, n) if m[r, c]]
            if not nz:
                return 0
            r = nz[0]
            if r != c:
                m[[r, c]] = m[[c, r]]
            det = f.mul(det, int(m[c, c]))
            inv = f.inv(int(m[c, c]))
            for rr in range(c + 1, n):
                if m[rr, c]:
                    fac = f.mul(int(m[rr, c]), inv)
                    m[rr] = f.vsub(m[rr], f.vmul(m[c], fac))
        return det

    def trace(self, x: int) -> int:
        a = self.unpack(x)
        t = 0
        for i in range(self.n):
            t ^= a[i * self.n + i]
        return t

    def inv(self, x: int) -> int:
        if self.n == 2:
            a, b, c, d = self.unpack(x)
            det = self._mul(a, d) ^ self._mul(b, c)
            if det == 0:
                raise ZeroDivisionError("singular matrix")
            di = self._exp[(self.order - self._log[det]) % self.order]
            fm = self._mul
            return fm(d, di) | (fm(b, di) << self.w) | (fm(c, di) << (2 * self.w)) | (
                fm(a, di) << (3 * self.w)
            )
        from .linalg import inverse

        return self.pack(inverse(Mat._wrap(self.field, self.to_array(x))).a)

    def scalar(self, lam: int) -> int:
        return self.pack(np.eye(self.n, dtype=np.int64) * lam)

    def scale(self, lam: int, x: int) -> int:
        a = self.unpack(x)
        out = 0
        for c, sh in zip(a, self.shifts):
            out |= self._mul(lam, c) << sh
        return out

    def apply_table(self, table, x: int) -> int:
        out = 0
        for c, sh in zip(self.unpack(x), self.shifts):
            out |= int(table[c]) << sh
        return out

    def first_row(self, x: int) -> int:
        return x & ((1 << (self.w * self.n)) - 1)


def span_packed(gens: Sequence[int]) -> List[int]:
    """All F_2-combinations, element index = bitmask of the generators used."""
    out = [0]
    for g in gens:
        out = out + [x ^ g for x in out]
    return out
