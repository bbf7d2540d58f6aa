"""Isotopy invariants of matrix codes.

* m-ranks: the rank multiset of the F_{q^m}-span of phibar(C).  The direct
  route enumerates that span as ns x ns matrices over F_{q^m}.  The fast route
  works with n x n matrices over F_{q^lcm(m,s)}: the element
  sum(a_i phibar(A_i)) has rank sum_{j<s} rank(sum(a_i^(q^(m-j)) A_i)).
* D(C): the F_{q^s}-row space of the n^2 x k matrix whose columns are vec(A_i),
  classified up to equivalence in a `VectorClassRegistry`.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from .embed import RegularRep, phibar_array
from .gf import FieldSpec, default_embedding, field_from_json, field_make
from .linalg import batch_rank, echelon_basis
from .spreadset import MatrixCode, SpreadSetError, canonical_basis, span_array

CHUNK = 1 << 16


class RankMultiset:
    """Multiset of ranks as sorted (rank, count) pairs."""

    __slots__ = ("counts",)

    def __init__(self, counts):
        items = counts.items() if hasattr(counts, "items") else counts
        self.counts: Tuple[Tuple[int, int], ...] = tuple(
            sorted((int(r), int(c)) for r, c in items if c)
        )

    def __eq__(self, other):
        return isinstance(other, RankMultiset) and self.counts == other.counts

    def __hash__(self):
        return hash(self.counts)

    def __repr__(self):
        return "{" + ", ".join(f"{r}^{c}" for r, c in self.counts) + "}"

    def as_dict(self) -> Dict[int, int]:
        return dict(self.counts)

    def total(self) -> int:
        return sum(c for _, c in self.counts)

    def ranks(self) -> List[int]:
        return [r for r, _ in self.counts]

    def serialize(self) -> str:
        return ",".join(f"{r}:{c}" for r, c in self.counts)

    @classmethod
    def parse(cls, text: str) -> "RankMultiset":
        if not text:
            return cls({})
        return cls(tuple(tuple(int(t) for t in part.split(":")) for part in text.split(",")))


def _combos(field: FieldSpec, coeffs: Sequence[int], base: np.ndarray, gens: np.ndarray,
            chunk: int = CHUNK) -> Iterator[np.ndarray]:
    """Yield base + sum(c_i gens_i) for all c in coeffs^len(gens), in chunks.

    Order is little-endian in the coefficient index, so concatenating the
    chunks gives index sum(idx(c_i) * Q^i).
    """
    Q = len(coeffs)
    k = len(gens)
    if Q ** k <= chunk or k == 0:
        out = base[None]
        for g in gens:
            parts = [field.vadd(out, field.vmul(g, c)[None]) for c in coeffs]
            out = np.concatenate(parts, axis=0)
        yield out
        return
    # split on the most significant generator
    last = gens[-1]
    for c in coeffs:
        yield from _combos(field, coeffs, field.vadd(base, field.vmul(last, c)), gens[:-1], chunk)


def _rank_counts(field: FieldSpec, mats: np.ndarray) -> Counter:
    n = mats.shape[-1]
    if n == 2 and mats.shape[-2] == 2:
        a = mats
        zero = ~a.reshape(a.shape[0], -1).any(axis=1)
        det = field.vsub(field.vmul(a[:, 0, 0], a[:, 1, 1]), field.vmul(a[:, 0, 1], a[:, 1, 0]))
        r = np.where(zero, 0, np.where(det == 0, 1, 2))
    else:
        r = batch_rank(field, mats)
    return Counter(dict(zip(*np.unique(r, return_counts=True))))


def _ranks_2x2(field: FieldSpec, mats: np.ndarray) -> np.ndarray:
    a = mats
    zero = ~a.reshape(a.shape[0], -1).any(axis=1)
    det = field.vsub(field.vmul(a[:, 0, 0], a[:, 1, 1]), field.vmul(a[:, 0, 1], a[:, 1, 0]))
    return np.where(zero, 0, np.where(det == 0, 1, 2)).astype(np.int8)


def _ranks(field: FieldSpec, mats: np.ndarray) -> np.ndarray:
    if mats.shape[-2:] == (2, 2):
        return _ranks_2x2(field, mats)
    return batch_rank(field, mats).astype(np.int8)


@lru_cache(maxsize=None)
def _regular_rep_for(field: FieldSpec, q: int) -> RegularRep:
    return RegularRep(field, q)


def _regular_rep(C: MatrixCode) -> RegularRep:
    return _regular_rep_for(C.field, C.q)


def m_ranks_direct(C: MatrixCode, m: int) -> RankMultiset:
    """Enumerate E_m(C) = <phibar(C)>_{F_{q^m}} and count ranks.

    Only one representative per F_{q^m}-line is ranked; scalar multiples share it.
    """
    Fm = field_make(C.q, m)
    ns = C.n * C.s
    if C.k == 0:
        return RankMultiset({0: 1})
    imgs = phibar_array(_regular_rep(C), C.basis)  # prime-field codes, valid in Fm
    basis = echelon_basis(Fm, imgs.reshape(C.k, -1)).reshape(-1, ns, ns)
    d = basis.shape[0]
    Q = Fm.size
    coeffs = list(range(Q))
    counts: Counter = Counter({0: 1})
    for t in range(d):
        for block in _combos(Fm, coeffs, basis[t], basis[t + 1 :]):
            for r, c in _rank_counts(Fm, block).items():
                counts[int(r)] += int(c) * (Q - 1)
    return RankMultiset(counts)


def _frobenius_index(Fm: FieldSpec, q: int, e: int, k: int, idx: np.ndarray) -> np.ndarray:
    """Index of the tuple (a_i^(q^e)) given the index of (a_i)."""
    Q = Fm.size
    table = np.array([Fm.frobenius(q, x, e) for x in range(Q)], dtype=np.int64)
    out = np.zeros_like(idx)
    rest = idx.copy()
    w = 1
    for _ in range(k):
        out += table[rest % Q] * w
        rest //= Q
        w *= Q
    return out


def m_ranks_fast(C: MatrixCode, m: int) -> RankMultiset:
    """m-ranks through n x n ranks over F_{q^lcm(m,s)}."""
    q, s, k = C.q, C.s, C.k
    if k == 0:
        return RankMultiset({0: 1})
    L = s * m // math.gcd(s, m)
    FL = field_make(q, L)
    Fm = field_make(q, m)
    emb_s = default_embedding(C.field, FL)
    emb_m = default_embedding(Fm, FL)
    A = emb_s.apply(C.basis)
    Q = Fm.size
    coeffs = [int(c) for c in emb_m.table]  # coefficient code c in Fm -> its image
    r0 = np.concatenate(
        [_ranks(FL, blk) for blk in _combos(FL, coeffs, np.zeros_like(A[0]), A)]
    )
    # dimension of the F_{q^m}-span of the phibar images
    imgs = phibar_array(_regular_rep(C), C.basis).reshape(k, -1)
    d = echelon_basis(Fm, imgs).shape[0]
    total = np.zeros(Q ** k, dtype=np.int16)
    for lo in range(0, Q ** k, 1 << 20):
        idx = np.arange(lo, min(Q ** k, lo + (1 << 20)), dtype=np.int64)
        acc = np.zeros(idx.size, dtype=np.int16)
        for j in range(s):
            e = (m - j) % m
            acc += r0[idx if e == 0 else _frobenius_index(Fm, q, e, k, idx)]
        total[lo : lo + idx.size] = acc
    vals, cnts = np.unique(total, return_counts=True)
    div = Q ** (k - d)
    return RankMultiset({int(v): int(c) // div for v, c in zip(vals, cnts)})


def m_ranks(C: MatrixCode, m: int, method: str = "fast") -> RankMultiset:
    if method == "fast":
        return m_ranks_fast(C, m)
    if method == "direct":
        return m_ranks_direct(C, m)
    raise ValueError(f"unknown method {method!r}")


def embedded_independent(C: MatrixCode, m: int) -> bool:
    """Whether the phibar images stay independent over F_{q^m}."""
    Fm = field_make(C.q, m)
    imgs = phibar_array(_regular_rep(C), C.basis).reshape(C.k, -1)
    return echelon_basis(Fm, imgs).shape[0] == C.k


# -- vector rank-metric codes ---------------------------------------------------

def rank_weight(v: Sequence[int], field: FieldSpec, base_order: int) -> int:
    """F_q-dimension of the span of the coordinates of v."""
    if base_order != field.p:
        raise ValueError("rank weight is implemented over the prime field")
    v = np.asarray(v, dtype=np.int64)
    if not v.any():
        return 0
    digits = field._digit_table[v]
    return int(batch_rank(field_make(field.p, 1), digits[None])[0])


def _coordinate_ranks(field: FieldSpec, words: np.ndarray) -> np.ndarray:
    """Prime-field rank of the coordinates of each row of words."""
    if field.p != 2:
        return batch_rank(field_make(field.p, 1), field._digit_table[words])
    # insert each coordinate into a per-row XOR basis indexed by leading bit
    bits = field.d
    basis = np.zeros((words.shape[0], bits), dtype=np.int64)
    for col in range(words.shape[1]):
        v = words[:, col].copy()
        for b in range(bits - 1, -1, -1):
            has = ((v >> b) & 1).astype(bool)
            empty = basis[:, b] == 0
            take = has & empty
            basis[take, b] = v[take]
            v = np.where(take, 0, np.where(has, v ^ basis[:, b], v))
    return (basis != 0).sum(axis=1)


class VectorCode:
    """An F_{q^s}-linear code in (F_{q^s})^k, kept as its reduced echelon generator."""

    def __init__(self, field: FieldSpec, q: int, generator, length: Optional[int] = None):
        g = np.asarray(generator, dtype=np.int64)
        if g.ndim != 2:
            g = g.reshape(-1, length if length is not None else g.shape[-1])
        self.field = field
        self.q = q
        gen = echelon_basis(field, g) if g.shape[0] else g
        gen.setflags(write=False)
        self.generator = gen
        self.length = g.shape[1]

    @property
    def dim(self) -> int:
        return self.generator.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, VectorCode)
            and self.field == other.field
            and self.length == other.length
            and self.generator.shape == other.generator.shape
            and bool(np.array_equal(self.generator, other.generator))
        )

    def __hash__(self):
        return hash((self.length, self.generator.tobytes()))

    def __repr__(self):
        return f"VectorCode(length={self.length}, dim={self.dim})"

    def transform(self, Q: np.ndarray, rho=None) -> "VectorCode":
        """The code {v^rho Q : v in D}; Q has prime-field entries."""
        g = self.generator if rho is None else rho.apply(self.generator)
        f = self.field
        prod = f.vsum(f.vmul(g[:, :, None], np.asarray(Q, dtype=np.int64)[None]), axis=1)
        return VectorCode(f, self.q, prod, self.length)

    @cached_property
    def codewords(self) -> np.ndarray:
        return span_array(self.field, self.field.size, self.generator)

    @cached_property
    def rank_weight_distribution(self) -> Tuple[Tuple[int, int], ...]:
        """Number of codewords of each rank weight."""
        f = self.field
        r, k = self.generator.shape
        if r == 0:
            return ((0, 1),)
        counts: Counter = Counter({0: 1})
        coeffs = list(range(f.size))
        # one codeword per F_{q^s}-line: leading message coordinate equal to one
        for t in range(r):
            for words in _combos(f, coeffs, self.generator[t], self.generator[t + 1 :]):
                for w, c in zip(*np.unique(_coordinate_ranks(f, words), return_counts=True)):
                    counts[int(w)] += int(c) * (f.size - 1)
        return tuple(sorted(counts.items()))

    @cached_property
    def qsystem(self) -> "QSystem":
        return QSystem.from_generator(self.field, self.q, self.generator)

    def to_json(self) -> dict:
        return {
            "field": self.field.to_json(),
            "subfield_order": self.q,
            "length": self.length,
            "generator": self.generator.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "VectorCode":
        f = field_from_json(obj["field"])
        length = int(obj["length"])
        g = np.array(obj["generator"], dtype=np.int64).reshape(-1, length)
        return cls(f, int(obj["subfield_order"]), g, length)


class QSystem:
    """The F_q-span U of the generator columns, as packed vectors of F^r.

    Coordinates are packed little-endian in base |F|; for characteristic 2
    that makes vector addition a XOR of packed codes.
    """

    def __init__(self, field: FieldSpec, q: int, columns: np.ndarray):
        self.field = field
        self.q = q
        self.r = columns.shape[1] if columns.ndim == 2 else 0
        self.columns = columns  # (k, r) codes
        self.base = field.size
        pf = field_make(q, 1)
        digits = field._digit_table[columns].reshape(columns.shape[0], -1)
        self.fq_dim = echelon_basis(pf, digits).shape[0] if columns.size else 0
        vecs = span_array(field, q, columns) if columns.size else np.zeros((1, self.r), np.int64)
        self.vectors = np.unique(self.pack(vecs))
        self.members = set(self.vectors.tolist())

    @classmethod
    def from_generator(cls, field: FieldSpec, q: int, generator: np.ndarray) -> "QSystem":
        return cls(field, q, np.ascontiguousarray(generator.T))

    def pack(self, vecs: np.ndarray) -> np.ndarray:
        w = self.base ** np.arange(self.r, dtype=np.int64)
        return (np.asarray(vecs, dtype=np.int64) * w).sum(axis=-1)

    @cached_property
    def array(self) -> np.ndarray:
        """Unpacked vectors, one row per entry of `vectors`."""
        v = self.vectors[:, None] // (self.base ** np.arange(self.r, dtype=np.int64))[None, :]
        return v % self.base

    def unpack(self, x: int) -> Tuple[int, ...]:
        out = []
        for _ in range(self.r):
            out.append(x % self.base)
            x //= self.base
        return tuple(out)

    @cached_property
    def point_weights(self) -> Dict[int, int]:
        """Packed normalized point -> F_q-dimension of U meet that F_{q^s}-line."""
        counts: Counter = Counter()
        for x in self.vectors.tolist():
            if x == 0:
                continue
            counts[self.normalize(x)] += 1
        return {pt: int(round(math.log(c * (self.q - 1) + 1, self.q))) for pt, c in counts.items()}

    def normalize(self, x: int) -> int:
        """Scale a nonzero packed vector so its first nonzero coordinate is 1."""
        f = self.field
        v = self.unpack(x)
        lead = next(c for c in v if c)
        inv = f.inv(lead)
        return self.pack_tuple(f.mul(c, inv) for c in v)

    def pack_tuple(self, v) -> int:
        x = 0
        w = 1
        for c in v:
            x += c * w
            w *= self.base
        return x

    @cached_property
    def weight_of(self) -> Dict[int, int]:
        """Packed nonzero vector -> weight of its point."""
        pw = self.point_weights
        return {x: pw[self.normalize(x)] for x in self.vectors.tolist() if x}

    @cached_property
    def weight_distribution(self) -> Tuple[Tuple[int, int], ...]:
        return tuple(sorted(Counter(self.point_weights.values()).items()))


def _echelon_fq_basis(C: MatrixCode) -> np.ndarray:
    """Reduced echelon F_q-basis of C, reading each matrix as a vector of prime-field digits."""
    f = C.field
    digits = f._digit_table[C.basis].reshape(C.k, -1)
    ech = echelon_basis(field_make(f.p, 1), digits)
    codes = ech.reshape(C.k, -1, f.d) @ (f.p ** np.arange(f.d, dtype=np.int64))
    return codes.reshape(C.basis.shape)


def vector_code(C: MatrixCode) -> VectorCode:
    """D(C): row space of the n^2 x k matrix with columns vec(A_i).

    A_i is the first-row canonical basis when C has one (always, for spread
    sets), otherwise the reduced echelon basis over F_q.
    """
    if not C.k:
        B = C.basis
    else:
        try:
            B = canonical_basis(C).basis
        except SpreadSetError:
            B = _echelon_fq_basis(C)
    cols = np.swapaxes(B, -1, -2).reshape(C.k, -1)  # vec(A_i), column-major
    G = cols.T
    return VectorCode(C.field, C.q, G, C.k)


# -- registry and composite key ---------------------------------------------------

class VectorClassRegistry:
    """Representatives of vector-code classes with integer labels."""

    def __init__(self, reps: Optional[List[VectorCode]] = None):
        self.reps: List[VectorCode] = []
        self._by_fp: Dict[tuple, List[int]] = {}
        self._exact: Dict[VectorCode, int] = {}
        self.tests_run = 0
        for D in reps or []:
            self._add(D)

    def __len__(self):
        return len(self.reps)

    @staticmethod
    def fingerprint(D: VectorCode) -> tuple:
        return (D.length, D.dim, D.qsystem.fq_dim, D.qsystem.weight_distribution)

    def _add(self, D: VectorCode) -> int:
        label = len(self.reps)
        self.reps.append(D)
        self._by_fp.setdefault(self.fingerprint(D), []).append(label)
        self._exact[D] = label
        return label

    def lookup(self, D: VectorCode) -> Optional[int]:
        """Label of a registered representative equivalent to D, without registering."""
        from .equivalence import vector_code_equivalent

        if D in self._exact:
            return self._exact[D]
        for label in reversed(self._by_fp.get(self.fingerprint(D), [])):
            self.tests_run += 1
            if vector_code_equivalent(D, self.reps[label]) is not None:
                self._exact[D] = label
                return label
        return None

    def label(self, D: VectorCode) -> int:
        found = self.lookup(D)
        if found is not None:
            return found
        return self._add(D)

    def to_json(self) -> list:
        return [D.to_json() for D in self.reps]

    @classmethod
    def from_json(cls, obj: list) -> "VectorClassRegistry":
        return cls([VectorCode.from_json(o) for o in obj])


def vclass_label(D: VectorCode, registry: VectorClassRegistry) -> int:
    return registry.label(D)


@dataclass(frozen=True)
class InvariantKey:
    ranks: RankMultiset
    vclass: int

    def serialize(self) -> str:
        return f"{self.ranks.serialize()}|{self.vclass}"


def invariant_key(C: MatrixCode, registry: VectorClassRegistry, m: int = 2) -> InvariantKey:
    return InvariantKey(m_ranks_fast(C, m), vclass_label(vector_code(C), registry))
