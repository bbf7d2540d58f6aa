"""Exact arithmetic in GF(p^d).

Elements are integer codes: the coefficient vector of the element in the
power basis 1, t, ..., t^(d-1) of the designated primitive element t, read
little-endian in base p.  Code 0 is zero and code 1 is one.  Multiplication
goes through log/antilog tables, so fields are limited to a few million
elements.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

MAX_FIELD_SIZE = 1 << 24

# Moduli as little-endian coefficient lists c_0..c_d.
DEFAULT_MODULI: Dict[Tuple[int, int], Tuple[int, ...]] = {
    (2, 2): (1, 1, 1),
    (2, 3): (1, 1, 0, 1),
    (2, 4): (1, 1, 0, 0, 1),
    (2, 8): (1, 0, 1, 1, 1, 0, 0, 0, 1),
}


class FieldError(ValueError):
    pass


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    i = 2
    while i * i <= p:
        if p % i == 0:
            return False
        i += 1
    return True


def _prime_factors(n: int) -> List[int]:
    out = []
    f = 2
    while f * f <= n:
        if n % f == 0:
            out.append(f)
            while n % f == 0:
                n //= f
        f += 1
    if n > 1:
        out.append(n)
    return out


# -- polynomials over F_p as little-endian coefficient lists -------------

def _poly_trim(a: List[int]) -> List[int]:
    while a and a[-1] == 0:
        a.pop()
    return a


def _poly_mod(a: Sequence[int], b: Sequence[int], p: int) -> List[int]:
    a = _poly_trim([c % p for c in a])
    b = _poly_trim([c % p for c in b])
    inv_lead = pow(b[-1], p - 2, p)
    while len(a) >= len(b):
        coef = a[-1] * inv_lead % p
        shift = len(a) - len(b)
        for i, c in enumerate(b):
            a[shift + i] = (a[shift + i] - coef * c) % p
        _poly_trim(a)
    return a


def _monic_polys(p: int, deg: int):
    for code in range(p ** deg):
        coeffs = []
        for _ in range(deg):
            coeffs.append(code % p)
            code //= p
        yield coeffs + [1]


def find_factor(modulus: Sequence[int], p: int) -> Optional[List[int]]:
    """Return a monic factor of degree 1..deg/2, or None if irreducible."""
    deg = len(modulus) - 1
    for k in range(1, deg // 2 + 1):
        for g in _monic_polys(p, k):
            if not _poly_mod(modulus, g, p):
                return g
    return None


# -- the field ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FieldSpec:
    """GF(p^d) with a fixed monic irreducible modulus and primitive generator."""

    p: int
    d: int
    modulus: Tuple[int, ...]
    generator: int
    _exp: Tuple[int, ...] = field(repr=False)
    _log: Tuple[int, ...] = field(repr=False)

    @property
    def size(self) -> int:
        return self.p ** self.d

    @property
    def order(self) -> int:
        """Order of the multiplicative group."""
        return self.size - 1

    def __eq__(self, other):
        return (
            isinstance(other, FieldSpec)
            and self.p == other.p
            and self.d == other.d
            and self.modulus == other.modulus
        )

    def __hash__(self):
        return hash((self.p, self.d, self.modulus))

    def __repr__(self):
        return f"GF({self.p}^{self.d}, modulus={list(self.modulus)})"

    # digits <-> codes
    def digits(self, x: int) -> List[int]:
        out = []
        for _ in range(self.d):
            out.append(x % self.p)
            x //= self.p
        return out

    def from_digits(self, ds: Sequence[int]) -> int:
        x = 0
        for c in reversed(ds):
            x = x * self.p + c % self.p
        return x

    def check(self, x: int) -> int:
        if not 0 <= x < self.size:
            raise FieldError(f"{x} is not an element code of {self!r}")
        return x

    # scalar arithmetic
    def add(self, x: int, y: int) -> int:
        if self.p == 2:
            return x ^ y
        return self.from_digits([a + b for a, b in zip(self.digits(x), self.digits(y))])

    def neg(self, x: int) -> int:
        if self.p == 2:
            return x
        return self.from_digits([-a for a in self.digits(x)])

    def sub(self, x: int, y: int) -> int:
        return self.add(x, self.neg(y))

    def mul(self, x: int, y: int) -> int:
        if x == 0 or y == 0:
            return 0
        return self._exp[self._log[x] + self._log[y]]

    def inv(self, x: int) -> int:
        if x == 0:
            raise ZeroDivisionError("zero has no inverse")
        return self._exp[(self.order - self._log[x]) % self.order]

    def div(self, x: int, y: int) -> int:
        return self.mul(x, self.inv(y))

    def pow(self, x: int, e: int) -> int:
        if x == 0:
            if e < 0:
                raise ZeroDivisionError("zero has no inverse")
            return 1 if e == 0 else 0
        return self._exp[(self._log[x] * e) % self.order]

    def log(self, x: int) -> int:
        if x == 0:
            raise ValueError("log of zero")
        return self._log[x]

    def exp(self, e: int) -> int:
        """The element t^e for the designated generator t."""
        return self._exp[e % self.order]

    def mult_order(self, x: int) -> int:
        if x == 0:
            raise ValueError("zero has no multiplicative order")
        from math import gcd

        return self.order // gcd(self.order, self._log[x])

    def subfield_degree(self, base_order: int) -> int:
        """Return e with base_order = p^e, checking that GF(base_order) is a subfield."""
        e, b = 0, base_order
        while b > 1 and b % self.p == 0:
            b //= self.p
            e += 1
        if b != 1 or e == 0 or self.d % e:
            raise FieldError(f"{base_order} is not the order of a subfield of {self!r}")
        return e

    def frobenius(self, base_order: int, x: int, j: int = 1) -> int:
        """x^(q^j) for q = base_order; j may be negative."""
        e = self.subfield_degree(base_order)
        k = (e * j) % self.d
        if x == 0:
            return 0
        return self._exp[(self._log[x] * self.p ** k) % self.order]

    def subfield(self, base_order: int) -> List[int]:
        """Codes of the elements of the subfield of order base_order, in code order."""
        e = self.subfield_degree(base_order)
        step = self.order // (base_order - 1)
        elems = {0} | {self._exp[i * step] for i in range(base_order - 1)}
        assert len(elems) == base_order and e
        return sorted(elems)

    def elements(self) -> range:
        return range(self.size)

    def automorphisms(self) -> List["Automorphism"]:
        return [Automorphism(self, k) for k in range(self.d)]

    def to_json(self) -> dict:
        return {"p": self.p, "d": self.d, "modulus": list(self.modulus)}

    # vectorised arithmetic on integer arrays
    @cached_property
    def exp_table(self) -> np.ndarray:
        return np.array(self._exp, dtype=np.int64)

    @cached_property
    def log_table(self) -> np.ndarray:
        out = np.array(self._log, dtype=np.int64)
        out[0] = 0
        return out

    @cached_property
    def mul_table(self) -> Optional[np.ndarray]:
        if self.size > 1024:
            return None
        t = self.exp_table[(self.log_table[:, None] + self.log_table[None, :])]
        t[0, :] = 0
        t[:, 0] = 0
        return t

    @cached_property
    def inv_table(self) -> np.ndarray:
        out = self.exp_table[(self.order - self.log_table) % self.order].copy()
        out[0] = 0
        return out

    @cached_property
    def _digit_table(self) -> np.ndarray:
        return np.array([self.digits(x) for x in range(self.size)], dtype=np.int64).reshape(
            self.size, self.d
        )

    @cached_property
    def _weights(self) -> np.ndarray:
        return np.array([self.p ** i for i in range(self.d)], dtype=np.int64)

    @cached_property
    def neg_table(self) -> np.ndarray:
        if self.p == 2:
            return np.arange(self.size, dtype=np.int64)
        return ((-self._digit_table) % self.p) @ self._weights

    def vmul(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        t = self.mul_table
        if t is not None:
            return t[a, b]
        out = self.exp_table[self.log_table[a] + self.log_table[b]]
        return np.where((a == 0) | (b == 0), 0, out)

    def vadd(self, a, b) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        b = np.asarray(b, dtype=np.int64)
        if self.p == 2:
            return a ^ b
        dt = self._digit_table
        return ((dt[a] + dt[b]) % self.p) @ self._weights

    def vneg(self, a) -> np.ndarray:
        return self.neg_table[np.asarray(a, dtype=np.int64)]

    def vsub(self, a, b) -> np.ndarray:
        return self.vadd(a, self.vneg(b))

    def vinv(self, a) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if np.any(a == 0):
            raise ZeroDivisionError("zero has no inverse")
        return self.inv_table[a]

    def vsum(self, a, axis: int) -> np.ndarray:
        a = np.asarray(a, dtype=np.int64)
        if self.p == 2:
            return np.bitwise_xor.reduce(a, axis=axis)
        dt = self._digit_table[a]
        return (dt.sum(axis=axis) % self.p) @ self._weights

    def vpow_table(self, e: int) -> np.ndarray:
        """Lookup table for x -> x^e."""
        return np.array([self.pow(x, e) for x in range(self.size)], dtype=np.int64)


@dataclass(frozen=True)
class Automorphism:
    """The Frobenius power x -> x^(p^power) of a field."""

    field: FieldSpec
    power: int

    def __post_init__(self):
        object.__setattr__(self, "power", self.power % self.field.d)

    def __call__(self, x: int) -> int:
        return self.field.frobenius(self.field.p, x, self.power)

    @cached_property
    def table(self) -> np.ndarray:
        return self.field.vpow_table(self.field.p ** self.power)

    def apply(self, a) -> np.ndarray:
        return self.table[np.asarray(a, dtype=np.int64)]

    def compose(self, other: "Automorphism") -> "Automorphism":
        if other.field != self.field:
            raise FieldError("automorphisms of different fields")
        return Automorphism(self.field, self.power + other.power)

    def inverse(self) -> "Automorphism":
        return Automorphism(self.field, -self.power)

    @property
    def is_identity(self) -> bool:
        return self.power == 0


def _build_tables(p: int, d: int, modulus: Sequence[int], gen: int):
    """Powers of gen; returns (exp, log) or None if gen is not primitive."""
    size = p ** d
    order = size - 1
    exp = [0] * (2 * order)
    log = [0] * size
    x = 1
    if d == 1:
        for i in range(order):
            if i and x == 1:
                return None
            exp[i] = x
            log[x] = i
            x = x * gen % p
    else:
        # multiply by the class of x: shift digits up and reduce by the modulus
        top = p ** (d - 1)
        red = [(-c) % p for c in modulus[:d]]
        for i in range(order):
            if i and x == 1:
                return None
            exp[i] = x
            log[x] = i
            lead = x // top
            x = (x % top) * p
            if lead:
                ds = []
                y = x
                for k in range(d):
                    ds.append((y % p + lead * red[k]) % p)
                    y //= p
                x = 0
                for c in reversed(ds):
                    x = x * p + c
    if x != 1:
        return None
    for i in range(order, 2 * order):
        exp[i] = exp[i - order]
    return exp, log


def _is_primitive_modulus(p: int, d: int, modulus: Sequence[int]) -> bool:
    if find_factor(modulus, p) is not None:
        return False
    return _build_tables(p, d, modulus, p) is not None


def default_modulus(p: int, d: int) -> Tuple[int, ...]:
    if (p, d) in DEFAULT_MODULI:
        return DEFAULT_MODULI[(p, d)]
    if d == 1:
        g = next(g for g in range(1, p) if _is_primitive_root(g, p))
        return ((-g) % p, 1)
    # smallest primitive polynomial, ordered by the integer encoding of c_0..c_{d-1}
    for code in range(1, p ** d):
        coeffs = []
        c = code
        for _ in range(d):
            coeffs.append(c % p)
            c //= p
        poly = tuple(coeffs) + (1,)
        if coeffs[0] and _is_primitive_modulus(p, d, poly):
            return poly
    raise FieldError(f"no primitive polynomial of degree {d} over F_{p}")


def _is_primitive_root(g: int, p: int) -> bool:
    if p == 2:
        return g == 1
    return all(pow(g, (p - 1) // f, p) != 1 for f in _prime_factors(p - 1))


_CACHE: Dict[Tuple[int, int, Tuple[int, ...]], FieldSpec] = {}


def field_make(p: int, d: int, modulus: Optional[Sequence[int]] = None) -> FieldSpec:
    """Construct GF(p^d); the modulus defaults to a fixed table entry."""
    if not is_prime(p):
        raise FieldError(f"{p} is not prime")
    if d < 1:
        raise FieldError("degree must be positive")
    if p ** d > MAX_FIELD_SIZE:
        raise FieldError(f"unsupported field size {p}^{d}")
    if modulus is None:
        modulus = default_modulus(p, d)
    modulus = tuple(int(c) % p for c in modulus)
    if len(modulus) != d + 1 or modulus[-1] != 1:
        raise FieldError("modulus must be monic of degree d")
    key = (p, d, modulus)
    if key in _CACHE:
        return _CACHE[key]
    factor = find_factor(modulus, p)
    if factor is not None:
        raise FieldError(f"modulus {list(modulus)} is reducible (factor {factor})")
    gen = (-modulus[0]) % p if d == 1 else p
    tables = _build_tables(p, d, modulus, gen)
    if tables is None:
        raise FieldError(f"generator of GF({p}^{d}) for modulus {list(modulus)} is not primitive")
    f = FieldSpec(p, d, modulus, gen, tuple(tables[0]), tuple(tables[1]))
    _CACHE[key] = f
    return f


def field_from_json(obj: dict) -> FieldSpec:
    return field_make(int(obj["p"]), int(obj["d"]), obj.get("modulus"))


def automorphisms(f: FieldSpec) -> List[Automorphism]:
    return f.automorphisms()


# -- embeddings -------------------------------------------------------------

def _eval_poly(f: FieldSpec, coeffs: Sequence[int], x: int) -> int:
    acc = 0
    for c in reversed(coeffs):
        acc = f.add(f.mul(acc, x), c % f.p)
    return acc


@dataclass(frozen=True)
class FieldEmbedding:
    """Ring embedding of source into target sending the source generator to generator_image."""

    source: FieldSpec
    target: FieldSpec
    generator_image: int

    def __post_init__(self):
        s, t = self.source, self.target
        if s.p != t.p or t.d % s.d:
            raise FieldError(f"{s!r} is not a subfield of {t!r}")
        t.check(self.generator_image)
        if s.d > 1 or s.p > 2:
            if _eval_poly(t, s.modulus, self.generator_image) != 0 or (
                t.mult_order(self.generator_image) != s.order if self.generator_image else True
            ):
                raise FieldError("generator image has the wrong minimal polynomial/order")

    @cached_property
    def table(self) -> np.ndarray:
        s, t = self.source, self.target
        powers = [1]
        for _ in range(1, s.d):
            powers.append(t.mul(powers[-1], self.generator_image))
        out = []
        for x in range(s.size):
            acc = 0
            for c, pw in zip(s.digits(x), powers):
                if c:
                    acc = t.add(acc, t.mul(c, pw))
            out.append(acc)
        return np.array(out, dtype=np.int64)

    def __call__(self, x: int) -> int:
        return int(self.table[self.source.check(x)])

    def apply(self, a) -> np.ndarray:
        return self.table[np.asarray(a, dtype=np.int64)]

    @cached_property
    def preimage(self) -> Dict[int, int]:
        return {int(y): x for x, y in enumerate(self.table)}


def embed(e: FieldEmbedding, x: int) -> int:
    return e(x)


def default_embedding(source: FieldSpec, target: FieldSpec) -> FieldEmbedding:
    """The embedding sending the source generator to the least power of the target
    generator that is a root of the source modulus."""
    if source.p != target.p or target.d % source.d:
        raise FieldError(f"{source!r} is not a subfield of {target!r}")
    if source.d == 1:
        return FieldEmbedding(source, target, source.generator)
    step = target.order // source.order
    for i in range(1, source.order + 1):
        g = target.exp(i * step)
        if _eval_poly(target, source.modulus, g) == 0 and target.mult_order(g) == source.order:
            return FieldEmbedding(source, target, g)
    raise FieldError("no root of the source modulus in the target")  # pragma: no cover
