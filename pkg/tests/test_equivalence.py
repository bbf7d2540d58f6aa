import numpy as np
import pytest

from oracles import brute_vector_equiv
from semiclass.cli import _random_invertible, random_subspace
from semiclass.equivalence import (
    EquivalenceError,
    brute_force_matrix_equiv,
    matrix_code_equivalent,
    vector_code_equivalent,
)
from semiclass.gf import field_make
from semiclass.invariants import VectorCode, invariant_key, VectorClassRegistry, vector_code
from semiclass.spreadset import MatrixCode, SeedSets, desarguesian, random_spread_set

# same size, same 2-ranks, same (trace, det) signature, yet inequivalent (checked by brute force)
ADVERSARIAL = [
    ([[[1, 0], [0, 0]], [[2, 2], [2, 3]], [[0, 2], [3, 3]]],
     [[[2, 0], [2, 0]], [[0, 2], [3, 2]], [[0, 1], [0, 1]]]),
    ([[[1, 1], [0, 0]], [[0, 0], [1, 1]], [[0, 1], [2, 0]]],
     [[[1, 1], [0, 0]], [[2, 1], [0, 0]], [[0, 2], [3, 1]]]),
    ([[[1, 0], [2, 2]], [[0, 1], [0, 0]], [[0, 2], [0, 2]]],
     [[[1, 0], [1, 0]], [[2, 2], [0, 0]], [[0, 3], [2, 1]]]),
    ([[[1, 0], [0, 1]], [[2, 0], [0, 0]], [[0, 0], [2, 1]]],
     [[[3, 2], [0, 0]], [[0, 2], [2, 2]], [[0, 3], [0, 0]]]),
]

F4 = field_make(2, 2)


def _code(basis):
    return MatrixCode(2, 2, 2, basis, F4)


def _spread_sets(oracle):
    reps, orbit = oracle
    spaces = sorted(orbit, key=lambda S: sorted(S))
    codes = []
    for S in spaces:
        mats = [np.array(M) for M in S if any(any(r) for r in M)]
        # pick an F_2-basis greedily
        basis = []
        span = {((0, 0), (0, 0))}
        for M in mats:
            t = tuple(map(tuple, M.tolist()))
            if t in span:
                continue
            basis.append(M)
            span |= {tuple(tuple(a ^ b for a, b in zip(r1, r2)) for r1, r2 in zip(x, t)) for x in span}
        codes.append((_code(np.array(basis)), orbit[S]))
    return codes


def _random_transform(C, rng):
    f = C.field
    X = _random_invertible(f, C.n, rng)
    Y = _random_invertible(f, C.n, rng)
    rho = f.automorphisms()[int(rng.integers(0, len(f.automorphisms())))]
    return C.transform(X, Y, rho)


def _check(C, C2):
    w = matrix_code_equivalent(C, C2)
    if w is not None:
        assert w.verify(C, C2)
        assert w.inverse().verify(C2, C)
    return w is not None


def test_spread_sets_agree_with_exhaustive_orbits(oracle_222, rng):
    codes = _spread_sets(oracle_222)
    assert len(codes) == 672
    for _ in range(50):
        (a, oa), (b, ob) = (codes[int(i)] for i in rng.integers(0, len(codes), 2))
        assert _check(a, b) == (oa == ob)


def test_random_pairs_agree_with_brute_force(rng):
    for trial in range(50):
        k = int(rng.integers(1, 5))
        A = random_subspace(2, 2, 2, k, rng)
        B = _random_transform(A, rng) if trial % 2 else random_subspace(2, 2, 2, k, rng)
        assert _check(A, B) == brute_force_matrix_equiv(A, B)


@pytest.mark.parametrize("pair", ADVERSARIAL)
def test_adversarial_inequivalent(pair):
    A, B = _code(pair[0]), _code(pair[1])
    assert not brute_force_matrix_equiv(A, B)
    assert not _check(A, B)
    assert not _check(B, A)


def test_adversarial_equivalent(rng):
    f = F4
    frob = f.automorphisms()[1]
    for basis, _ in ADVERSARIAL[:3]:
        A = _code(basis)
        X = _random_invertible(f, 2, rng)
        Y = _random_invertible(f, 2, rng)
        B = A.transform(X, Y, frob)
        assert brute_force_matrix_equiv(A, B)
        assert _check(A, B)


def test_desarguesian_vs_other_class(oracle_222):
    codes = _spread_sets(oracle_222)
    D = desarguesian(2, 2, 2)
    orbit_of_d = next(o for c, o in codes if c == D)
    other = next(c for c, o in codes if o != orbit_of_d)
    assert not _check(D, other)
    assert not brute_force_matrix_equiv(D, other)


def test_identity_and_transformed_at_target_size(rng):
    seeds = SeedSets(2, 2, 4)
    for _ in range(5):
        C = random_spread_set(2, 2, 4, rng, seeds)
        w = matrix_code_equivalent(C, C)
        assert w.X.tolist() == [[1, 0], [0, 1]] and w.rho.is_identity
        C2 = _random_transform(C, rng)
        assert _check(C, C2)
        assert _check(C2, C)


def test_differing_keys_imply_inequivalent(rng):
    seeds = SeedSets(2, 2, 4)
    reg = VectorClassRegistry()
    codes = [random_spread_set(2, 2, 4, rng, seeds) for _ in range(6)]
    keys = [invariant_key(C, reg) for C in codes]
    for i in range(len(codes)):
        for j in range(i + 1, len(codes)):
            if keys[i] != keys[j]:
                assert matrix_code_equivalent(codes[i], codes[j]) is None


def test_errors():
    C = desarguesian(2, 2, 4)
    with pytest.raises(EquivalenceError):
        brute_force_matrix_equiv(C, C)
    with pytest.raises(EquivalenceError):
        matrix_code_equivalent(C, desarguesian(2, 2, 2))
    D = vector_code(C)
    with pytest.raises(EquivalenceError):
        vector_code_equivalent(D, vector_code(desarguesian(2, 2, 2)))


def test_dimension_mismatch_is_negative(rng):
    A = random_subspace(2, 2, 2, 2, rng)
    B = random_subspace(2, 2, 2, 3, rng)
    assert matrix_code_equivalent(A, B) is None


# -- vector codes ----------------------------------------------------------------

def _random_Q(k, rng):
    while True:
        Q = rng.integers(0, 2, (k, k))
        if round(abs(np.linalg.det(Q))) % 2:
            return Q


def _vcheck(D, E):
    w = vector_code_equivalent(D, E)
    if w is not None:
        assert w.verify(D, E)
    return w is not None


@pytest.mark.parametrize("s", [2, 4])
def test_vector_equivalence_agrees_with_brute_force(s, rng):
    f = field_make(2, s)
    for trial in range(20):
        k = int(rng.integers(2, 4))
        D = vector_code(random_subspace(2, 2, s, k, rng))
        if trial % 2:
            E = D.transform(_random_Q(k, rng), f.automorphisms()[int(rng.integers(0, s))])
        else:
            E = vector_code(random_subspace(2, 2, s, k, rng))
        assert _vcheck(D, E) == brute_vector_equiv(D, E)


def test_vector_equivalence_full_length_spread_sets(oracle_222, rng):
    codes = _spread_sets(oracle_222)
    for _ in range(3):
        (a, _), (b, _) = (codes[int(i)] for i in rng.integers(0, len(codes), 2))
        D, E = vector_code(a), vector_code(b)
        assert _vcheck(D, E) == brute_vector_equiv(D, E)


def test_vector_identity_and_transform(rng):
    seeds = SeedSets(2, 2, 4)
    f = field_make(2, 4)
    for _ in range(5):
        D = vector_code(random_spread_set(2, 2, 4, rng, seeds))
        w = vector_code_equivalent(D, D)
        assert (w.Q == np.eye(8)).all() and w.rho.is_identity
        E = D.transform(_random_Q(8, rng), f.automorphisms()[int(rng.integers(0, 4))])
        assert _vcheck(D, E) and _vcheck(E, D)


def test_vector_fast_reject_on_distribution():
    f = field_make(2, 4)
    D = VectorCode(f, 2, [[1, 1, 0]])  # rank weight 1
    E = VectorCode(f, 2, [[1, 2, 0]])  # rank weight 2
    assert D.rank_weight_distribution != E.rank_weight_distribution
    assert vector_code_equivalent(D, E) is None
    assert vector_code_equivalent(D, VectorCode(f, 2, [[1, 1, 0], [0, 0, 1]])) is None


# two-dimensional codes over GF(16) passing every fast reject yet inequivalent,
# found by random search and confirmed with the GL(2, 16) x Aut oracle
VECTOR_ADVERSARIAL = [
    ([[1, 0, 9, 11], [0, 1, 12, 3]], [[1, 0, 11, 12], [0, 1, 2, 6]]),
    ([[1, 0, 8, 10], [0, 1, 12, 12]], [[1, 3, 0, 13], [0, 0, 1, 7]]),
    ([[1, 0, 5, 5, 1], [0, 1, 6, 6, 2]], [[1, 0, 0, 15, 10], [0, 1, 1, 4, 8]]),
    ([[1, 0, 14, 0], [0, 1, 6, 10]], [[1, 0, 3, 8], [0, 1, 7, 0]]),
    ([[1, 0, 7, 0, 6], [0, 1, 15, 11, 0]], [[1, 14, 12, 0, 11], [0, 0, 0, 1, 15]]),
]


@pytest.mark.parametrize("pair", VECTOR_ADVERSARIAL)
def test_vector_adversarial_inequivalent(pair, rng):
    from semiclass.equivalence import _fast_reject

    f = field_make(2, 4)
    D, E = VectorCode(f, 2, pair[0]), VectorCode(f, 2, pair[1])
    assert not _fast_reject(D, E)
    assert vector_code_equivalent(D, E) is None
    assert vector_code_equivalent(E, D) is None
    # a twisted copy of D stays inequivalent to E and equivalent to D
    k = D.length
    D2 = D.transform(_random_Q(k, rng), f.automorphisms()[1])
    assert vector_code_equivalent(D2, E) is None
    assert _vcheck(D, D2)


def test_vector_oracle_on_one_adversarial_pair():
    from oracles import brute_qsystem_equiv

    f = field_make(2, 4)
    D, E = (VectorCode(f, 2, g) for g in VECTOR_ADVERSARIAL[0])
    assert not brute_qsystem_equiv(D, E)


def test_vector_random_dim_two_against_qsystem_oracle(rng):
    from oracles import brute_qsystem_equiv

    f = field_make(2, 3)
    checked = 0
    while checked < 15:
        k = int(rng.integers(3, 6))
        D = VectorCode(f, 2, rng.integers(0, 8, (2, k)))
        E = VectorCode(f, 2, rng.integers(0, 8, (2, k)))
        if D.dim != 2 or E.dim != 2:
            continue
        assert _vcheck(D, E) == brute_qsystem_equiv(D, E)
        checked += 1


# vector codes of random (2,2,4) spread sets sharing dimension, q-system dimension,
# point-weight, rank-weight and line-intersection distributions, yet inequivalent
# (confirmed by the plain backtracking oracle)
SPREAD_VECTOR_PAIRS = [
    ([[1, 0, 0, 15, 0, 10, 11, 12], [0, 1, 0, 7, 0, 1, 0, 6], [0, 0, 1, 15, 0, 2, 6, 0],
      [0, 0, 0, 0, 1, 2, 4, 8]],
     [[1, 0, 0, 7, 0, 3, 7, 0], [0, 1, 0, 13, 0, 5, 1, 4], [0, 0, 1, 8, 0, 15, 12, 2],
      [0, 0, 0, 0, 1, 2, 4, 8]]),
    ([[1, 0, 14, 0, 0, 13, 3, 9], [0, 1, 5, 0, 0, 13, 15, 15], [0, 0, 0, 1, 0, 9, 5, 9],
      [0, 0, 0, 0, 1, 2, 4, 8]],
     [[1, 0, 0, 0, 0, 12, 13, 6], [0, 1, 0, 6, 0, 4, 13, 6], [0, 0, 1, 1, 0, 1, 1, 11],
      [0, 0, 0, 0, 1, 2, 4, 8]]),
]


@pytest.mark.parametrize("pair", SPREAD_VECTOR_PAIRS)
def test_spread_vector_pairs_inequivalent(pair):
    from semiclass.equivalence import _fast_reject

    f = field_make(2, 4)
    D, E = VectorCode(f, 2, pair[0]), VectorCode(f, 2, pair[1])
    assert not _fast_reject(D, E)
    assert vector_code_equivalent(D, E) is None


def test_backtracking_oracle_on_spread_vector_codes(rng):
    from oracles import backtrack_qsystem_equiv

    f = field_make(2, 4)
    modulus = [1, 1, 0, 0, 1]
    D, E = (VectorCode(f, 2, g) for g in SPREAD_VECTOR_PAIRS[0])
    assert not backtrack_qsystem_equiv(D.generator.tolist(), E.generator.tolist(), modulus)
    twisted = D.transform(_random_Q(8, rng), f.automorphisms()[2])
    assert backtrack_qsystem_equiv(D.generator.tolist(), twisted.generator.tolist(), modulus)
