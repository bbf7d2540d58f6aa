import numpy as np
import pytest

from semiclass.embed import (
    EmbedError,
    RegularRep,
    block_perm,
    conjugator,
    dickson_moore,
    lift,
    moore_matrix,
    phi,
    phibar,
    power_basis,
    psi,
)
from semiclass.gf import field_make
from semiclass.linalg import Mat, inverse, rank


@pytest.fixture(scope="module")
def rep16():
    return RegularRep(field_make(2, 4), 2)


def test_phi_basics(rep16):
    f = rep16.big_field
    assert phi(rep16, 1) == Mat.identity(rep16.base_field, 4)
    # companion matrix of x^4 + x + 1 under the column convention
    comp = [[0, 0, 0, 1], [1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0]]
    assert phi(rep16, f.generator).tolist() == comp


def test_phi_is_multiplicative(rep16):
    f = rep16.big_field
    for a in range(16):
        for b in range(16):
            assert phi(rep16, f.mul(a, b)) == phi(rep16, a) @ phi(rep16, b)


def test_phibar_basics(rep16, rng):
    f = rep16.big_field
    assert phibar(rep16, Mat.zeros(f, 2)).is_zero()
    assert phibar(rep16, Mat.identity(f, 2)) == Mat.identity(rep16.base_field, 8)
    for _ in range(50):
        A = Mat(f, rng.integers(0, 16, (2, 2)))
        assert rank(phibar(rep16, A)) == 4 * rank(A)


def test_psi_examples(rep16, rng):
    f = rep16.big_field
    A = Mat(f, rng.integers(0, 2, (3, 3)))
    P = psi(A, 2)
    for j in range(4):
        assert P.a[3 * j:3 * j + 3, 3 * j:3 * j + 3].tolist() == A.tolist()
    assert psi(Mat.identity(f, 2), 2) == Mat.identity(f, 8)
    for _ in range(30):
        B = Mat(f, rng.integers(0, 16, (2, 2)))
        assert rank(psi(B, 2)) == 4 * rank(B)


def test_moore_matrix(rep16):
    f = rep16.big_field
    Z = moore_matrix(f, 2, power_basis(f))
    assert rank(Z) == 4
    t = f.generator
    with pytest.raises(EmbedError):
        moore_matrix(f, 2, [1, t, f.add(t, 1), f.mul(t, t)])


@pytest.mark.parametrize("p,s", [(2, 4), (2, 2), (2, 3), (3, 2)])
def test_dickson_diagonalisation_all_elements(p, s):
    rep = RegularRep(field_make(p, s), p)
    f = rep.big_field
    Z = dickson_moore(rep)
    Zi = inverse(Z)
    for a in range(f.size):
        D = Mat.diag(f, [f.frobenius(p, a, i) for i in range(s)])
        assert Z @ lift(phi(rep, a), f) @ Zi == D


def test_block_perm():
    assert block_perm(1, 4) == Mat.identity(field_make(2, 1), 4)
    P = block_perm(3, 4).a
    assert set(np.unique(P)) <= {0, 1}
    assert (P.sum(axis=0) == 1).all() and (P.sum(axis=1) == 1).all()


@pytest.mark.parametrize("p,s,n", [(2, 4, 2), (2, 4, 3), (3, 2, 3), (2, 2, 2)])
def test_psi_conjugation(p, s, n, rng):
    rep = RegularRep(field_make(p, s), p)
    f = rep.big_field
    W = conjugator(rep, n)
    Wi = inverse(W)
    for _ in range(100 if (p, s, n) == (2, 4, 2) else 20):
        A = Mat(f, rng.integers(0, f.size, (n, n)))
        assert W @ lift(phibar(rep, A), f) @ Wi == psi(A, p)
