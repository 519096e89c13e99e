import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fcsreadout import fock
from fcsreadout.params import ModelParams


def test_two_level_annihilation():
    np.testing.assert_array_equal(fock.annihilation(1), [[0, 1], [0, 0]])


def test_ladder_coefficient():
    assert fock.annihilation(2)[1, 2] == pytest.approx(np.sqrt(2))


@given(st.integers(1, 30))
def test_truncated_commutator(n):
    a = fock.annihilation(n)
    c = a @ fock.creation(n) - fock.creation(n) @ a
    expected = np.eye(n + 1)
    expected[-1, -1] = -n
    np.testing.assert_allclose(c, expected, atol=1e-12)


@pytest.mark.parametrize("bad", [0, -1, 2.5])
def test_invalid_dimension(bad):
    with pytest.raises(fock.InvalidDimensionError):
        fock.annihilation(bad)


def test_kerr_diagonal():
    k = np.diag(fock.kerr_hamiltonian(5, 1e-3)).real
    assert k[0] == 0 and k[1] == 0
    assert k[2] == pytest.approx(1e-3)
    assert k[4] == pytest.approx(6e-3)


def test_jump_operator_limits():
    p = ModelParams(beta=0.0, gamma=1.0)
    np.testing.assert_allclose(fock.jump_operator(p, 1, 4), fock.annihilation(4))
    q = ModelParams(r=1.0)
    const = fock.jump_operator(q, 1, 4)[0, 0]
    assert abs(const) == pytest.approx(np.sqrt(10))
    assert fock.jump_operator(q, 2, 4)[0, 0] == pytest.approx(1j * np.sqrt(10))
    with pytest.raises(ValueError):
        fock.jump_operator(p, 3, 4)


def test_displace_annihilation():
    alpha = 0.3 - 0.7j
    np.testing.assert_allclose(fock.displace_operator(lambda a, ad: a, alpha, 6),
                               fock.annihilation(6) + alpha * np.eye(7), atol=1e-14)


def test_displaced_number_vacuum_mean():
    alpha = 1.2 + 0.5j
    n = fock.displace_operator(lambda a, ad: ad @ a, alpha, 8)
    assert n[0, 0] == pytest.approx(abs(alpha) ** 2)


def test_displaced_kerr_linear_term():
    # (a^dag + a*)^2 (a + a)^2 U/2 carries U |alpha|^2 alpha on a^dag
    U, alpha = 1e-3, 0.8 + 0.3j
    k = fock.displace_operator(lambda a, ad: 0.5 * U * ad @ ad @ a @ a, alpha, 8)
    assert k[1, 0] == pytest.approx(U * abs(alpha) ** 2 * alpha, rel=1e-12)


@settings(max_examples=25)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_superoperator_products(n, seed):
    rng = np.random.default_rng(seed)
    A, B, X = (rng.normal(size=(n + 1, n + 1)) + 1j * rng.normal(size=(n + 1, n + 1)) for _ in range(3))
    x = fock.vec(X)
    np.testing.assert_allclose(fock.unvec(fock.spre(A) @ x), A @ X, atol=1e-10)
    np.testing.assert_allclose(fock.unvec(fock.spost(B) @ x), X @ B, atol=1e-10)
    np.testing.assert_allclose(fock.unvec(fock.sprepost(A, B) @ x), A @ X @ B, atol=1e-10)
    assert fock.trace_vec(n + 1) @ x == pytest.approx(np.trace(X))


def test_ladder_frame_unitary_defaults():
    lf = fock.LadderFrame.build(5, 0.4 + 0.2j)
    np.testing.assert_allclose(lf.left(lambda a, ad: a), lf.right(lambda a, ad: a))
    np.testing.assert_allclose(lf.left(lambda a, ad: ad), lf.left(lambda a, ad: a).conj().T)
