import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fcsreadout import meanfield as mf
from fcsreadout.params import ModelParams

P = ModelParams()
chis = st.floats(-1.2, 1.2).filter(lambda c: abs(c) > 1e-3)


def test_hermitian_fixed_point_coefficients_vanish():
    p = P.with_(omega_delta=0.1, r=0.5)
    c = mf.coefficients(p, (0.0, 0.0), mf.solve_fields(p))
    assert np.max(np.abs(c.linear())) < 1e-12 and abs(c.K) < 1e-12


def test_stationary_fields_match_moment_equation():
    for w in (0.0, 0.1, 0.3):
        f = mf.solve_fields(P.with_(omega_delta=w, r=0.7))
        a = oracles.coherent_amplitude(w)
        assert f.alpha_f == pytest.approx(a) and f.alpha_b == pytest.approx(a)
        assert f.alpha_f_plus == pytest.approx(a.conjugate())


def test_undriven_fields_vanish_at_zero_field():
    f = mf.solve_fields(P.with_(drive=0.0, r=0.5), (0.0, 0.0))
    assert np.max(np.abs(f.as_array())) == 0.0


def test_undriven_tilted_rate_is_shot_noise_only():
    # the counting field sources the fields through the local oscillator,
    # but their contributions to the rate cancel
    p = P.with_(drive=0.0)
    assert mf.cgf_rate(p, 0.4) == pytest.approx(oracles.shot_noise_K(0.4), rel=1e-12)


def test_kerr_terms_vanish_without_displacement():
    p = P.with_(u2=1e-3)
    zero = mf.MeanFields(0j, 0j, 0j, 0j)
    lin = mf.coefficients(P, (0.3, -0.3), zero)
    kerr = mf.coefficients(p, (0.3, -0.3), zero)
    np.testing.assert_allclose(kerr.linear(), lin.linear(), atol=1e-15)
    assert kerr.K == pytest.approx(lin.K)


def test_kerr_newton_iterations():
    f = mf.solve_fields(P.with_(u2=1e-3), (0.3, -0.3))
    assert f.iterations <= 8 and f.residual < 1e-10


def test_cgf_normalisation():
    assert mf.cgf_rate(P.with_(r=1.0, omega_delta=0.1), (0.0, 0.0)) == pytest.approx(0.0, abs=1e-13)


@settings(max_examples=30, deadline=None)
@given(chis, st.floats(0, 1.2), st.floats(-0.4, 0.4))
def test_closed_form_agrees_with_general_solution(chi, r, w):
    p = P.with_(r=r, omega_delta=w)
    assert mf.cgf_rate(p, chi) == pytest.approx(mf.closed_form_K(p, chi), rel=1e-9)


@settings(max_examples=30, deadline=None)
@given(chis, chis, st.floats(0, 1.0), st.floats(-0.3, 0.3), st.sampled_from([0.0, 1e-4, 1e-3]))
def test_conjugation_symmetry(c1, c2, r, w, u2):
    p = P.with_(r=r, omega_delta=w, u2=u2)
    assert mf.cgf_rate(p, (-c1, -c2)) == pytest.approx(np.conj(mf.cgf_rate(p, (c1, c2))), rel=1e-9, abs=1e-12)


@pytest.mark.parametrize("w", [0.0, 0.1, 0.2])
@pytest.mark.parametrize("chi", [0.05, 0.5, -1.0])
def test_shot_noise_reduction(w, chi):
    p = P.with_(drive=0.0, omega_delta=w)
    ref = oracles.shot_noise_K(chi)
    assert mf.closed_form_K(p, chi) == pytest.approx(ref, rel=1e-12)
    assert mf.cgf_rate(p, chi) == pytest.approx(ref, rel=1e-12)


def test_closed_form_small_chi_limit():
    assert abs(mf.closed_form_K(P.with_(r=1.0), 1e-9)) < 1e-7


def test_closed_form_reference_point():
    p = P.with_(r=1.0)
    assert mf.closed_form_K(p, 0.1) == pytest.approx(mf.cgf_rate(p, 0.1), rel=1e-10)


def test_closed_form_rejects_kerr():
    with pytest.raises(ValueError):
        mf.closed_form_K(P.with_(u2=1e-3), 0.1)


def test_qfi_scalar_normalised():
    assert abs(mf.qfi_scalar(P.with_(r=0.5, omega_delta=0.1), 0.0)) < 1e-12


@pytest.mark.parametrize("r,w", [(0.0, 0.0), (1.0, 0.0), (0.5, 0.15)])
def test_qfi_curvature(r, w):
    p = P.with_(r=r, omega_delta=w)
    f = lambda d: mf.qfi_scalar(p, d).real
    second = lambda h: -(f(h) - 2 * f(0.0) + f(-h)) / h**2
    curv = (4 * second(5e-4) - second(1e-3)) / 3
    assert curv == pytest.approx(oracles.qfi_rate(r, w), rel=1e-5)


def test_mean_fields_array_roundtrip():
    f = mf.MeanFields(1 + 1j, 2j, -3.0 + 0j, 0.5 + 0j)
    assert mf.MeanFields.from_array(f.as_array()) == f
