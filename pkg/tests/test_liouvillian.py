import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fcsreadout import liouvillian as lv
from fcsreadout import meanfield as mf
from fcsreadout.fock import trace_vec, vec
from fcsreadout.params import ModelParams

P = ModelParams()


@settings(max_examples=20, deadline=None)
@given(st.floats(-1, 1), st.floats(-1, 1), st.floats(0, 1), st.floats(-0.5, 0.5), st.sampled_from([0.0, 1e-3]))
def test_lab_generator_matches_dense_construction(c1, c2, r, w, u2):
    p = P.with_(r=r, omega_delta=w, u2=u2)
    gen = lv.build_tilted(p, (c1, c2), n_max=6)
    ref = oracles.dense_tilted(6, c1, c2, omega_delta=w, r=r, u2=u2)
    # products of truncated matrices differ at the top levels; compare the rest
    keep = np.array([i * 7 + j for i in range(5) for j in range(5)])
    block = np.ix_(keep, keep)
    np.testing.assert_allclose(gen.full_matrix().toarray()[block], ref[block], atol=1e-12)


def test_local_oscillator_cancels_at_zero_field():
    with_lo = lv.build_tilted(P.with_(r=0.3), (0.0, 0.0), n_max=3).full_matrix().toarray()
    without = lv.build_tilted(P.with_(r=0.3, beta=0.0), (0.0, 0.0), n_max=3).full_matrix().toarray()
    np.testing.assert_allclose(with_lo, without, atol=1e-12)


def test_counting_field_enters_only_jump_blocks():
    p, chi = P.with_(r=0.5, omega_delta=0.1), 0.7
    frame = lv.Frame.displaced(mf.stationary_amplitude(p))
    L0, J1, J2 = lv.counting_split(p, 6, frame)
    tilted = lv.build_tilted(p, chi, 6, frame).full_matrix()
    expected = L0 + np.exp(-1j * chi) * J1 + np.exp(1j * chi) * J2
    assert abs(tilted - expected).max() < 1e-12
    phys = lv.build_tilted(p, 0.0, 6, frame).full_matrix()
    assert abs(phys - (L0 + J1 + J2)).max() < 1e-12


def test_driven_damped_stationary_state_is_coherent():
    p = P.with_(beta=0.0, omega_delta=0.1, drive=0.5)
    st = lv.stationary_state(p, 30, lv.Frame.lab())
    a = np.diag(np.sqrt(np.arange(1, 31)), 1)
    assert np.trace(a @ st.matrix) == pytest.approx(oracles.coherent_amplitude(0.1, drive=0.5), rel=1e-9)


def test_frame_properties():
    assert lv.Frame.lab().is_lab and lv.Frame.lab().is_unitary
    fr = lv.gaussian_frame(P.with_(r=1.0))
    assert fr.is_unitary and not fr.is_lab
    assert abs(fr.mu) ** 2 - abs(fr.nu) ** 2 == pytest.approx(1.0)
    tilted = lv.gaussian_frame(P.with_(r=1.0, omega_delta=0.1), chi=0.5)
    assert not tilted.is_unitary


@given(st.floats(0, 3), st.floats(-2, 2), st.floats(-2, 2))
def test_squeeze_from_moments_is_bogoliubov(n, mr, mi):
    m = complex(mr, mi)
    if abs(m) ** 2 > n * (n + 1):
        m *= math.sqrt(n * (n + 1)) / abs(m) * 0.999
    mu, nu, nth = lv.squeeze_from_moments(n, m)
    assert abs(mu) ** 2 - abs(nu) ** 2 == pytest.approx(1.0, rel=1e-9)
    assert nth >= -1e-12


def test_guard_weight():
    m = np.zeros((6, 6))
    m[0, 0] = 1.0
    assert lv.guard_weight(m) == 0.0
    m[5, 5] = 1.0
    assert lv.guard_weight(m) == pytest.approx(0.5)


def test_propagation_preserves_trace_at_zero_field():
    p = P.with_(r=0.5, omega_delta=0.1)
    gen = lv.build_tilted(p, 0.0, None, lv.gaussian_frame(p))
    for t in (1.0, 10.0, 40.0):
        assert lv.propagate(gen, None, t).trace == pytest.approx(1.0, abs=1e-8)


def test_propagation_shot_noise_log_trace():
    p = P.with_(drive=0.0, gamma=1.3)
    gen = lv.build_tilted(p, 0.5, n_max=8, frame_alpha=0j)
    st = lv.propagate(gen, None, 10.0)
    assert st.log_trace == pytest.approx(10.0 * oracles.shot_noise_K(0.5), rel=1e-9)


def test_propagation_short_time_slope():
    p = P.with_(r=0.5, omega_delta=0.1)
    frame = lv.gaussian_frame(p)
    gen = lv.build_tilted(p, 0.3, None, frame)
    rho0 = lv.stationary_state(p, gen.n_max, frame)
    dt = 1e-5
    slope = trace_vec(gen.dim) @ (gen.full_matrix() @ vec(rho0.matrix))
    assert lv.propagate(gen, rho0, dt).trace == pytest.approx(1 + slope * dt, abs=1e-8)


def test_propagation_needs_unitary_frame():
    p = P.with_(omega_delta=0.1)
    gen = lv.build_tilted(p, 0.3, 10, lv.gaussian_frame(p, chi=0.3))
    with pytest.raises(ValueError):
        lv.propagate(gen, None, 1.0)


def test_propagation_detects_truncation():
    gen = lv.build_tilted(P, 0.0, n_max=4)
    with pytest.raises(lv.TruncationError):
        lv.propagate(gen, None, 20.0)


def test_dominant_eigenvalue_stationarity():
    p = P.with_(r=0.5)
    gen = lv.build_tilted(p, 0.0, None, lv.gaussian_frame(p))
    assert abs(lv.dominant_eigenvalue(gen)) < 1e-10


@pytest.mark.parametrize("chi", [0.1, 0.6, -1.0])
def test_dominant_eigenvalue_shot_noise(chi):
    assert lv.tilted_rate(P.with_(drive=0.0), chi).value == pytest.approx(oracles.shot_noise_K(chi), rel=1e-10)


def test_dominant_eigenvalue_against_dense_oracle():
    p = P.with_(omega_delta=0.1, drive=0.5)
    lam = lv.dominant_eigenvalue(lv.build_tilted(p, 0.2, n_max=30))
    assert lam == pytest.approx(oracles.FROZEN["dense_lambda_r0_w0.1_chi0.2"], rel=1e-9)


@pytest.mark.parametrize("r,w,chi", [(0.5, 0.1, 0.5), (1.0, 0.2, 1.0), (1.0, 0.0, -0.2)])
def test_dominant_eigenvalue_near_mean_field(r, w, chi):
    p = P.with_(r=r, omega_delta=w)
    assert lv.tilted_rate(p, chi).value == pytest.approx(mf.closed_form_K(p, chi), rel=2e-2)


def test_eigen_result_detail():
    p = P.with_(r=0.5)
    res = lv.tilted_rate(p, 0.3)
    assert res.gap > 0 and res.guard < lv.GUARD_THRESHOLD and res.n_max >= 1


def test_propagation_cumulants_shot_noise():
    res = lv.cumulant_rates_by_propagation(P.with_(drive=0.0), 2)
    assert res.rates[0] == pytest.approx(0.0, abs=1e-8)
    assert res.rates[1] == pytest.approx(10.0, abs=1e-6)


def test_propagation_first_cumulant_matches_stationary_mean():
    p = P.with_(omega_delta=0.1)
    res = lv.cumulant_rates_by_propagation(p, 2)
    assert res.rates[0] == pytest.approx(oracles.kappa1(0.0, 0.1), rel=1e-6)


def test_propagation_horizon_floor():
    with pytest.raises(ValueError):
        lv.cumulant_rates_by_propagation(P, 2, horizon=1.0)


@pytest.mark.parametrize("r", [0.0, 0.5, 1.0])
def test_perturbative_variance_at_resonance(r):
    res = lv.cumulant_rates_perturbative(P.with_(r=r), 2)
    assert res.rates[0] == pytest.approx(0.0, abs=1e-10)
    assert res.rates[1] == pytest.approx(oracles.kappa2_resonance(r), rel=1e-8)


def test_perturbative_matches_propagation():
    p = P.with_(r=0.5, omega_delta=0.1)
    a = lv.cumulant_rates_perturbative(p, 4).rates
    b = lv.cumulant_rates_by_propagation(p, 4).rates
    np.testing.assert_allclose(a, b, rtol=2e-3)


def test_qfi_generator_trace_preserving_at_zero():
    p = P.with_(r=0.5)
    gen = lv.build_qfi_generator(p, 0.0, 14, mf.stationary_amplitude(p))
    n = gen.dim
    res = np.abs(trace_vec(n) @ gen.matrix).reshape(n, n)[: n - 2, : n - 2]
    assert res.max() < 1e-12


def test_qfi_generator_overlap_bounded_and_conjugate():
    # the overlap carries a phase odd in delta; its modulus decays
    p = P.with_(r=0.5)
    frame = lv.gaussian_frame(p)
    plus = lv.propagate(lv.build_qfi_generator(p, 0.01, None, frame), None, 20.0).trace
    minus = lv.propagate(lv.build_qfi_generator(p, -0.01, None, frame), None, 20.0).trace
    assert abs(plus) < 1.0
    assert plus == pytest.approx(np.conj(minus), rel=1e-6)


@pytest.mark.parametrize("r", [0.0, 1.0])
def test_qfi_numeric_resonance(r):
    # equal to the mean-field value at r = 0; the fluctuation excess at r = 1 is below 2 %
    val = lv.qfi_perturbative(P.with_(r=r)).rates[0]
    assert val == pytest.approx(oracles.qfi_rate(r), rel=1e-9 if r == 0 else 2e-2)


def test_strict_truncation_policy():
    p = P.with_(r=2.0, u2=1e-3)
    with pytest.raises(lv.TruncationError):
        lv.cumulant_rates_perturbative(p, 2, n_max=20)
    res = lv.cumulant_rates_perturbative(p, 2, n_max=20, strict=False)
    assert not res.converged and res.guard > lv.GUARD_THRESHOLD
