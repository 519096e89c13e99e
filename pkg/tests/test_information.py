import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from fcsreadout import information as inf
from fcsreadout.params import ModelParams

P = ModelParams()
MF = inf.MeanFieldProvider()


def test_fd_weights_reproduce_polynomials():
    pts = np.arange(-3, 4)
    for order in range(1, 5):
        w = inf.fd_weights(order, pts)
        for deg in range(7):
            exact = math.factorial(order) if deg == order else 0.0
            assert np.dot(w, pts.astype(float) ** deg) == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("order", range(1, 7))
def test_skellam_cumulants(order):
    cs = inf.cumulants(lambda c: oracles.shot_noise_K(c), order)
    expected = [10.0 if k % 2 == 0 else 0.0 for k in range(1, order + 1)]
    np.testing.assert_allclose(cs.rates, expected, rtol=1e-4, atol=1e-8)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 20))
def test_poisson_cumulants(rate):
    cs = inf.cumulants(lambda c: rate * (np.exp(-1j * c) - 1), 6)
    np.testing.assert_allclose(cs.rates, [rate] * 6, rtol=1e-4)
    assert cs[1] == pytest.approx(rate)


def test_cumulants_argument_checks():
    with pytest.raises(ValueError):
        inf.cumulants(lambda c: 0j, 7)
    with pytest.raises(ValueError):
        inf.cumulants(lambda c: complex(np.nan), 2)


def test_variance_drops_with_squeezing_at_resonance():
    k2 = [MF.rates(P.with_(r=r), 2)[2] for r in (0.0, 1.0)]
    assert k2[1] < k2[0]
    assert k2[1] == pytest.approx(oracles.kappa2_resonance(1.0), rel=1e-8)


def test_higher_cumulants_shrink_with_squeezing():
    k = [MF.rates(P.with_(r=r), 4) for r in (0.0, 0.5, 1.0)]
    assert abs(k[0][4]) > abs(k[1][4]) > abs(k[2][4])
    assert all(abs(x[3]) < 1e-6 for x in k)


@pytest.mark.parametrize("r,key", [(0.0, "cfi_r0"), (1.0, "cfi_r1")])
def test_cfi_resonance(r, key):
    p = P.with_(r=r)
    assert inf.cfi_gaussian(MF, p) == pytest.approx(oracles.FROZEN[key], rel=1e-7)
    assert inf.cfi_closed_form(p) == pytest.approx(oracles.FROZEN[key], rel=1e-12)
    assert inf.cfi_gaussian(inf.NumericProvider(), p) == pytest.approx(oracles.FROZEN[key], rel=1e-6)


def test_cfi_undriven_vanishes():
    assert inf.cfi_gaussian(MF, P.with_(drive=0.0)) == pytest.approx(0.0, abs=1e-12)


def test_cfi_invalid_variance():
    class Flat:
        def rates(self, params, order, **_):
            return inf.CumulantSet([0.0] * order, "meanfield-general")

    with pytest.raises(inf.InvalidVarianceError):
        inf.cfi_gaussian(Flat(), P)


@settings(max_examples=25, deadline=None)
@given(st.floats(0, 0.4), st.floats(0, 1.5))
def test_cfi_closed_form_even_and_below_qfi(w, r):
    p = P.with_(r=r, omega_delta=w)
    assert inf.cfi_closed_form(p) == pytest.approx(inf.cfi_closed_form(p.with_(omega_delta=-w)), rel=1e-12)
    assert inf.cfi_closed_form(p) <= inf.qfi_closed_form(p) * (1 + 1e-12)


def test_cfi_closed_form_roots_and_asymptote():
    assert inf.cfi_closed_form(P.with_(omega_delta=0.2)) == pytest.approx(0.0, abs=1e-20)
    assert inf.cfi_closed_form(P.with_(omega_delta=-0.2)) == pytest.approx(0.0, abs=1e-20)
    r = 6.0
    assert inf.cfi_closed_form(P.with_(r=r)) == pytest.approx(1000 * math.exp(2 * r), rel=1e-4)


def test_cfi_closed_form_rejects_kerr():
    with pytest.raises(ValueError):
        inf.cfi_closed_form(P.with_(u2=1e-3))


@pytest.mark.parametrize("r,key", [(0.0, "qfi_r0"), (1.0, "qfi_r1")])
def test_qfi_resonance(r, key):
    assert inf.qfi("meanfield", P.with_(r=r)) == pytest.approx(oracles.FROZEN[key], rel=1e-12)
    assert inf.qfi(inf.MeanFieldProvider(closed=False), P.with_(r=r)) == pytest.approx(oracles.FROZEN[key], rel=1e-6)


def test_qfi_even_in_detuning():
    assert inf.qfi(MF, P.with_(omega_delta=0.13)) == pytest.approx(inf.qfi(MF, P.with_(omega_delta=-0.13)))


@pytest.mark.parametrize("r,key", [(0.0, "eta_r0"), (1.0, "eta_r1")])
def test_efficiency(r, key):
    p = P.with_(r=r)
    assert inf.eta_resonance(p) == pytest.approx(oracles.FROZEN[key], rel=1e-12)
    assert inf.quantum_efficiency(p) == pytest.approx(oracles.FROZEN[key], rel=1e-7)


def test_efficiency_tends_to_one():
    assert inf.eta_resonance(P.with_(r=6.0)) > 0.9999


def test_fisher_report():
    rep = inf.fisher_report(P.with_(r=1.0))
    assert rep.eta == pytest.approx(rep.cfi_rate / rep.qfi_rate)
    assert rep.cfi_method == "meanfield-closed"


def test_skellam_distribution():
    d = inf.distribution(MF, P.with_(drive=0.0), 10.0)
    mean, var = oracles.skellam_moments(10.0, 10.0)
    assert d.mean() == pytest.approx(mean, abs=1e-9)
    assert d.variance() == pytest.approx(var, rel=1e-9)
    from scipy import stats

    ref = stats.skellam(50, 50).pmf(d.support)
    np.testing.assert_allclose(d.probabilities, ref, atol=1e-12)


@pytest.mark.parametrize("r,w", [(0.0, 0.1), (1.0, 0.1), (0.5, 0.0)])
def test_distribution_moments(r, w):
    p = P.with_(r=r, omega_delta=w)
    t = 100 / p.gamma
    k1, k2 = MF.rates(p, 2).rates
    d = inf.distribution(MF, p, t)
    assert d.probabilities.sum() == pytest.approx(1.0, abs=1e-12)
    assert d.mean() == pytest.approx(k1 * t, abs=1e-6 * math.sqrt(k2 * t))
    assert d.variance() == pytest.approx(k2 * t, rel=1e-6)


def test_distribution_center_offset():
    p = P.with_(r=0.5, omega_delta=0.1)
    t = 50.0
    a = inf.distribution(MF, p, t)
    b = inf.distribution(MF, p, t, center=a.center + 17, half_width=500)
    common = np.intersect1d(a.support, b.support)
    pa = a.probabilities[np.isin(a.support, common)]
    pb = b.probabilities[np.isin(b.support, common)]
    np.testing.assert_allclose(pa, pb, atol=1e-14)


def test_distribution_window_too_small():
    with pytest.raises(inf.EnlargeWindowError):
        inf.distribution(MF, P.with_(omega_delta=0.1), 50.0, center=0, half_width=100)


def test_distribution_rejects_bad_grid():
    with pytest.raises(ValueError):
        inf.distribution(MF, P, 10.0, n_chi=300)


def test_cfi_from_distribution_gaussian_limit():
    p = P
    t = 200 / p.gamma
    assert inf.cfi_from_distribution(p, t) == pytest.approx(inf.cfi_gaussian(MF, p), rel=2e-2)


def test_cfi_from_distribution_undriven():
    assert inf.cfi_from_distribution(P.with_(drive=0.0), 50.0) == pytest.approx(0.0, abs=1e-9)


def test_numeric_provider_routes_agree():
    p = P.with_(r=0.5, omega_delta=0.1)
    a = inf.NumericProvider("perturbative").rates(p, 2).rates
    b = inf.NumericProvider("eigenvalue").rates(p, 2).rates
    c = inf.NumericProvider("propagation").rates(p, 2).rates
    np.testing.assert_allclose(a, b, rtol=1e-5)
    np.testing.assert_allclose(a, c, rtol=1e-3)


def test_numeric_provider_rejects_unknown_route():
    with pytest.raises(ValueError):
        inf.NumericProvider("magic")


def test_cumulant_set_source_checked():
    with pytest.raises(ValueError):
        inf.CumulantSet([1.0], "guess")
