"""Cumulants, Fisher information and count distributions from CGF providers.

A provider turns a parameter point into cumulant rates and a quantum Fisher
information rate. :class:`MeanFieldProvider` uses the non-Hermitian mean
field (closed form where available); :class:`NumericProvider` uses the
truncated counting-field generator.

Counting-field conventions: ``M(chi) = E[exp(-i chi n)]`` for the photon
number difference ``n``, so cumulant rates are derivatives with respect to
``s = -i chi``, i.e. ``kappa_l = i^l d^l K / d chi^l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import liouvillian as lv
from . import meanfield as mf
from .params import ModelParams

CHI_STEP = 1e-2
OMEGA_STEP_FACTOR = 1e-4
DELTA_STEP_FACTOR = 1e-3
PLATEAU_ORDER = 4
SOURCES = ("meanfield-closed", "meanfield-general", "numeric-eigenvalue", "numeric-propagation")


class InvalidVarianceError(ArithmeticError):
    pass


class UndefinedEfficiencyError(ArithmeticError):
    pass


class EnlargeWindowError(RuntimeError):
    pass


@dataclass(frozen=True)
class CumulantSet:
    rates: list
    source: str
    imag_residuals: list = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")

    def __getitem__(self, order: int) -> float:
        """1-based access, ``cs[2]`` is the variance rate."""
        return self.rates[order - 1]


@dataclass(frozen=True)
class FisherReport:
    cfi_rate: float
    qfi_rate: float
    eta: float
    cfi_method: str
    qfi_method: str


@dataclass(frozen=True)
class CountDistribution:
    support: np.ndarray
    probabilities: np.ndarray
    time: float
    center: int
    min_raw: float = 0.0

    def mean(self) -> float:
        return float(np.dot(self.support, self.probabilities))

    def variance(self) -> float:
        m = self.mean()
        return float(np.dot((self.support - m) ** 2, self.probabilities))


# -- finite differences -----------------------------------------------------

def fd_weights(order: int, points) -> np.ndarray:
    """Weights ``w`` with ``f^(order)(0) ~ sum w_j f(x_j)`` (Vandermonde solve)."""
    x = np.asarray(points, dtype=float)
    n = len(x)
    V = np.vander(x, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = math.factorial(order)
    return np.linalg.solve(V, rhs)


def _stencil(order: int):
    m = (order + 1) // 2 + 1
    pts = np.arange(-m, m + 1, dtype=float)
    return pts, fd_weights(order, pts)


def _derivative(f_samples: Callable[[np.ndarray], np.ndarray], order: int, h: float) -> complex:
    """Central difference with one Richardson refinement (stencils are 4th order)."""
    pts, w = _stencil(order)
    d_h = np.dot(w, f_samples(pts * h)) / h**order
    d_h2 = np.dot(w, f_samples(pts * h / 2)) / (h / 2) ** order
    return complex((16 * d_h2 - d_h) / 15)


def cumulants(cgf: Callable[[float], complex], order: int, h: float = CHI_STEP,
              source: str = "meanfield-general") -> CumulantSet:
    """Cumulant rates ``kappa_1..kappa_order`` of a CGF rate ``chi -> K(chi)``."""
    if not 1 <= order <= 6:
        raise ValueError("order must be between 1 and 6")
    cache: dict[float, complex] = {}

    def samples(xs):
        out = []
        for x in xs:
            key = round(float(x), 15)
            if key not in cache:
                val = 0j if key == 0 else complex(cgf(key))
                if not np.isfinite(val):
                    raise ValueError(f"non-finite CGF sample at chi={key}")
                cache[key] = val
            out.append(cache[key])
        return np.array(out)

    rates, resid = [], []
    for ell in range(1, order + 1):
        if ell < PLATEAU_ORDER:
            d = _derivative(samples, ell, h)
        else:
            # high orders lose digits to cancellation at small steps; take the
            # estimate where doubling the step changes it least
            est = [_derivative(samples, ell, h * 2**k) for k in range(4)]
            jumps = [abs(est[k] - est[k + 1]) for k in range(3)]
            d = est[int(np.argmin(jumps))]
        k = (1j**ell) * d
        rates.append(float(k.real))
        resid.append(abs(k.imag))
    return CumulantSet(rates, source, resid)


def _central(f: Callable[[float], float], x: float, h: float) -> float:
    """First derivative, central difference refined once (``h`` and ``h/2``)."""
    d1 = (f(x + h) - f(x - h)) / (2 * h)
    d2 = (f(x + h / 2) - f(x - h / 2)) / h
    return (4 * d2 - d1) / 3


def _second(f: Callable[[float], float], h: float) -> float:
    """Second derivative at 0 with one Richardson refinement."""
    f0 = f(0.0)
    d1 = (f(h) - 2 * f0 + f(-h)) / h**2
    d2 = (f(h / 2) - 2 * f0 + f(-h / 2)) / (h / 2) ** 2
    return (4 * d2 - d1) / 3


# -- providers --------------------------------------------------------------

class MeanFieldProvider:
    """Mean-field CGF; ``closed=True`` uses the closed forms whenever ``u2 = 0``."""

    def __init__(self, closed: bool = True, chi_step: float = CHI_STEP):
        self.closed = closed
        self.chi_step = chi_step

    def _use_closed(self, params):
        return self.closed and params.u2 == 0

    def source(self, params) -> str:
        return "meanfield-closed" if self._use_closed(params) else "meanfield-general"

    def cgf(self, params: ModelParams, chi: float) -> complex:
        if self._use_closed(params):
            return mf.closed_form_K(params, chi)
        return mf.cgf_rate(params, chi)

    def rates(self, params: ModelParams, order: int, **_) -> CumulantSet:
        return cumulants(lambda c: self.cgf(params, c), order, self.chi_step, self.source(params))

    def qfi_rate(self, params: ModelParams) -> tuple[float, dict]:
        if self._use_closed(params):
            return qfi_closed_form(params), {}
        h = DELTA_STEP_FACTOR * params.gamma
        return -_second(lambda d: mf.qfi_scalar(params, d).real, h), {}


class NumericProvider:
    """Truncated-generator CGF.

    ``route`` selects how cumulants are obtained:

    * ``"perturbative"``: exact derivatives of the dominant eigenvalue at
      zero counting field (fast, default);
    * ``"eigenvalue"``: finite differences of the dominant eigenvalue;
    * ``"propagation"``: derivative propagation with a late-time fit.

    ``strict=False`` accepts results whose guard band could not be emptied
    below the truncation cap; their convergence is reported instead.
    """

    ROUTES = ("perturbative", "eigenvalue", "propagation")

    def __init__(self, route: str = "perturbative", n_max: Optional[int] = None, horizon: Optional[float] = None,
                 chi_step: float = CHI_STEP, strict: bool = True):
        if route not in self.ROUTES:
            raise ValueError(f"route must be one of {self.ROUTES}")
        self.route, self.n_max, self.horizon = route, n_max, horizon
        self.chi_step, self.strict = chi_step, strict

    def source(self, params=None) -> str:
        return "numeric-propagation" if self.route == "propagation" else "numeric-eigenvalue"

    def cgf(self, params: ModelParams, chi: float, frame=None, n_max=None) -> complex:
        return lv.tilted_rate(params, chi, n_max or self.n_max, frame).value

    def rates(self, params: ModelParams, order: int, frame=None, n_max=None) -> CumulantSet:
        n_max = n_max or self.n_max
        if self.route == "perturbative":
            res = lv.cumulant_rates_perturbative(params, order, n_max, frame, self.strict)
            diag = {"n_max": res.n_max, "guard": res.guard, "converged": res.converged,
                    "truncation_change": res.change, "residual": 0.0}
            return CumulantSet(res.rates, self.source(), [0.0] * order, diag)
        if self.route == "propagation":
            res = lv.cumulant_rates_by_propagation(params, order, self.horizon, n_max)
            diag = {"n_max": res.n_max, "residual": max(res.residuals), "converged": True,
                    "truncation_change": 0.0}
            return CumulantSet(res.rates, self.source(), [0.0] * order, diag)
        frame = lv.gaussian_frame(params) if frame is None else frame
        n_used = n_max or lv.tilted_rate(params, self.chi_step, None, frame).n_max
        cs = cumulants(lambda c: self.cgf(params, c, frame, n_used), order, self.chi_step, self.source())
        diag = {"n_max": n_used, "residual": max(cs.imag_residuals), "converged": True, "truncation_change": 0.0}
        return CumulantSet(cs.rates, cs.source, cs.imag_residuals, diag)

    def qfi_rate(self, params: ModelParams) -> tuple[float, dict]:
        if self.route == "eigenvalue":
            frame = lv.gaussian_frame(params)
            h = DELTA_STEP_FACTOR * params.gamma
            n = self.n_max or lv.qfi_rate_value(params, h, None, frame).n_max
            val = -_second(lambda d: lv.qfi_rate_value(params, d, n, frame).value.real, h)
            return val, {"n_max": n, "converged": True, "truncation_change": 0.0}
        res = lv.qfi_perturbative(params, self.n_max, None, self.strict)
        return res.rates[0], {"n_max": res.n_max, "converged": res.converged, "truncation_change": res.change}


# -- Fisher information -----------------------------------------------------

@dataclass(frozen=True)
class CfiResult:
    value: float
    kappa1_slope: float
    kappa2: float
    diagnostics: dict = field(default_factory=dict)

    def __float__(self):
        return self.value


def cfi_gaussian(provider, params: ModelParams, omega_step: Optional[float] = None, detail: bool = False):
    """Gaussian-limit CFI rate ``(d kappa_1/d omega)^2 / kappa_2``."""
    h = OMEGA_STEP_FACTOR * params.gamma if omega_step is None else omega_step
    center = provider.rates(params, 2)
    kappa2 = center.rates[1]
    if not kappa2 > 0:
        raise InvalidVarianceError(f"variance rate must be positive, got {kappa2}")
    extra = {}
    if isinstance(provider, NumericProvider) and provider.route != "propagation":
        extra = {"frame": lv.gaussian_frame(params), "n_max": center.diagnostics["n_max"]}
    w0 = params.omega_delta
    slope = _central(lambda w: provider.rates(params.with_(omega_delta=w), 1, **extra).rates[0], w0, h)
    value = slope**2 / kappa2
    if detail:
        return CfiResult(value, slope, kappa2, dict(center.diagnostics))
    return value


def cfi_closed_form(params: ModelParams) -> float:
    """Closed-form CFI rate of the Kerr-free model."""
    if params.u2:
        raise ValueError("closed form holds only for u2 = 0")
    g, om, b2, r, w = params.gamma, params.drive, params.beta_sq, params.r, params.omega_delta
    phi = mf.phi_factor(params)
    num = 64 * b2 * g * (g**2 - 4 * w**2) ** 2 * om**2 * math.exp(2 * r)
    den = (4 * w**2 + g**2) ** 2 * (g**4 * b2 + 4 * om**2 * g**3 * math.exp(-2 * r) + w**2 * phi)
    return num / den


def qfi_closed_form(params: ModelParams) -> float:
    g, om, r, w = params.gamma, params.drive, params.r, params.omega_delta
    return 64 * om**2 * g * math.exp(2 * r) / (4 * w**2 + g**2) ** 2


def qfi(provider, params: ModelParams) -> float:
    """QFI rate from ``provider`` (a provider instance, ``"meanfield"`` or ``"numeric"``)."""
    if isinstance(provider, str):
        provider = {"meanfield": MeanFieldProvider(), "numeric": NumericProvider()}[provider]
    return provider.qfi_rate(params)[0]


def eta_resonance(params: ModelParams) -> float:
    """Quantum efficiency at zero detuning, ``1 - 4 Omega^2 / (4 Omega^2 + gamma beta^2 e^{2r})``."""
    om2 = params.drive**2
    return 1.0 - 4 * om2 / (4 * om2 + params.gamma * params.beta_sq * math.exp(2 * params.r))


def quantum_efficiency(params: ModelParams, provider=None) -> float:
    provider = MeanFieldProvider() if provider is None else provider
    q = qfi(provider, params)
    if q <= 0:
        raise UndefinedEfficiencyError("QFI rate vanishes")
    return cfi_gaussian(provider, params) / q


def fisher_report(params: ModelParams, provider=None) -> FisherReport:
    provider = MeanFieldProvider() if provider is None else provider
    c = cfi_gaussian(provider, params)
    q = qfi(provider, params)
    if q <= 0:
        raise UndefinedEfficiencyError("QFI rate vanishes")
    src = provider.source(params)
    return FisherReport(c, q, c / q, src, src)


# -- count distribution -----------------------------------------------------

def _window(kappa2: float, t: float) -> int:
    return int(max(math.ceil(8 * math.sqrt(max(kappa2 * t, 0.0))), 64))


def _next_pow2(n: int) -> int:
    return 1 << max(int(n - 1).bit_length(), 0)


def distribution(provider, params: ModelParams, t: float, n_chi: Optional[int] = None,
                 center: Optional[int] = None, half_width: Optional[int] = None,
                 tail_tol: float = 1e-6) -> CountDistribution:
    """Probability of the photon-number difference after time ``t``.

    ``M(chi) = exp(K(chi) t)`` is sampled on ``[-pi, pi)`` with the phase
    ``exp(+i chi center)`` that shifts the window to the mean, then inverted
    by FFT.
    """
    if center is None or half_width is None:
        cs = provider.rates(params, 2)
        center = int(round(cs.rates[0] * t)) if center is None else center
        half_width = _window(cs.rates[1], t) if half_width is None else half_width
    need = max(256, 2 * half_width + 1)
    if n_chi is None:
        n_chi = _next_pow2(need)
    if n_chi & (n_chi - 1) or n_chi < need:
        raise ValueError(f"n_chi must be a power of two >= {need}")
    chis = -math.pi + 2 * math.pi * np.arange(n_chi) / n_chi
    K = np.array([provider.cgf(params, c) if c != 0 else 0j for c in chis])
    f = np.exp(K * t + 1j * chis * center)
    raw = np.fft.ifft(f)
    j = np.arange(-half_width, half_width + 1)
    q = ((-1.0) ** np.abs(j)) * raw[j % n_chi]
    p = q.real
    min_raw = float(p.min())
    p = np.clip(p, 0.0, None)
    edge = max(1, half_width // 16)
    tail = p[:edge].sum() + p[-edge:].sum()
    if tail > tail_tol:
        raise EnlargeWindowError(f"tail mass {tail:.2e} at window edges exceeds {tail_tol:g}")
    p = p / p.sum()
    return CountDistribution(center + j, p, t, center, min_raw)


def cfi_from_distribution(params: ModelParams, t: float, omega_step: Optional[float] = None,
                          provider=None) -> float:
    """Fisher information of the finite-time distribution, divided by ``t``."""
    provider = MeanFieldProvider() if provider is None else provider
    h = OMEGA_STEP_FACTOR * params.gamma if omega_step is None else omega_step
    cs = provider.rates(params, 2)
    c, W = int(round(cs.rates[0] * t)), _window(cs.rates[1], t)
    w0 = params.omega_delta
    dists = [distribution(provider, params.with_(omega_delta=w0 + s), t, center=c, half_width=W)
             for s in (-h, 0.0, h)]
    if not all(np.array_equal(d.support, dists[0].support) for d in dists):
        raise ValueError("distributions are on different windows")
    pm, p0, pp = (d.probabilities for d in dists)
    dp = (pp - pm) / (2 * h)
    mask = p0 > 1e-300
    return float(np.sum(dp[mask] ** 2 / p0[mask]) / t)
