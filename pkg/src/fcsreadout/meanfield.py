"""Non-Hermitian mean-field theory of the counting-field master equation.

The generalised density matrix is displaced by four independent amplitudes,
``a rho -> alpha_f``, ``a^dag rho -> alpha_f_plus``, ``rho a -> alpha_b`` and
``rho a^dag -> alpha_b_plus``. Requiring the terms linear in the
fluctuations to vanish (``A = A+ = B = B+ = 0``) fixes the amplitudes, and
the remaining scalar ``K`` is the growth rate of the cumulant-generating
function. The same construction with frequency-split forward/backward
evolution gives the scalar ``F_delta`` whose curvature is the quantum Fisher
information rate.

The squeezing factors are written ``u = cosh r`` and ``v = sinh r``
throughout (other notations use mu, nu for the same quantities).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .params import ModelParams

NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 50
CONTINUATION_STEPS = 12


class DegenerateCountingFieldError(ArithmeticError):
    """The linear mean-field system is singular at this counting field."""


class NewtonConvergenceError(ArithmeticError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class MeanFields:
    alpha_f: complex
    alpha_f_plus: complex
    alpha_b: complex
    alpha_b_plus: complex
    iterations: int = field(default=0, compare=False)
    residual: float = field(default=0.0, compare=False)

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha_f, self.alpha_f_plus, self.alpha_b, self.alpha_b_plus], dtype=complex)

    @classmethod
    def from_array(cls, x, iterations: int = 0, residual: float = 0.0) -> "MeanFields":
        return cls(*(complex(c) for c in x), iterations=iterations, residual=residual)

    def squeezed(self, u: float, v: float) -> tuple[complex, complex, complex, complex]:
        """Return ``(xi_f, xi_b, eta_f, eta_b)``."""
        return (u * self.alpha_f - v * self.alpha_f_plus,
                u * self.alpha_b - v * self.alpha_b_plus,
                u * self.alpha_f_plus - v * self.alpha_f,
                u * self.alpha_b_plus - v * self.alpha_b)


@dataclass(frozen=True)
class CoefficientSet:
    A: complex
    A_plus: complex
    B: complex
    B_plus: complex
    K: complex

    def linear(self) -> np.ndarray:
        return np.array([self.A, self.A_plus, self.B, self.B_plus], dtype=complex)


@dataclass(frozen=True)
class ClosedFormK:
    f0: complex
    f1: complex
    f2: complex
    f3: complex
    phi: float


def _coefficients(p: ModelParams, e1: complex, e2: complex, omega_f: float, omega_b: float,
                  x: np.ndarray) -> CoefficientSet:
    af, afp, ab, abp = x
    u, v, g, om = p.u, p.v, p.gamma, p.drive
    beta = complex(p.beta)
    bc = beta.conjugate()
    sg = math.sqrt(g)
    es, ed = e1 + e2, e1 - e2
    xf, xb = u * af - v * afp, u * ab - v * abp
    ef, eb = u * afp - v * af, u * abp - v * ab

    A = (-1j * (omega_f * af - 1j * om) - 0.5 * g * es * v * eb - 0.5 * g * (u * xf - v * ef)
         - 0.5 * sg * ed * 1j * v * bc)
    Ap = (-1j * (omega_f * afp + 1j * om) + 0.5 * g * es * u * eb - 0.5 * g * (-v * xf + u * ef)
          + 0.5 * sg * ed * 1j * u * bc)
    B = (1j * (omega_b * ab - 1j * om) + 0.5 * g * es * u * xf - 0.5 * g * (u * xb - v * eb)
         - 0.5 * sg * ed * 1j * u * beta)
    Bp = (1j * (omega_b * abp + 1j * om) - 0.5 * g * es * v * xf - 0.5 * g * (-v * xb + u * eb)
          + 0.5 * sg * ed * 1j * v * beta)
    K = (-1j * (omega_f * afp * af - 1j * om * afp + 1j * om * af)
         + 1j * (omega_b * abp * ab - 1j * om * abp + 1j * om * ab)
         + 0.5 * g * (es * xf * eb - ef * xf - eb * xb)
         + 0.5 * sg * ed * (1j * xf * bc - 1j * beta * eb)
         + 0.5 * abs(beta) ** 2 * (es - 2.0))
    if p.u2:
        U = p.u2
        K += -0.5j * U * afp**2 * af**2 + 0.5j * U * abp**2 * ab**2
        A += -1j * U * afp * af**2
        Ap += -1j * U * afp**2 * af
        B += 1j * U * abp * ab**2
        Bp += 1j * U * abp**2 * ab
    return CoefficientSet(complex(A), complex(Ap), complex(B), complex(Bp), complex(K))


def _kerr_jacobian(U: float, x: np.ndarray) -> np.ndarray:
    af, afp, ab, abp = x
    jac = np.zeros((4, 4), dtype=complex)
    jac[0, 0], jac[0, 1] = -2j * U * afp * af, -1j * U * af**2
    jac[1, 0], jac[1, 1] = -1j * U * afp**2, -2j * U * afp * af
    jac[2, 2], jac[2, 3] = 2j * U * abp * ab, 1j * U * ab**2
    jac[3, 2], jac[3, 3] = 1j * U * abp**2, 2j * U * abp * ab
    return jac


def _phases(chi) -> tuple[complex, complex]:
    chi1, chi2 = chi
    return complex(np.exp(-1j * chi1)), complex(np.exp(-1j * chi2))


def coefficients(params: ModelParams, chi, fields: MeanFields) -> CoefficientSet:
    """Linear-fluctuation coefficients and scalar rate at counting field ``chi = (chi1, chi2)``."""
    e1, e2 = _phases(chi)
    w = params.omega_delta
    return _coefficients(params, e1, e2, w, w, fields.as_array())


def qfi_coefficients(params: ModelParams, delta: float, fields: MeanFields) -> CoefficientSet:
    """Coefficients of the frequency-split evolution; ``K`` holds ``F_delta``."""
    w = params.omega_delta
    return _coefficients(params, 1.0, 1.0, w + delta, w - delta, fields.as_array())


def _solve(params: ModelParams, e1, e2, omega_f, omega_b) -> MeanFields:
    linear = params.with_(u2=0.0)
    c0 = _coefficients(linear, e1, e2, omega_f, omega_b, np.zeros(4, complex)).linear()
    M = np.empty((4, 4), dtype=complex)
    for k in range(4):
        e = np.zeros(4, complex)
        e[k] = 1.0
        M[:, k] = _coefficients(linear, e1, e2, omega_f, omega_b, e).linear() - c0
    if np.linalg.cond(M) > 1e14:
        raise DegenerateCountingFieldError("mean-field linear system is singular")
    x = np.linalg.solve(M, -c0)
    scale = max(params.drive, params.gamma * params.beta, params.gamma)
    if not params.u2:
        res = np.max(np.abs(_coefficients(params, e1, e2, omega_f, omega_b, x).linear()))
        return MeanFields.from_array(x, 0, float(res))

    def newton(x, U):
        p = params.with_(u2=U)
        for it in range(1, NEWTON_MAX_ITER + 1):
            c = _coefficients(p, e1, e2, omega_f, omega_b, x).linear()
            x = x - np.linalg.solve(M + _kerr_jacobian(U, x), c)
            res = np.max(np.abs(_coefficients(p, e1, e2, omega_f, omega_b, x).linear()))
            if not np.isfinite(res):
                break
            if res <= NEWTON_TOL * scale:
                return x, it, res
        raise NewtonConvergenceError(f"Newton did not converge at u2={U:g}", float(res))

    try:
        x, it, res = newton(x, params.u2)
        return MeanFields.from_array(x, it, float(res))
    except NewtonConvergenceError:
        pass
    total = 0
    for U in params.u2 * 0.5 ** np.arange(CONTINUATION_STEPS, -1, -1):
        x, it, res = newton(x, U)
        total += it
    return MeanFields.from_array(x, total, float(res))


def solve_fields(params: ModelParams, chi=(0.0, 0.0)) -> MeanFields:
    """Mean fields at which every linear fluctuation term vanishes.

    The Kerr-free system is affine and is solved directly; with ``u2 > 0``
    Newton's method is seeded with the linear solution, falling back to
    geometric continuation in ``u2`` if the direct attempt fails.
    """
    e1, e2 = _phases(chi)
    w = params.omega_delta
    return _solve(params, e1, e2, w, w)


def solve_qfi_fields(params: ModelParams, delta: float) -> MeanFields:
    w = params.omega_delta
    return _solve(params, 1.0, 1.0, w + delta, w - delta)


def cgf_rate(params: ModelParams, chi) -> complex:
    """Mean-field growth rate ``K`` of the cumulant-generating function.

    A scalar ``chi`` means the antisymmetric pair ``(chi, -chi)``.
    """
    chi = _as_pair(chi)
    return coefficients(params, chi, solve_fields(params, chi)).K


def qfi_scalar(params: ModelParams, delta: float) -> complex:
    """Scalar ``F_delta`` of the frequency-split evolution at its stationary fields."""
    return qfi_coefficients(params, delta, solve_qfi_fields(params, delta)).K


def stationary_amplitude(params: ModelParams) -> complex:
    """Coherent amplitude of the physical (zero counting field) steady state."""
    return solve_fields(params).alpha_f


def _as_pair(chi):
    if np.ndim(chi) == 0:
        return (float(chi), -float(chi))
    return (float(chi[0]), float(chi[1]))


def closed_form_coefficients(params: ModelParams, chi: float) -> ClosedFormK:
    g, om, b, r = params.gamma, params.drive, params.beta, params.r
    cot = math.cos(chi / 2) / math.sin(chi / 2) if math.sin(chi / 2) != 0 else math.inf
    f3 = -32j * b * math.sqrt(g) * om * math.exp(r) * cot
    f2 = (8 * b**2 * g**2 * (math.exp(4 * r) - 1) * math.cos(chi) + 8 * b**2 * g**2 * math.exp(4 * r)
          + 16 * g * om**2 * math.exp(2 * r))
    f1 = -8j * b * g**2.5 * om * (math.exp(r) * math.cos(chi) * cot + math.exp(-3 * r) * math.sin(chi))
    f0 = b**2 * g**4 + 4 * g**3 * om**2 * math.exp(-2 * r)
    return ClosedFormK(f0, f1, f2, f3, phi_factor(params))


def phi_factor(params: ModelParams) -> float:
    g, om, b2, r, w = params.gamma, params.drive, params.beta_sq, params.r, params.omega_delta
    return 16 * b2 * w**2 + 8 * b2 * g**2 * (2 * math.exp(4 * r) - 1) + 16 * g * om**2 * math.exp(2 * r)


def closed_form_K(params: ModelParams, chi: float) -> complex:
    """Closed-form rate for ``chi1 = -chi2 = chi`` in the Kerr-free model.

    ``sin^2(chi/2) cot(chi/2)`` is evaluated as ``sin(chi/2) cos(chi/2)`` so
    the expression stays accurate as ``chi -> 0``.
    """
    if params.u2:
        raise ValueError("closed form holds only for u2 = 0")
    g, om, b, r, w = params.gamma, params.drive, params.beta, params.r, params.omega_delta
    s2 = math.sin(chi / 2) ** 2
    sc = math.sin(chi / 2) * math.cos(chi / 2)
    f3_s2 = -32j * b * math.sqrt(g) * om * math.exp(r) * sc
    f1_s2 = -8j * b * g**2.5 * om * (math.exp(r) * math.cos(chi) * sc + math.exp(-3 * r) * math.sin(chi) * s2)
    f2 = (8 * b**2 * g**2 * (math.exp(4 * r) - 1) * math.cos(chi) + 8 * b**2 * g**2 * math.exp(4 * r)
          + 16 * g * om**2 * math.exp(2 * r))
    f0 = b**2 * g**4 + 4 * g**3 * om**2 * math.exp(-2 * r)
    num = s2 * (16 * b**2 * w**4 + f2 * w**2 + f0) + f3_s2 * w**3 + f1_s2 * w
    den = 16 * w**2 * g**2 * math.sinh(2 * r) ** 2 * math.sin(chi) ** 2 + (4 * w**2 + g**2) ** 2
    return complex(-2.0 * num / den)
