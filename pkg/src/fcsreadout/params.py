"""Physical parameters of the squeezed dispersive-readout model.

All frequencies are measured in units of the probe amplitude, so the
default parameter point has ``drive = 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace


class InvalidParameterError(ValueError):
    """Raised when a parameter set violates the model's domain."""


def hyperbolic_factors(r: float) -> tuple[float, float]:
    """Return the Bogoliubov factors ``(cosh r, sinh r)`` of the squeezer."""
    if not math.isfinite(r):
        raise InvalidParameterError(f"squeezing depth must be finite, got {r!r}")
    return math.cosh(r), math.sinh(r)


@dataclass(frozen=True)
class ModelParams:
    """Parameter point of the driven resonator.

    Attributes
    ----------
    omega_delta : float
        Detuning between resonator and local oscillator.
    drive : float
        Probe Rabi amplitude.
    gamma : float
        Effective dissipation rate, strictly positive.
    beta : float
        Local-oscillator amplitude (square root of a photon rate), real.
    r : float
        Squeezing depth.
    u2 : float
        Kerr strength.
    """

    omega_delta: float = 0.0
    drive: float = 1.0
    gamma: float = 0.4
    beta: float = math.sqrt(10.0)
    r: float = 0.0
    u2: float = 0.0

    def __post_init__(self):
        for name in ("omega_delta", "drive", "gamma", "beta", "r", "u2"):
            value = getattr(self, name)
            if isinstance(value, complex) or not math.isfinite(float(value)):
                raise InvalidParameterError(f"{name} must be a finite real number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if self.gamma <= 0:
            raise InvalidParameterError(f"gamma must be positive, got {self.gamma}")
        if self.beta < 0:
            raise InvalidParameterError(f"beta must be nonnegative, got {self.beta}")
        if self.r < 0:
            raise InvalidParameterError(f"r must be nonnegative, got {self.r}")
        if self.u2 < 0:
            raise InvalidParameterError(f"u2 must be nonnegative, got {self.u2}")

    @classmethod
    def from_beta_sq(cls, beta_sq: float, **kwargs) -> "ModelParams":
        if beta_sq < 0:
            raise InvalidParameterError(f"beta_sq must be nonnegative, got {beta_sq}")
        return cls(beta=math.sqrt(beta_sq), **kwargs)

    @property
    def beta_sq(self) -> float:
        return self.beta**2

    @property
    def u(self) -> float:
        return math.cosh(self.r)

    @property
    def v(self) -> float:
        return math.sinh(self.r)

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class DispersiveInput:
    """Transverse qubit-resonator coupling and detuning."""

    g_x: float
    delta_qr: float

    @property
    def lam(self) -> float:
        return self.g_x / self.delta_qr

    @property
    def in_dispersive_regime(self) -> bool:
        return abs(self.g_x / self.delta_qr) < 0.3


@dataclass(frozen=True)
class DispersiveShift:
    chi_z: float
    lam: float
    scale_delta_r: float
    scale_zeta: float
    dispersive_ok: bool


def dispersive_shift(inp: DispersiveInput) -> DispersiveShift:
    """Leading dispersive shift and fourth-order correction scales.

    The resonator frequency seen by the readout is ``omega_r +/- chi_z``
    depending on the qubit state. ``scale_delta_r`` and ``scale_zeta`` are
    only the leading magnitude ``-g_x**4 / delta_qr**3``; they are not
    used by the dynamics, where the Kerr strength is an independent input.
    """
    if inp.delta_qr == 0:
        raise ZeroDivisionError("qubit-resonator detuning must be nonzero")
    lam = inp.g_x / inp.delta_qr
    chi_z = inp.g_x**2 / inp.delta_qr * (1.0 - 2.0 * lam**2)
    scale = -inp.g_x**4 / inp.delta_qr**3
    ok = abs(lam) < 0.3
    if not ok:
        warnings.warn(f"|g_x/delta_qr| = {abs(lam):.3g} is outside the dispersive regime", stacklevel=2)
    return DispersiveShift(chi_z, lam, scale, scale, ok)
