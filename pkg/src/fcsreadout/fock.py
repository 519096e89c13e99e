"""Truncated Fock-space operators and superoperator constructors.

Superoperators act on row-major vectorised matrices, i.e. ``rho.reshape(-1)``,
so that ``vec(A @ X @ B) = kron(A, B.T) @ vec(X)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .params import ModelParams

#: Extra Fock levels used while forming operator products, so that
#: polynomials up to fourth degree are exact on the kept block.
PAD = 4


class InvalidDimensionError(ValueError):
    pass


def _check(n_max: int) -> None:
    if int(n_max) != n_max or n_max < 1:
        raise InvalidDimensionError(f"n_max must be an integer >= 1, got {n_max!r}")


def annihilation(n_max: int) -> np.ndarray:
    """Annihilation operator on the span of ``|0>, ..., |n_max>``."""
    _check(n_max)
    return np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), 1).astype(complex)


def creation(n_max: int) -> np.ndarray:
    return annihilation(n_max).conj().T


def number_operator(n_max: int) -> np.ndarray:
    _check(n_max)
    return np.diag(np.arange(n_max + 1, dtype=float)).astype(complex)


def kerr_hamiltonian(n_max: int, u2: float) -> np.ndarray:
    """``(u2/2) a^dag a^dag a a``, diagonal with entries ``(u2/2) n (n-1)``."""
    _check(n_max)
    n = np.arange(n_max + 1, dtype=float)
    return np.diag(0.5 * u2 * n * (n - 1)).astype(complex)


def jump_operator(params: ModelParams, port: int, n_max: int) -> np.ndarray:
    """Detector jump operator ``sqrt(gamma)(u a - v a^dag) -/+ i beta``.

    Port 1 carries ``-i beta``, port 2 ``+i beta``.
    """
    if port not in (1, 2):
        raise ValueError(f"port must be 1 or 2, got {port!r}")
    a = annihilation(n_max)
    sign = -1.0 if port == 1 else 1.0
    return (np.sqrt(params.gamma) * (params.u * a - params.v * a.conj().T)
            + sign * 1j * params.beta * np.eye(n_max + 1))


@dataclass(frozen=True)
class LadderFrame:
    """Ladder operators seen from the left and from the right of a state.

    In a frame defined by ``a -> mu b + nu b^dag + alpha`` the operator ``a``
    acting on the left of the transformed state becomes
    ``mu b + nu b^dag + alpha_f`` and ``a^dag`` becomes
    ``conj(mu) b^dag + conj(nu) b + alpha_f_plus``; right actions use the
    back amplitudes. For ``alpha_f_plus = conj(alpha_f) = conj(alpha_b) =
    alpha_b_plus`` the frame is a unitary displacement-squeeze.

    All operators live on ``n_max + 1 + PAD`` levels; products are formed
    there and cut back with :meth:`cut`.
    """

    n_max: int
    a_left: np.ndarray
    ad_left: np.ndarray
    a_right: np.ndarray
    ad_right: np.ndarray

    @classmethod
    def build(cls, n_max: int, alpha_f: complex = 0j, alpha_f_plus: complex | None = None,
              alpha_b: complex | None = None, alpha_b_plus: complex | None = None,
              mu: complex = 1.0, nu: complex = 0.0) -> "LadderFrame":
        _check(n_max)
        if alpha_f_plus is None:
            alpha_f_plus = np.conj(alpha_f)
        if alpha_b is None:
            alpha_b = alpha_f
        if alpha_b_plus is None:
            alpha_b_plus = np.conj(alpha_b)
        b = annihilation(n_max + PAD)
        bd = b.conj().T
        eye = np.eye(n_max + 1 + PAD)
        core = mu * b + nu * bd
        core_d = np.conj(mu) * bd + np.conj(nu) * b
        return cls(n_max, core + alpha_f * eye, core_d + alpha_f_plus * eye,
                   core + alpha_b * eye, core_d + alpha_b_plus * eye)

    def cut(self, op: np.ndarray) -> np.ndarray:
        d = self.n_max + 1
        return op[:d, :d]

    def left(self, poly: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        """Evaluate ``poly(a, a^dag)`` with left-acting ladder operators."""
        return self.cut(poly(self.a_left, self.ad_left))

    def right(self, poly: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
        return self.cut(poly(self.a_right, self.ad_right))


def displace_operator(poly: Callable[[np.ndarray, np.ndarray], np.ndarray], alpha: complex,
                      n_max: int) -> np.ndarray:
    """Substitute ``a -> a + alpha`` in a ladder polynomial.

    ``poly`` maps the pair ``(a, a^dag)`` to an operator, e.g.
    ``lambda a, ad: ad @ a``. The substitution is exact on the kept levels
    for polynomials of degree at most ``PAD``.
    """
    return LadderFrame.build(n_max, alpha).left(poly)


# -- superoperators ---------------------------------------------------------

def spre(op) -> sp.csr_matrix:
    """Left multiplication ``X -> op @ X``."""
    op = sp.csr_matrix(op)
    return sp.kron(op, sp.identity(op.shape[0], dtype=complex, format="csr"), format="csr")


def spost(op) -> sp.csr_matrix:
    """Right multiplication ``X -> X @ op``."""
    op = sp.csr_matrix(op)
    return sp.kron(sp.identity(op.shape[0], dtype=complex, format="csr"), op.T, format="csr")


def sprepost(a, b) -> sp.csr_matrix:
    """``X -> a @ X @ b``."""
    return sp.kron(sp.csr_matrix(a), sp.csr_matrix(b).T, format="csr")


def vec(x: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(x).reshape(-1)


def unvec(x: np.ndarray) -> np.ndarray:
    d = int(round(np.sqrt(x.size)))
    return x.reshape(d, d)


def trace_vec(dim: int) -> np.ndarray:
    """Row vector whose product with ``vec(X)`` is ``Tr X``."""
    return vec(np.eye(dim, dtype=complex))
