"""Counting-field generator on a truncated Fock space.

The generalised density matrix is simulated in a *frame*: a similarity
transform ``rho = T_f R T_b^{-1}`` built from a (possibly non-unitary)
displacement and a squeeze ``a -> mu b + nu b^dag``. Spectra do not depend
on the frame, but a frame close to the dominant eigenvector keeps the
required truncation small. Traces are preserved only by unitary frames
(``alpha_f_plus = conj(alpha_f)`` and forward equal to backward), so
propagation is restricted to those.

Identity-proportional local-oscillator terms ``(|beta|^2/2)(e1 + e2 - 2)``
are kept out of the sparse matrix and added analytically to rates.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from math import comb

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .fock import LadderFrame, spost, spre, sprepost, trace_vec, unvec, vec
from .meanfield import MeanFields, solve_fields, solve_qfi_fields
from .params import ModelParams

GUARD_LEVELS = 2
GUARD_THRESHOLD = 1e-8
N_MAX_CAP = 150
DENSE_LIMIT = 2500
GAP_WARN = 1e-6


class TruncationError(RuntimeError):
    """Population in the guard band exceeds the threshold."""


class EigenSolverError(RuntimeError):
    pass


class IntegrationError(RuntimeError):
    pass


class HorizonTooShortError(RuntimeError):
    def __init__(self, message: str, residuals):
        super().__init__(message)
        self.residuals = residuals


class IllConditionedWarning(RuntimeWarning):
    pass


# -- frames -----------------------------------------------------------------

@dataclass(frozen=True)
class Frame:
    """Displacement amplitudes plus squeeze of the simulation frame."""

    alpha_f: complex = 0j
    alpha_f_plus: complex = 0j
    alpha_b: complex = 0j
    alpha_b_plus: complex = 0j
    mu: complex = 1.0
    nu: complex = 0.0
    n_thermal: float = 0.0

    @classmethod
    def lab(cls) -> "Frame":
        return cls()

    @classmethod
    def displaced(cls, alpha: complex) -> "Frame":
        a = complex(alpha)
        return cls(a, a.conjugate(), a, a.conjugate())

    @classmethod
    def from_fields(cls, fields: MeanFields, mu: complex = 1.0, nu: complex = 0.0,
                    n_thermal: float = 0.0) -> "Frame":
        return cls(fields.alpha_f, fields.alpha_f_plus, fields.alpha_b, fields.alpha_b_plus,
                   mu, nu, n_thermal)

    @property
    def alpha(self) -> complex:
        return self.alpha_f

    @property
    def is_unitary(self) -> bool:
        c = np.conj
        tol = 1e-12 * (1.0 + abs(self.alpha_f))
        return (abs(self.alpha_f_plus - c(self.alpha_f)) < tol and abs(self.alpha_b - self.alpha_f) < tol
                and abs(self.alpha_b_plus - self.alpha_f_plus) < tol)

    @property
    def is_lab(self) -> bool:
        return max(abs(self.alpha_f), abs(self.alpha_f_plus), abs(self.alpha_b),
                   abs(self.alpha_b_plus), abs(self.nu)) == 0

    def ladders(self, n_max: int) -> LadderFrame:
        return LadderFrame.build(n_max, self.alpha_f, self.alpha_f_plus, self.alpha_b,
                                 self.alpha_b_plus, self.mu, self.nu)

    def with_fields(self, fields: MeanFields) -> "Frame":
        return Frame.from_fields(fields, self.mu, self.nu, self.n_thermal)


def linearized_moments(params: ModelParams, alpha: complex) -> tuple[float, complex]:
    """Stationary ``<da^dag da>`` and ``<da da>`` of fluctuations about ``alpha``.

    Kerr enters through the linearised detuning ``omega + 2 U |alpha|^2`` and
    the two-photon term ``U alpha^2``.
    """
    g, u, v, U = params.gamma, params.u, params.v, params.u2
    delta = params.omega_delta + 2 * U * abs(alpha) ** 2
    G = U * alpha**2
    # unknowns (n, m, m*)
    M = np.array([[-g, 1j * np.conj(G), -1j * G],
                  [-2j * G, -2j * delta - g, 0],
                  [2j * np.conj(G), 0, 2j * delta - g]], dtype=complex)
    rhs = -np.array([g * v * v, -1j * G + g * u * v, 1j * np.conj(G) + g * u * v], dtype=complex)
    n, m, _ = np.linalg.solve(M, rhs)
    return float(n.real), complex(m)


def squeeze_from_moments(n: float, m: complex) -> tuple[complex, complex, float]:
    """Bogoliubov pair ``(mu, nu)`` and thermal occupation reproducing ``(n, m)``."""
    h = n + 0.5
    am = abs(m)
    if am < 1e-14:
        return 1.0, 0.0, max(n, 0.0)
    s = 0.5 * math.atanh(min(am / h, 1 - 1e-15))
    n_th = math.sqrt(max(h * h - am * am, 0.25)) - 0.5
    return complex(math.cosh(s)), complex(m / am * math.sinh(s)), n_th


def gaussian_frame(params: ModelParams, chi=None, delta: float | None = None) -> Frame:
    """Frame seeded by mean-field amplitudes and the linearised stationary squeeze.

    ``chi=None`` and ``delta=None`` give the unitary stationary frame;
    otherwise the displacement follows the (non-Hermitian) mean fields at
    the given counting field or QFI deformation.
    """
    stationary = solve_fields(params)
    n, m = linearized_moments(params, stationary.alpha_f)
    mu, nu, n_th = squeeze_from_moments(n, m)
    if delta is not None:
        fields = solve_qfi_fields(params, delta)
    elif chi is not None:
        fields = solve_fields(params, _pair(chi))
    else:
        a = stationary.alpha_f
        fields = MeanFields(a, np.conj(a), a, np.conj(a))
    return Frame.from_fields(fields, mu, nu, n_th)


def default_n_max(params: ModelParams, frame: Frame) -> int:
    """Truncation heuristic.

    Lab frame: ``|alpha|^2 + 10 sqrt(|alpha|^2 cosh 2r) + 10`` with the
    stationary amplitude. Displaced frame: ``10 cosh 2r + 10``. Squeezed
    frames scale with the residual thermal occupation.
    """
    if frame.is_lab:
        a2 = abs(solve_fields(params).alpha_f) ** 2
        return int(math.ceil(a2 + 10 * math.sqrt(a2 * math.cosh(2 * params.r)) + 10))
    if frame.nu == 0:
        return int(math.ceil(10 * math.cosh(2 * params.r) + 10))
    return int(math.ceil(24 + 12 * frame.n_thermal))


def _pair(chi):
    if np.ndim(chi) == 0:
        return (float(chi), -float(chi))
    return (float(chi[0]), float(chi[1]))


# -- generator assembly -----------------------------------------------------

@dataclass(frozen=True)
class _Pieces:
    hamiltonian: sp.csr_matrix
    anticomm: sp.csr_matrix
    sandwich: sp.csr_matrix
    l_pre: sp.csr_matrix
    l_post: sp.csr_matrix
    ld_pre: sp.csr_matrix
    ld_post: sp.csr_matrix


def _pieces(params: ModelParams, frame: Frame, n_max: int, omega_f: float, omega_b: float) -> _Pieces:
    lf = frame.ladders(n_max)
    om, U = params.drive, params.u2
    sg, u, v = math.sqrt(params.gamma), params.u, params.v

    def ham(w):
        return lambda a, ad: w * ad @ a + 0.5 * U * ad @ ad @ a @ a + 1j * om * a - 1j * om * ad

    def jump(a, ad):
        return sg * (u * a - v * ad)

    def jump_d(a, ad):
        return sg * (u * ad - v * a)

    def ldl(a, ad):
        return jump_d(a, ad) @ jump(a, ad)

    H = -1j * spre(lf.left(ham(omega_f))) + 1j * spost(lf.right(ham(omega_b)))
    Ll, Ldl = lf.left(jump), lf.left(jump_d)
    Lr, Ldr = lf.right(jump), lf.right(jump_d)
    anti = spre(lf.left(ldl)) + spost(lf.right(ldl))
    return _Pieces(H.tocsr(), anti.tocsr(), sprepost(Ll, Ldr), spre(Ll), spost(Lr), spre(Ldl), spost(Ldr))


@dataclass(frozen=True)
class TiltedGenerator:
    """Vectorised counting-field generator.

    ``matrix`` excludes the identity-proportional local-oscillator term
    ``lo_scalar``; the full generator is ``matrix + lo_scalar * I``.
    """

    params: ModelParams
    chi: tuple[float, float]
    n_max: int
    frame: Frame
    matrix: sp.csr_matrix = field(repr=False)
    lo_scalar: complex = 0j

    @property
    def frame_alpha(self) -> complex:
        return self.frame.alpha_f

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def full_matrix(self) -> sp.csr_matrix:
        return (self.matrix + self.lo_scalar * sp.identity(self.dim**2, dtype=complex, format="csr")).tocsr()


@dataclass(frozen=True)
class QfiGenerator:
    params: ModelParams
    delta: float
    n_max: int
    frame: Frame
    matrix: sp.csr_matrix = field(repr=False)
    lo_scalar: complex = 0j

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def full_matrix(self) -> sp.csr_matrix:
        return self.matrix


def _jump_terms(p: _Pieces, c: complex) -> sp.csr_matrix:
    """Operator part of ``(1/2) A rho A^dag`` for ``A = L + c``."""
    return 0.5 * (p.sandwich + np.conj(c) * p.l_pre + c * p.ld_post)


def _nojump_terms(p: _Pieces, c: complex) -> sp.csr_matrix:
    """Operator part of ``-(1/4){A^dag A, rho}`` for ``A = L + c``."""
    return -0.25 * (p.anticomm + c * (p.ld_pre + p.ld_post) + np.conj(c) * (p.l_pre + p.l_post))


def _resolve_frame(frame, params):
    if frame is None:
        return Frame.lab()
    if isinstance(frame, Frame):
        return frame
    return Frame.displaced(complex(frame))


def build_tilted(params: ModelParams, chi=(0.0, 0.0), n_max: int | None = None,
                 frame_alpha=None) -> TiltedGenerator:
    """Assemble the counting-field generator.

    Parameters
    ----------
    chi : float or (float, float)
        Counting fields; a scalar means ``(chi, -chi)``.
    frame_alpha : complex or Frame, optional
        A complex number selects the unitary displaced frame; ``None`` the lab
        frame.
    """
    chi = _pair(chi)
    frame = _resolve_frame(frame_alpha, params)
    if n_max is None:
        n_max = default_n_max(params, frame)
    w = params.omega_delta
    p = _pieces(params, frame, n_max, w, w)
    beta = params.beta
    c1, c2 = -1j * beta, 1j * beta
    e1, e2 = np.exp(-1j * chi[0]), np.exp(-1j * chi[1])
    M = (p.hamiltonian + e1 * _jump_terms(p, c1) + e2 * _jump_terms(p, c2)
         + _nojump_terms(p, c1) + _nojump_terms(p, c2))
    lo = 0.5 * beta**2 * (e1 + e2 - 2.0)
    return TiltedGenerator(params, chi, int(n_max), frame, M.tocsr(), complex(lo))


def build_qfi_generator(params: ModelParams, delta: float, n_max: int | None = None,
                        frame_alpha=None) -> QfiGenerator:
    """Generator with forward frequency ``omega + delta`` and backward ``omega - delta``."""
    frame = _resolve_frame(frame_alpha, params)
    if n_max is None:
        n_max = default_n_max(params, frame)
    w = params.omega_delta
    p = _pieces(params, frame, n_max, w + delta, w - delta)
    M = p.hamiltonian + p.sandwich - 0.5 * p.anticomm
    return QfiGenerator(params, float(delta), int(n_max), frame, M.tocsr())


def counting_split(params: ModelParams, n_max: int, frame: Frame):
    """Return ``(L0, J1, J2)`` with ``L_chi = L0 + e^{-i chi1} J1 + e^{-i chi2} J2``.

    Identity terms are included, so ``L0 + J1 + J2`` is the physical generator.
    """
    w = params.omega_delta
    p = _pieces(params, frame, n_max, w, w)
    beta = params.beta
    eye = sp.identity((n_max + 1) ** 2, dtype=complex, format="csr")
    c1, c2 = -1j * beta, 1j * beta
    L0 = p.hamiltonian + _nojump_terms(p, c1) + _nojump_terms(p, c2) - beta**2 * eye
    J1 = _jump_terms(p, c1) + 0.5 * beta**2 * eye
    J2 = _jump_terms(p, c2) + 0.5 * beta**2 * eye
    return L0.tocsr(), J1.tocsr(), J2.tocsr()


# -- states -----------------------------------------------------------------

@dataclass(frozen=True)
class GeneralizedState:
    """Frame-space matrix ``R`` with a scalar prefactor ``exp(log_scale)``."""

    matrix: np.ndarray
    time: float = 0.0
    log_scale: complex = 0j

    @property
    def n_max(self) -> int:
        return self.matrix.shape[0] - 1

    @property
    def trace(self) -> complex:
        return complex(np.exp(self.log_scale) * np.trace(self.matrix))

    @property
    def log_trace(self) -> complex:
        return complex(self.log_scale + np.log(np.trace(self.matrix)))

    @classmethod
    def vacuum(cls, n_max: int) -> "GeneralizedState":
        m = np.zeros((n_max + 1, n_max + 1), dtype=complex)
        m[0, 0] = 1.0
        return cls(m)


def guard_weight(matrix: np.ndarray, levels: int = GUARD_LEVELS) -> float:
    """Fraction of row/column norm carried by the top ``levels`` Fock levels.

    Equals the guard-band population for diagonal states and is a
    comparable measure for non-Hermitian eigenvectors.
    """
    rows = np.linalg.norm(matrix, axis=1)
    cols = np.linalg.norm(matrix, axis=0)
    w = rows + cols
    total = w.sum()
    if total == 0:
        return 0.0
    return float(w[-levels:].sum() / total)


def _check_guard(matrix, n_max):
    g = guard_weight(matrix)
    if g > GUARD_THRESHOLD:
        raise TruncationError(f"guard-band weight {g:.2e} exceeds {GUARD_THRESHOLD:g} at n_max={n_max}")
    return g


def propagate(gen: TiltedGenerator | QfiGenerator, state0: GeneralizedState | None, t_final: float,
              tol: float = 1e-8, segment: float | None = None) -> GeneralizedState:
    """Integrate the generalised master equation to ``t_final``.

    The state is renormalised between segments of length ``segment``
    (default ``5/gamma``); the removed scale and the analytic LO term are
    accumulated in ``log_scale``.
    """
    if not gen.frame.is_unitary:
        raise ValueError("propagation requires a unitary frame so that traces are preserved")
    if state0 is None:
        state0 = GeneralizedState.vacuum(gen.n_max)
    if state0.n_max != gen.n_max:
        raise ValueError("state and generator truncations differ")
    M = gen.matrix
    seg = segment if segment is not None else 5.0 / gen.params.gamma
    y = vec(state0.matrix).astype(complex)
    t, log_scale = state0.time, complex(state0.log_scale)
    t_end = state0.time + t_final
    while t < t_end - 1e-15 * max(1.0, t_end):
        t1 = min(t + seg, t_end)
        sol = solve_ivp(lambda _, x: M @ x, (t, t1), y, method="DOP853", rtol=tol, atol=tol * 1e-3)
        if sol.status != 0:
            raise IntegrationError(sol.message)
        y = sol.y[:, -1]
        scale = np.max(np.abs(y))
        if not np.isfinite(scale) or scale == 0:
            raise IntegrationError("state vanished or diverged during propagation")
        y = y / scale
        log_scale += math.log(scale) + gen.lo_scalar * (t1 - t)
        t = t1
    R = unvec(y).copy()
    _check_guard(R, gen.n_max)
    return GeneralizedState(R, t, log_scale)


def stationary_state(params: ModelParams, n_max: int | None = None, frame: Frame | None = None) -> GeneralizedState:
    """Trace-one null vector of the physical generator in a unitary frame."""
    frame = gaussian_frame(params) if frame is None else frame
    gen = build_tilted(params, (0.0, 0.0), n_max, frame)
    d = gen.dim
    tr = sp.csr_matrix(trace_vec(d)[None, :])
    A = sp.vstack([tr, gen.matrix[1:]]).tocsc()
    b = np.zeros(d * d, dtype=complex)
    b[0] = 1.0
    x = spla.spsolve(A, b)
    R = unvec(x)
    R = 0.5 * (R + R.conj().T)
    return GeneralizedState(R / np.trace(R))


# -- spectra ----------------------------------------------------------------

@dataclass(frozen=True)
class EigenResult:
    value: complex
    gap: float
    guard: float
    n_max: int
    vector: np.ndarray = field(repr=False, compare=False)


def dominant_eigenvalue(gen: TiltedGenerator | QfiGenerator, guess: complex | None = None,
                        k: int = 6, detail: bool = False):
    """Eigenvalue of largest real part, including the analytic LO scalar.

    Shift-invert Arnoldi around ``guess`` (by default the generator's
    frame-vacuum diagonal element); dense diagonalisation is the fallback for
    small problems.
    """
    M = gen.matrix
    n = M.shape[0]
    gamma = gen.params.gamma
    sigma = complex(M[0, 0]) if guess is None else complex(guess) - gen.lo_scalar
    sigma += 0.05 * gamma
    vals = vecs = None
    if n > k + 2:
        try:
            vals, vecs = spla.eigs(M.tocsc(), k=k, sigma=sigma, which="LM", tol=0, maxiter=5000)
        except (spla.ArpackNoConvergence, RuntimeError, ValueError):
            vals = None
    if vals is None:
        if n > DENSE_LIMIT:
            raise EigenSolverError("shift-invert iteration failed and dimension exceeds dense fallback")
        vals, vecs = sla.eig(M.toarray())
    order = np.argsort(-vals.real)
    lam = vals[order[0]]
    gap = float(lam.real - vals[order[1]].real) if len(vals) > 1 else math.inf
    if gap < GAP_WARN * gamma:
        warnings.warn(f"spectral gap {gap:.2e} below {GAP_WARN:g} gamma", IllConditionedWarning, stacklevel=2)
    R = unvec(vecs[:, order[0]])
    value = complex(lam + gen.lo_scalar)
    if detail:
        return EigenResult(value, gap, guard_weight(R), gen.n_max, R)
    return value


def _grow(n_max):
    return int(math.ceil(1.5 * n_max))


def tilted_rate(params: ModelParams, chi, n_max: int | None = None, frame: Frame | None = None,
                guess: complex | None = None) -> EigenResult:
    """Dominant eigenvalue at ``chi`` with guard-band checking.

    Without an explicit ``n_max`` the truncation grows by 1.5x until the
    guard band is empty (up to ``N_MAX_CAP``); an explicit ``n_max`` that
    fails the guard raises :class:`TruncationError`.
    """
    chi = _pair(chi)
    if frame is None:
        frame = gaussian_frame(params, chi)
    if guess is None:
        from .meanfield import cgf_rate
        guess = cgf_rate(params, chi)
    fixed = n_max is not None
    n = n_max if fixed else default_n_max(params, frame)
    while True:
        res = dominant_eigenvalue(build_tilted(params, chi, n, frame), guess, detail=True)
        if res.guard <= GUARD_THRESHOLD:
            return res
        if fixed or n >= N_MAX_CAP:
            raise TruncationError(f"guard-band weight {res.guard:.2e} at n_max={n}")
        n = min(_grow(n), N_MAX_CAP)


def qfi_rate_value(params: ModelParams, delta: float, n_max: int | None = None,
                   frame: Frame | None = None) -> EigenResult:
    """Dominant eigenvalue of the frequency-split generator (``F_delta`` numerically)."""
    if frame is None:
        frame = gaussian_frame(params)
    from .meanfield import qfi_scalar
    guess = qfi_scalar(params, delta)
    fixed = n_max is not None
    n = n_max if fixed else default_n_max(params, frame)
    while True:
        res = dominant_eigenvalue(build_qfi_generator(params, delta, n, frame), guess, detail=True)
        if res.guard <= GUARD_THRESHOLD:
            return res
        if fixed or n >= N_MAX_CAP:
            raise TruncationError(f"guard-band weight {res.guard:.2e} at n_max={n}")
        n = min(_grow(n), N_MAX_CAP)


def truncation_change(params: ModelParams, chi, n_max: int, frame: Frame | None = None) -> float:
    """Relative change of the dominant eigenvalue when ``n_max`` is doubled."""
    chi = _pair(chi)
    frame = gaussian_frame(params, chi) if frame is None else frame
    a = dominant_eigenvalue(build_tilted(params, chi, n_max, frame))
    b = dominant_eigenvalue(build_tilted(params, chi, 2 * n_max, frame), a)
    return float(abs(b - a) / max(abs(b), 1e-300))


# -- cumulants by derivative propagation -----------------------------------

@dataclass(frozen=True)
class PropagationCumulants:
    rates: list
    residuals: list
    n_max: int
    horizon: float


def _moments_to_cumulants(mu):
    """Cumulants from raw moments ``mu[0..L]`` (``mu[0] = 1``)."""
    kappa = [0.0] * len(mu)
    for n in range(1, len(mu)):
        kappa[n] = mu[n] - sum(comb(n - 1, m - 1) * kappa[m] * mu[n - m] for m in range(1, n))
    return kappa[1:]


def cumulant_rates_by_propagation(params: ModelParams, order: int = 4, horizon: float | None = None,
                                  n_max: int | None = None, samples: int = 61,
                                  fit_tol: float = 1e-4) -> PropagationCumulants:
    """Cumulant rates from propagating derivatives with respect to ``s = -i chi``.

    With ``chi1 = -chi2 = chi`` the generator is ``L0 + e^{s} J1 + e^{-s} J2``,
    so its ``k``-th ``s``-derivative is ``J1 + (-1)^k J2``. The derivatives
    ``rho^(k)`` obey a block lower-triangular linear system, propagated
    exactly with the action of its matrix exponential. The first-order
    block is shifted by the stationary mean current so moments stay centred;
    cumulants are fitted linearly over the second half of the horizon.
    """
    if not 1 <= order <= 6:
        raise ValueError("order must be between 1 and 6")
    horizon = 60.0 / params.gamma if horizon is None else horizon
    if horizon < 10.0 / params.gamma:
        raise ValueError("horizon must be at least 10/gamma")
    frame = gaussian_frame(params)
    if n_max is None:
        n_max = default_n_max(params, frame)
    rho0 = stationary_state(params, n_max, frame)
    _check_guard(rho0.matrix, n_max)
    L0, J1, J2 = counting_split(params, n_max, frame)
    tr = trace_vec(n_max + 1)
    x0 = vec(rho0.matrix)
    mean_rate = float(np.real(tr @ ((J1 - J2) @ x0)))
    d = (n_max + 1) ** 2
    eye = sp.identity(d, dtype=complex, format="csr")
    Ls = [L0 + J1 + J2]
    for k in range(1, order + 1):
        D = J1 + (-1) ** k * J2
        Ls.append(D - mean_rate * eye if k == 1 else D)
    blocks = [[None] * (order + 1) for _ in range(order + 1)]
    for k in range(order + 1):
        for m in range(k + 1):
            blocks[k][k - m] = comb(k, m) * Ls[m]
    big = sp.bmat(blocks, format="csr")
    y0 = np.zeros((order + 1) * d, dtype=complex)
    y0[:d] = x0
    t_eval = np.linspace(0.0, horizon, samples)
    Y = spla.expm_multiply(big, y0, start=0.0, stop=horizon, num=samples, endpoint=True)
    Y = Y.reshape(samples, order + 1, d)
    _check_guard(unvec(Y[-1, 0]), n_max)
    mom = np.real(Y @ tr)
    kap = np.array([_moments_to_cumulants(m / m[0]) for m in mom]).T
    window = t_eval >= 0.5 * horizon
    tw = t_eval[window]
    floor = 1e-6 * abs(kap[1, -1]) if order > 1 else 1e-12
    rates, residuals = [], []
    for k in range(order):
        yk = kap[k, window]
        slope, icpt = np.polyfit(tw, yk, 1)
        resid = yk - (slope * tw + icpt)
        scale = max(np.max(np.abs(yk)), floor, 1e-12)
        residuals.append(float(np.sqrt(np.mean(resid**2)) / scale))
        rates.append(float(slope + (mean_rate if k == 0 else 0.0)))
    bad = [k + 1 for k, r in enumerate(residuals) if r > fit_tol]
    if bad:
        raise HorizonTooShortError(f"linear fit residual above {fit_tol:g} for orders {bad}", residuals)
    return PropagationCumulants(rates, residuals, n_max, horizon)


# -- exact eigenvalue derivatives at zero counting field --------------------

@dataclass(frozen=True)
class PerturbativeResult:
    """Rates with truncation diagnostics.

    ``converged`` is False only in non-strict mode when the guard band could
    not be emptied below ``N_MAX_CAP``; ``change`` is then the largest
    relative rate change between the last two truncations.
    """

    rates: list
    n_max: int
    guard: float
    converged: bool = True
    change: float = 0.0


def _eigen_derivatives(L0: sp.csr_matrix, ders, order: int, n_max: int) -> tuple[list, float]:
    """Taylor derivatives of the dominant eigenvalue of ``L(s) = sum_m ders[m] s^m/m!``.

    Rayleigh-Schroedinger recursion with the trace-one normalisation of the
    eigenvector: ``lambda_n = sum_m C(n,m) Tr(L_m rho_{n-m})`` and
    ``rho_n = L0^+ [sum_m C(n,m) (lambda_m - L_m) rho_{n-m}]`` on traceless
    matrices. One bordered LU factorisation serves every order.
    """
    d = n_max + 1
    tr = trace_vec(d)
    c = tr / d
    aug = sp.bmat([[L0, sp.csr_matrix(c[:, None])], [sp.csr_matrix(tr[None, :]), None]], format="csc")
    lu = spla.splu(aug)

    def solve(b, tau):
        x = lu.solve(np.concatenate([b, [tau]]))
        return x[:-1]

    rho = [solve(np.zeros(d * d, complex), 1.0)]
    guard = guard_weight(unvec(rho[0]))
    lam = [0.0]
    for n in range(1, order + 1):
        terms = [ders(m) @ rho[n - m] for m in range(1, n + 1)]
        lam_n = sum(comb(n, m) * (tr @ terms[m - 1]) for m in range(1, n + 1))
        lam.append(lam_n)
        if n == order:
            break
        b = sum(comb(n, m) * (lam[m] * rho[n - m] - terms[m - 1]) for m in range(1, n + 1))
        rho.append(solve(b, 0.0))
    return [complex(x) for x in lam[1:]], guard


def _with_growth(fn, n_max, strict=True):
    fixed = n_max is not None
    n, prev = n_max, None
    while True:
        out = fn(n)
        if out.guard <= GUARD_THRESHOLD:
            return out
        if fixed or out.n_max >= N_MAX_CAP:
            if strict:
                raise TruncationError(f"guard-band weight {out.guard:.2e} at n_max={out.n_max}")
            if prev is None:
                return PerturbativeResult(out.rates, out.n_max, out.guard, False, math.nan)
            change = max(abs(a - b) / max(abs(a), 1e-300) for a, b in zip(out.rates, prev.rates))
            return PerturbativeResult(out.rates, out.n_max, out.guard, False, float(change))
        prev = out
        n = min(_grow(out.n_max), N_MAX_CAP)


def cumulant_rates_perturbative(params: ModelParams, order: int = 2, n_max: int | None = None,
                                frame: Frame | None = None, strict: bool = True) -> PerturbativeResult:
    """Cumulant rates as exact ``s``-derivatives of the dominant eigenvalue at ``s = 0``."""
    if not 1 <= order <= 6:
        raise ValueError("order must be between 1 and 6")
    frame = gaussian_frame(params) if frame is None else frame

    def run(n):
        n = default_n_max(params, frame) if n is None else n
        L0, J1, J2 = counting_split(params, n, frame)
        lam, guard = _eigen_derivatives((L0 + J1 + J2).tocsr(), lambda m: J1 + (-1) ** m * J2, order, n)
        return PerturbativeResult([x.real for x in lam], n, guard)

    return _with_growth(run, n_max, strict)


def qfi_perturbative(params: ModelParams, n_max: int | None = None, frame: Frame | None = None,
                     strict: bool = True) -> PerturbativeResult:
    """``-d^2 lambda/d delta^2`` at zero deformation from the same recursion.

    The deformed generator is exactly linear in ``delta``.
    """
    frame = gaussian_frame(params) if frame is None else frame

    def run(n):
        n = default_n_max(params, frame) if n is None else n
        G0 = build_qfi_generator(params, 0.0, n, frame).matrix
        G1 = (build_qfi_generator(params, 1.0, n, frame).matrix - G0).tocsr()
        zero = sp.csr_matrix(G0.shape, dtype=complex)
        lam, guard = _eigen_derivatives(G0, lambda m: G1 if m == 1 else zero, 2, n)
        return PerturbativeResult([-lam[1].real], n, guard)

    return _with_growth(run, n_max, strict)
