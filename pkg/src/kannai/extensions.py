"""Extensions of the core pipeline: non-Hermitian generators, steady states and linear
solves, Euler-Poisson-Darboux transmutation, transport averaging and Hopf-Cole recovery."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg, special

from .dilation import hermitian_dilation
from .errors import (InvalidTime, LogDomainError, NoSpectralGap, NotDissipative, NotNormal,
                     ShapeError, SingularSystem, UnsupportedDimension)
from .operators import DiscreteFactor, custom_factor, fourier_indices, source_forcing
from .pipeline import QueryCount, SimulationProblem, SimulationReport, TheoremGL, run
from .propagator import spectral_filter
from .quadrature import coefficients, theorem_plan
from .reference import SemigroupOracle, direct_solve


def _norm2(M) -> float:
    return float(np.linalg.norm(M, 2)) if np.size(M) else 0.0


@dataclass(frozen=True, eq=False)
class CartesianPair:
    H1: np.ndarray
    H2: np.ndarray
    L_fac: np.ndarray
    commutator_constant: float
    normal: bool

    @property
    def A(self) -> np.ndarray:
        return self.H1 + 1j * self.H2


def hermitian_sqrt_factor(H1) -> np.ndarray:
    """L with L^dagger L = H1: Cholesky when definite, spectral square root otherwise."""
    H1 = np.asarray(H1, dtype=complex)
    lam, V = np.linalg.eigh(H1)
    scale = max(float(np.max(np.abs(lam))), 1e-300)
    if lam.min() > 1e-10 * scale:
        C = linalg.cholesky(H1, lower=True)
        return C.conj().T
    return np.sqrt(np.clip(lam, 0.0, None))[:, None] * V.conj().T


def cartesian_split(A) -> CartesianPair:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.shape[0] != A.shape[1]:
        raise ShapeError("generator must be square")
    H1 = 0.5 * (A + A.conj().T)
    H2 = (A - A.conj().T) / 2j
    H2 = 0.5 * (H2 + H2.conj().T)
    lam = np.linalg.eigvalsh(H1)
    scale = max(_norm2(A), 1e-300)
    if lam.min() < -1e-10 * scale:
        raise NotDissipative(f"Hermitian part has eigenvalue {lam.min():.3e}")
    L = hermitian_sqrt_factor(H1)
    c12 = H1 @ H2 - H2 @ H1
    n1, n2 = _norm2(H1), _norm2(H2)
    normal = n1 == 0 or n2 == 0 or _norm2(c12) <= 1e-10 * n1 * n2
    lam_c = _norm2(H2 @ (H2 @ H1 - H1 @ H2) - (H2 @ H1 - H1 @ H2) @ H2) \
        + _norm2(H1 @ c12 - c12 @ H1)
    return CartesianPair(H1, H2, L, lam_c, bool(normal))


def _unitary_part(H2, t) -> np.ndarray:
    lam, V = np.linalg.eigh(H2)
    return (V * np.exp(-1j * lam * t)) @ V.conj().T


def simulate_normal(pair: CartesianPair, u0, T: float, eps: float) -> np.ndarray:
    """e^{-AT} u0 = e^{-H1 T} e^{-i H2 T} u0: exact unitary part, Kannai pipeline for H1."""
    if not pair.normal:
        raise NotNormal("H1 and H2 do not commute")
    v = _unitary_part(pair.H2, T) @ np.asarray(u0, dtype=complex)
    if not np.any(v):
        return v
    factor = custom_factor(pair.L_fac)
    rep = run(SimulationProblem(factor, v, None, T, eps))
    return rep.u_h


def kannai_step_matrix(L_fac, tau: float, eps_step: float) -> np.ndarray:
    """Projected LCU operator sum_j c_j Pi_1 U(s_j) E_1 approximating e^{-L^dagger L tau}."""
    factor = custom_factor(L_fac)
    dil = hermitian_dilation(factor)
    plan = theorem_plan(tau, dil.norm, eps_step)
    co = coefficients(plan, tau)
    filt = spectral_filter(dil.eigenvalues, plan.nodes, co.c)
    n = factor.n_w
    return dil.function(filt)[:n, :n]


@dataclass(frozen=True, eq=False)
class StrangResult:
    state: np.ndarray
    normalized: np.ndarray
    error: float
    normalized_error: float
    tau: float
    steps: int


def strang_simulate(pair: CartesianPair, u0, T: float, N_t: int, eps_step: float) -> StrangResult:
    """(e^{-iH2 tau/2} e^{-H1 tau} e^{-iH2 tau/2})^{N_t} with the middle factor from the LCU sum.

    The success branch is renormalized after every step and the norm tracked
    separately, mirroring per-step postselection.
    """
    N_t = int(N_t)
    if N_t < 1:
        raise ValueError("N_t must be at least 1")
    if not T > 0:
        raise InvalidTime("T must be positive")
    u0 = np.asarray(u0, dtype=complex).ravel()
    tau = T / N_t
    half = _unitary_part(pair.H2, tau / 2)
    if _norm2(pair.H1) > 0:
        K = kannai_step_matrix(pair.L_fac, tau, eps_step)
    else:
        K = np.eye(u0.shape[0])
    step = half @ K @ half
    u = u0 / np.linalg.norm(u0)
    log_scale = math.log(np.linalg.norm(u0))
    for _ in range(N_t):
        u = step @ u
        nu = np.linalg.norm(u)
        log_scale += math.log(nu)
        u = u / nu
    state = u * math.exp(log_scale)
    ref = linalg.expm(-pair.A * T) @ u0
    err = float(np.linalg.norm(state - ref) / np.linalg.norm(ref))
    nerr = float(np.linalg.norm(u - ref / np.linalg.norm(ref)))
    return StrangResult(state, u, err, nerr, tau, N_t)


@dataclass(frozen=True, eq=False)
class SteadyResult:
    x: np.ndarray
    T_tilde: float
    lambda0: float
    C: float
    report: Optional[SimulationReport]


def longtime_steady(factor: DiscreteFactor, f, eps: float, C: Optional[float] = None,
                    budget: float = 0.01) -> SteadyResult:
    """Approximate A^{-1} f by u(T~) with u0 = 0 and T~ = log(C/eps)/lambda0.

    eps is an absolute accuracy; the LCU part is run so that its own error
    stays below budget * eps. C must be at least |A^{-1} f|; the default
    |A^{-1} f| / (1 - budget) leaves that share of eps to the LCU run.
    """
    f = np.asarray(f, dtype=complex).ravel()
    A = factor.A
    oracle = SemigroupOracle.from_matrix(A)
    lam = oracle.eigenvalues
    lam0 = float(lam.min())
    if lam0 <= 1e-12 * max(float(lam.max()), 1e-300):
        raise NoSpectralGap(f"smallest eigenvalue {lam0:.3e}")
    if not np.any(f):
        return SteadyResult(np.zeros_like(f), 0.0, lam0, 0.0 if C is None else C, None)
    x_star = direct_solve(A, f)
    if C is None:
        C = float(np.linalg.norm(x_star)) / (1.0 - budget)
    T_tilde = max(math.log(C / eps), 0.0) / lam0
    if T_tilde == 0.0:
        return SteadyResult(np.zeros_like(f), 0.0, lam0, C, None)
    eps_run = min(0.5, 8.0 * budget * eps / C)
    problem = SimulationProblem(factor, np.zeros(factor.n_w), source_forcing(factor, f), T_tilde, eps_run)
    rep = run(problem, TheoremGL())
    return SteadyResult(rep.u_h, T_tilde, lam0, C, rep)


@dataclass(frozen=True, eq=False)
class LinearSolveResult:
    x_out: np.ndarray
    x_direct: np.ndarray
    rel_error: float
    kappa: float
    T_tilde: float
    alpha: float
    queries: QueryCount


def worst_case_rhs(factor: DiscreteFactor) -> np.ndarray:
    """Unit eigenvector of the largest eigenvalue of A.

    It minimizes |A^{-1} b| / |b|, so the output norm is smallest relative to
    the forcing and the repetition factor g is largest.
    """
    lam, V = np.linalg.eigh(factor.A)
    v = V[:, -1]
    k = int(np.argmax(np.abs(v)))
    return v * (abs(v[k]) / v[k])


def linear_solve_kannai(factor: DiscreteFactor, b, eps: float) -> LinearSolveResult:
    """Solve (L^dagger L) x = b through the normalized steady state.

    With alpha = |L|^2 the normalized system has lambda0 = 1/kappa; the target
    is relative accuracy eps, i.e. absolute eps |x|. With the default C this
    gives T~ = kappa log(1/((1 - budget) eps)).
    """
    b = np.asarray(b, dtype=complex).ravel()
    A = factor.A
    lam = np.linalg.eigvalsh(A)
    if lam.min() <= 1e-12 * lam.max():
        raise SingularSystem("A = L^dagger L is not positive definite")
    x_direct = direct_solve(A, b)
    alpha = factor.spectral_norm ** 2
    kappa = float(lam.max() / lam.min())
    scaled = custom_factor(np.asarray(factor.matrix) / math.sqrt(alpha))
    xn = float(np.linalg.norm(x_direct))
    res = longtime_steady(scaled, b / alpha, eps * xn)
    rel = float(np.linalg.norm(res.x - x_direct) / xn)
    return LinearSolveResult(res.x, x_direct, rel, kappa, res.T_tilde, alpha, res.report.queries)


def epd_constant(d: int) -> float:
    return math.gamma(d / 2) / (math.sqrt(math.pi) * math.gamma((d - 1) / 2))


def epd_rule(d: int, n: int):
    """Nodes and weights for int_{-1}^{1} g(l) (1 - l^2)^{(d-3)/2} dl."""
    if d == 2:
        j = np.arange(1, n + 1)
        return np.cos((2 * j - 1) * np.pi / (2 * n)), np.full(n, np.pi / n)
    if d % 2 == 1:
        x, w = np.polynomial.legendre.leggauss(n)
        return x, w * (1.0 - x * x) ** ((d - 3) // 2)
    a = (d - 3) / 2.0
    x, w = special.roots_jacobi(n, a, a)
    return x, w


def epd_solve(factor, u0, t: float, d: int, n_nodes: Optional[int] = None) -> np.ndarray:
    """u(t) = c_d int_{-1}^{1} w(l t) (1 - l^2)^{(d-3)/2} dl with w the wave solution from (u0, 0)."""
    d = int(d)
    if d < 2:
        raise UnsupportedDimension(f"EPD transmutation needs d >= 2, got {d}")
    if not t >= 0:
        raise InvalidTime("t must be nonnegative")
    factor = factor if isinstance(factor, DiscreteFactor) else custom_factor(factor)
    u0 = np.asarray(u0, dtype=complex).ravel()
    dil = hermitian_dilation(factor)
    if n_nodes is None:
        n_nodes = int(math.ceil(dil.norm * t)) + 32
    x, w = epd_rule(d, n_nodes)
    filt = epd_constant(d) * spectral_filter(dil.eigenvalues, x * t, w)
    psi = np.zeros(dil.dim, dtype=complex)
    psi[: factor.n_w] = u0
    return dil.apply_function(filt, psi)[: factor.n_w]


def epd_bessel_reference(A, u0, t: float, d: int) -> np.ndarray:
    """Gamma(d/2) (2/z)^{d/2-1} J_{d/2-1}(z), z = sqrt(lambda) t, applied spectrally."""
    oracle = SemigroupOracle.from_matrix(A)
    nu = d / 2.0 - 1.0
    z = np.sqrt(np.clip(oracle.eigenvalues, 0.0, None)) * t
    vals = np.ones_like(z)
    nz = z > 1e-8
    vals[nz] = math.gamma(d / 2.0) * (2.0 / z[nz]) ** nu * special.jv(nu, z[nz])
    V = oracle.eigenvectors
    return V @ (vals * (V.conj().T @ np.asarray(u0, dtype=complex)))


@dataclass(frozen=True)
class HermitePlan:
    nodes: np.ndarray
    weights: np.ndarray
    substeps: int
    R_alpha: float


def hermite_plan(T: float, k_max: float, n_nodes: int = 60) -> HermitePlan:
    """Gauss-Hermite rule for E[g(alpha)], alpha ~ N(0, 1), plus the number of time
    sub-steps keeping each sub-step frequency 2 pi k sqrt(2T/m) inside the resolved band."""
    if T < 0:
        raise InvalidTime("T must be nonnegative")
    x, w = np.polynomial.hermite_e.hermegauss(int(n_nodes))
    w = w / math.sqrt(2 * math.pi)
    omega = 2 * math.pi * abs(k_max) * math.sqrt(2 * T)
    omega_safe = 0.75 * math.sqrt(n_nodes)
    m = max(1, math.ceil((omega / omega_safe) ** 2))
    return HermitePlan(x, w, m, float(np.max(np.abs(x))))


def transport_multiplier(k, T: float, n_nodes: int = 60) -> np.ndarray:
    """E[exp(-2 pi i k . alpha sqrt(2T))] per mode, averaged axis by axis."""
    k = np.atleast_1d(np.asarray(k, dtype=float))
    if k.ndim == 1:
        k = k[:, None]
    plan = hermite_plan(T, float(np.max(np.abs(k))) if k.size else 0.0, n_nodes)
    m = plan.substeps
    out = np.ones(k.shape[0], dtype=complex)
    for r in range(k.shape[1]):
        om = 2 * math.pi * k[:, r] * math.sqrt(2 * T / m)
        avg = np.exp(-1j * np.outer(om, plan.nodes)) @ plan.weights
        out *= avg ** m
    return out


def transport_heat_average(y0_hat, T: float, d: Optional[int] = None, n_nodes: int = 60) -> np.ndarray:
    """Apply the averaged transport to Fourier coefficients laid out as np.fft.fftn output."""
    y = np.asarray(y0_hat, dtype=complex)
    d = y.ndim if d is None else int(d)
    if y.ndim != d:
        raise ShapeError(f"coefficients have {y.ndim} axes, expected {d}")
    ks = [fourier_indices(n) for n in y.shape]
    grids = np.meshgrid(*ks, indexing="ij")
    kk = np.stack([g.ravel() for g in grids], axis=1)
    mult = transport_multiplier(kk, T, n_nodes).reshape(y.shape)
    return y * mult


def translate_periodic(u, shift) -> np.ndarray:
    """u(x + shift) on a periodic unit-cell grid via the Fourier shift theorem."""
    u = np.asarray(u)
    shift = np.broadcast_to(np.asarray(shift, dtype=float), (u.ndim,))
    uh = np.fft.fftn(u)
    phase = np.ones(u.shape, dtype=complex)
    for ax, n in enumerate(u.shape):
        k = fourier_indices(n)
        shape = [1] * u.ndim
        shape[ax] = n
        phase = phase * np.exp(2j * math.pi * k * shift[ax]).reshape(shape)
    out = np.fft.ifftn(uh * phase)
    return out.real if np.isrealobj(u) else out


def hopf_cole_recover(u, nu: float, shift=None) -> np.ndarray:
    """S = -2 nu log u, optionally after removing a drift by a periodic translation."""
    u = np.asarray(u)
    if shift is not None:
        u = translate_periodic(u, shift)
    if np.iscomplexobj(u):
        if np.max(np.abs(u.imag)) > 1e-10 * max(np.max(np.abs(u)), 1e-300):
            raise LogDomainError("field has a nonzero imaginary part")
        u = u.real
    if np.any(~(u > 0)):
        raise LogDomainError("Hopf-Cole recovery needs a strictly positive field")
    return -2.0 * nu * np.log(u)
