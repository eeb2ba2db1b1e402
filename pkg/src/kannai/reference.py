"""Classical oracles: spectral semigroup, Crank-Nicolson marching, wave Duhamel check, direct solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, linalg

from .dilation import DilationHamiltonian
from .errors import InvalidOperator, InvalidTime, ShapeError, SingularSystem, UnstableMarch
from .operators import TimeProfile


def _hermitian(A) -> np.ndarray:
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    if A.shape[0] != A.shape[1]:
        raise ShapeError("operator must be square")
    scale = max(np.linalg.norm(A, 2), 1e-300)
    if np.linalg.norm(A - A.conj().T, 2) > 1e-12 * scale:
        raise InvalidOperator("operator is not Hermitian")
    return 0.5 * (A + A.conj().T)


def phi(T, lam):
    """(1 - e^{-lam T}) / lam, equal to T at lam = 0."""
    lam = np.asarray(lam, dtype=float)
    out = np.full(lam.shape, float(T))
    nz = lam != 0
    out[nz] = -np.expm1(-lam[nz] * T) / lam[nz]
    return out


@dataclass(frozen=True, eq=False)
class SemigroupOracle:
    A: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_matrix(cls, A) -> "SemigroupOracle":
        A = _hermitian(A)
        lam, V = np.linalg.eigh(A)
        scale = max(float(np.max(np.abs(lam))), 1e-300)
        if lam.min() < -1e-10 * scale:
            raise InvalidOperator(f"operator has negative eigenvalue {lam.min():.3e}")
        return cls(A, lam, V)

    @property
    def spectral_gap(self) -> float:
        return float(self.eigenvalues.min())

    def solve(self, u0, f, T) -> np.ndarray:
        if not T >= 0:
            raise InvalidTime(f"T must be nonnegative, got {T}")
        V, lam = self.eigenvectors, np.clip(self.eigenvalues, 0.0, None)
        u0 = np.asarray(u0, dtype=complex).ravel()
        f = np.zeros_like(u0) if f is None else np.asarray(f, dtype=complex).ravel()
        if u0.shape[0] != V.shape[0] or f.shape[0] != V.shape[0]:
            raise ShapeError("vector length does not match the operator")
        a = V.conj().T @ u0
        b = V.conj().T @ f
        return V @ (np.exp(-lam * T) * a + phi(T, lam) * b)


def semigroup_solution(A, u0, f, T) -> np.ndarray:
    """e^{-AT} u0 + phi_T(A) f, valid on zero modes."""
    return SemigroupOracle.from_matrix(A).solve(u0, f, T)


def fd_time_march(A, u0, f, T, dt, scheme: str = "cn") -> np.ndarray:
    """Crank-Nicolson (default) or explicit Euler for u' = -Au + f."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    u = np.asarray(u0, dtype=complex).ravel().copy()
    f = np.zeros_like(u) if f is None else np.asarray(f, dtype=complex).ravel()
    if not (T > 0 and dt > 0):
        raise InvalidTime("T and dt must be positive")
    steps = max(1, int(round(T / dt)))
    dt = T / steps
    n = u.shape[0]
    I = np.eye(n)
    limit = 10.0 * (np.linalg.norm(u) + T * np.linalg.norm(f)) + 1e-300
    if scheme == "cn":
        lu = linalg.lu_factor(I + 0.5 * dt * A)
        B = I - 0.5 * dt * A
        rhs_f = dt * f
        step = lambda v: linalg.lu_solve(lu, B @ v + rhs_f)
    elif scheme == "explicit":
        step = lambda v: v - dt * (A @ v) + dt * f
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    for _ in range(steps):
        u = step(u)
        if not np.isfinite(u).all() or np.linalg.norm(u) > limit:
            raise UnstableMarch(f"norm grew beyond {limit:.3e} with dt={dt:.3e}")
    return u


def duhamel_evolution(dil: DilationHamiltonian, psi0, b, time_profile, s) -> np.ndarray:
    """U(s) psi0 + (int_0^s rho(s - sigma) U(sigma) d sigma) b in closed spectral form."""
    lam = dil.eigenvalues
    V = dil.eigenvectors
    x = -1j * lam * s
    small = np.abs(x) < 1e-8
    xs = np.where(small, 1.0, x)
    if time_profile == TimeProfile.ConstantInS:
        # int_0^s e^{-i lam sigma} d sigma = s (e^x - 1)/x
        g = np.where(small, s * (1 + x / 2), s * np.expm1(xs) / xs)
    else:
        # int_0^s (s - sigma) e^{-i lam sigma} d sigma = s^2 (e^x - 1 - x)/x^2
        g = np.where(small, s * s * (0.5 + x / 6), s * s * (np.expm1(xs) - xs) / (xs * xs))
    a = V.conj().T @ np.asarray(psi0, dtype=complex)
    c = V.conj().T @ np.asarray(b, dtype=complex)
    return V @ (np.exp(x) * a + g * c)


def wave_duhamel_check(dil: DilationHamiltonian, psi0, b, time_profile, s) -> float:
    """Integrate psi' = -iH psi + rho(s) b with DOP853 and compare to the Duhamel formula."""
    H = dil.H
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    b = np.zeros_like(psi0) if b is None else np.asarray(b, dtype=complex).ravel()
    rho = (lambda t: 1.0) if time_profile == TimeProfile.ConstantInS else (lambda t: t)
    n = psi0.shape[0]

    def rhs(t, y):
        z = y[:n] + 1j * y[n:]
        dz = -1j * (H @ z) + rho(t) * b
        return np.concatenate([dz.real, dz.imag])

    y0 = np.concatenate([psi0.real, psi0.imag])
    if s == 0:
        y = y0
    else:
        sol = integrate.solve_ivp(rhs, (0.0, s), y0, method="DOP853", rtol=1e-13, atol=1e-14)
        if not sol.success:
            raise UnstableMarch(sol.message)
        y = sol.y[:, -1]
    z = y[:n] + 1j * y[n:]
    return float(np.linalg.norm(z - duhamel_evolution(dil, psi0, b, time_profile, s)))


def direct_solve(A, b) -> np.ndarray:
    A = _hermitian(A)
    b = np.asarray(b, dtype=complex).ravel()
    lam = np.linalg.eigvalsh(A)
    if lam.max() <= 0 or lam.min() <= 1e-12 * lam.max():
        raise SingularSystem(f"operator is singular or indefinite (min eigenvalue {lam.min():.3e})")
    try:
        cf = linalg.cho_factor(A)
    except linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from None
    x = linalg.cho_solve(cf, b)
    if np.linalg.norm(A @ x - b) > 1e-10 * max(np.linalg.norm(b), 1e-300):
        raise SingularSystem("direct solve residual too large")
    return x
