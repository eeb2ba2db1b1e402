"""Exact evolution U(s) = exp(-iHs) from the cached spectrum, plus a delta_1 noise model."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dilation import DilationHamiltonian
from .errors import InvalidPerturbation, ShapeError

CHUNK = 2048


@dataclass(frozen=True, eq=False)
class EvolvedState:
    vector: np.ndarray
    s: float


def _check(dil: DilationHamiltonian, psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    if psi.shape[0] != dil.dim:
        raise ShapeError(f"state has length {psi.shape[0]}, dilation has dimension {dil.dim}")
    return psi


def evolve(dil: DilationHamiltonian, s: float, psi) -> EvolvedState:
    psi = _check(dil, psi)
    V = dil.eigenvectors
    out = V @ (np.exp(-1j * dil.eigenvalues * s) * (V.conj().T @ psi))
    return EvolvedState(out, float(s))


def evolve_batch(dil: DilationHamiltonian, nodes, psi) -> list:
    psi = _check(dil, psi)
    V = dil.eigenvectors
    coef = V.conj().T @ psi
    nodes = np.asarray(nodes, dtype=float).ravel()
    phases = np.exp(-1j * np.outer(nodes, dil.eigenvalues))
    states = (phases * coef[None, :]) @ V.T
    return [EvolvedState(states[j], float(s)) for j, s in enumerate(nodes)]


def spectral_filter(eigenvalues, nodes, weights) -> np.ndarray:
    """sum_j weights_j exp(-i lambda s_j) for every eigenvalue lambda, in node chunks."""
    lam = np.asarray(eigenvalues, dtype=float)
    nodes = np.asarray(nodes, dtype=float)
    weights = np.asarray(weights, dtype=complex)
    out = np.zeros(lam.shape[0], dtype=complex)
    for k in range(0, nodes.shape[0], CHUNK):
        s = nodes[k:k + CHUNK]
        out += weights[k:k + CHUNK] @ np.exp(-1j * np.outer(s, lam))
    return out


def weighted_sum(dil: DilationHamiltonian, nodes, weights, psi) -> np.ndarray:
    """sum_j weights_j U(s_j) psi through one spectral filter."""
    psi = _check(dil, psi)
    return dil.apply_function(spectral_filter(dil.eigenvalues, nodes, weights), psi)


def _generator(seed, counter: int):
    key = int(seed) & (2**64 - 1)
    return np.random.Generator(np.random.Philox(key=key, counter=int(counter)))


def random_near_identity(n: int, delta1: float, seed, counter: int = 0) -> np.ndarray:
    """Cayley transform (I - iK)(I + iK)^{-1} of a Hermitian K scaled so |V - I| = delta1."""
    if not 0 <= delta1 < 1:
        raise InvalidPerturbation(f"delta1 must lie in [0, 1), got {delta1}")
    if delta1 == 0:
        return np.eye(n, dtype=complex)
    rng = _generator(seed, counter)
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    K = 0.5 * (G + G.conj().T)
    k = delta1 / np.sqrt(4.0 - delta1 * delta1)
    K *= k / np.linalg.norm(K, 2)
    I = np.eye(n)
    return np.linalg.solve((I + 1j * K).T, (I - 1j * K).T).T


def perturbed_evolve(dil: DilationHamiltonian, s: float, psi, delta1: float, seed,
                     counter: int = 0) -> EvolvedState:
    """V U(s) psi with a reproducible unitary V, |V - I| = delta1."""
    if not 0 <= delta1 < 1:
        raise InvalidPerturbation(f"delta1 must lie in [0, 1), got {delta1}")
    base = evolve(dil, s, psi)
    if delta1 == 0:
        return base
    V = random_near_identity(dil.dim, delta1, seed, counter)
    return EvolvedState(V @ base.vector, float(s))
