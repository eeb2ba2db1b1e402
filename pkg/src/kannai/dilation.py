"""Hermitian dilation H = i [[0, L^dagger], [-L, 0]] and explicit block-encoding unitaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (DegenerateSelector, NormalizationTooSmall, NumericalBreakdown,
                     ShapeError)
from .operators import DiscreteFactor, check_size, custom_factor

BLOCKENC_MAX_N = 64


@dataclass(frozen=True, eq=False)
class DilationHamiltonian:
    """H on the stacked layout (w: columns of L, then v: rows of L)."""

    H: np.ndarray
    L_ref: DiscreteFactor
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def n_w(self) -> int:
        return self.L_ref.n_w

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0

    def function(self, values) -> np.ndarray:
        """Matrix V diag(values) V^dagger for per-eigenvalue values."""
        V = self.eigenvectors
        return (V * np.asarray(values)[None, :]) @ V.conj().T

    def apply_function(self, values, psi) -> np.ndarray:
        V = self.eigenvectors
        return V @ (np.asarray(values) * (V.conj().T @ psi))


def dilation_matrix(L) -> np.ndarray:
    L = np.atleast_2d(np.asarray(L, dtype=complex))
    r, c = L.shape
    H = np.zeros((c + r, c + r), dtype=complex)
    H[:c, c:] = 1j * L.conj().T
    H[c:, :c] = -1j * L
    return H


def hermitian_dilation(L) -> DilationHamiltonian:
    factor = L if isinstance(L, DiscreteFactor) else custom_factor(L)
    check_size(factor.n_w + factor.n_v, "dilation")
    H = dilation_matrix(factor.matrix)
    try:
        lam, V = np.linalg.eigh(H)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"eigensolve failed: {exc}") from None
    scale = max(1.0, float(np.max(np.abs(lam))) if lam.size else 1.0)
    resid = np.linalg.norm((V * lam) @ V.conj().T - H) / scale
    if not np.isfinite(resid) or resid > 1e-10:
        raise NumericalBreakdown(f"eigendecomposition residual {resid:.3e}")
    H.setflags(write=False)
    return DilationHamiltonian(H, factor, lam, V)


def pad_to_square(L) -> np.ndarray:
    L = np.atleast_2d(np.asarray(L, dtype=complex))
    n = max(L.shape)
    out = np.zeros((n, n), dtype=complex)
    out[: L.shape[0], : L.shape[1]] = L
    return out


def padded_dilation_matrix(L) -> np.ndarray:
    """H built from the zero-padded square L, in the (position qubit, system) ordering."""
    Ls = pad_to_square(L)
    n = Ls.shape[0]
    H = np.zeros((2 * n, 2 * n), dtype=complex)
    H[:n, n:] = 1j * Ls.conj().T
    H[n:, :n] = -1j * Ls
    return H


@dataclass(frozen=True, eq=False)
class BlockEncoding:
    """unitary acts on (ancillas, system) with the ancilla register most significant."""

    unitary: np.ndarray
    ancilla_count: int
    normalization: float
    target: np.ndarray

    @property
    def system_dim(self) -> int:
        return self.unitary.shape[0] >> self.ancilla_count

    def block(self) -> np.ndarray:
        n = self.system_dim
        return self.unitary[:n, :n]

    def block_residual(self) -> float:
        return float(np.linalg.norm(self.block() - self.target / self.normalization, 2))

    def unitarity_residual(self) -> float:
        U = self.unitary
        return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2))


def unitary_completion(L, alpha: float) -> BlockEncoding:
    """One-ancilla unitary [[B, (I-BB^)^{1/2}], [(I-B^B)^{1/2}, -B^]] with B = L/alpha."""
    L = np.atleast_2d(np.asarray(L.matrix if isinstance(L, DiscreteFactor) else L, dtype=complex))
    Ls = pad_to_square(L)
    n = Ls.shape[0]
    if n > BLOCKENC_MAX_N:
        raise ShapeError(f"explicit block-encodings are limited to N <= {BLOCKENC_MAX_N}")
    norm = float(np.linalg.norm(Ls, 2))
    if not alpha > 0 or alpha < norm * (1 - 1e-12):
        raise NormalizationTooSmall(f"alpha={alpha} below |L|={norm}")
    B = Ls / alpha
    W, s, Vh = np.linalg.svd(B)
    c = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    top = (W * c) @ W.conj().T
    bottom = (Vh.conj().T * c) @ Vh
    U = np.block([[B, top], [bottom, -B.conj().T]])
    return BlockEncoding(U, 1, float(alpha), Ls)


_P = np.diag([1.0, 1j])


def build_ham_h(be_L: BlockEncoding) -> BlockEncoding:
    """Block-encoding of H from one of L.

    W encodes |0><1| (x) L^dagger + |1><0| (x) L through a position qubit p,
    then conjugation by the phase P = diag(1, i) on p gives H:
    P^dagger Ht0 P = H. An idle ancilla is prepended so a_H = a_L + 1.
    """
    U = be_L.unitary
    a = be_L.ancilla_count
    A = 1 << a
    n = be_L.system_dim
    # controlled-U on ordering (p, anc, sys): |0><0| (x) U + |1><1| (x) U^dagger, then X on p
    C = np.zeros((2 * A * n, 2 * A * n), dtype=complex)
    C[: A * n, A * n:] = U.conj().T
    C[A * n:, : A * n] = U
    # reorder (p, anc, sys) -> (anc, p, sys)
    C = C.reshape(2, A, n, 2, A, n).transpose(1, 0, 2, 4, 3, 5).reshape(2 * A * n, 2 * A * n)
    P = np.kron(np.eye(A), np.kron(_P, np.eye(n)))
    W = P.conj().T @ C @ P
    full = np.kron(np.eye(2), W)
    Ls = be_L.target
    Ht0 = np.zeros((2 * n, 2 * n), dtype=complex)
    Ht0[:n, n:] = Ls.conj().T
    Ht0[n:, :n] = Ls
    Pn = np.kron(_P, np.eye(n))
    H = Pn.conj().T @ Ht0 @ Pn
    return BlockEncoding(full, a + 1, be_L.normalization, H)


def phase_conjugation_residual(L) -> float:
    """|| P^dagger Ht0 P - H || for the padded dilation of L."""
    Ls = pad_to_square(L)
    n = Ls.shape[0]
    Ht0 = np.zeros((2 * n, 2 * n), dtype=complex)
    Ht0[:n, n:] = Ls.conj().T
    Ht0[n:, :n] = Ls
    Pn = np.kron(_P, np.eye(n))
    return float(np.linalg.norm(Pn.conj().T @ Ht0 @ Pn - padded_dilation_matrix(L), 2))


def build_selector_blockenc(nodes, be_H: BlockEncoding) -> BlockEncoding:
    """Block-encoding of H_S = sum_j s_j |j><j| (x) H with normalization alpha_H s_max.

    Per node, O_R prepares sqrt|g_j| e^{i theta_j}|0> + sqrt(1-|g_j|)|1> on the
    gamma ancilla, g_j = s_j / s_max, theta_j in {0, pi}. The gamma = 0 branch
    applies HAM_H; the gamma = 1 branch flips the first HAM_H ancilla so its
    projected block vanishes. O_L prepares the same state without the phase.
    """
    s = np.asarray(nodes, dtype=float).ravel()
    M = s.shape[0]
    if M < 1:
        raise DegenerateSelector("selector needs at least one node")
    s_max = float(np.max(np.abs(s)))
    if s_max == 0.0:
        raise DegenerateSelector("all selector nodes are zero")
    U = be_H.unitary
    a = be_H.ancilla_count
    if a < 1:
        raise ShapeError("HAM_H must carry at least one ancilla")
    D = U.shape[0]
    n = be_H.system_dim
    check_size(2 * D * M, "selector unitary")
    flip = np.kron(np.array([[0.0, 1.0], [1.0, 0.0]]), np.eye(D // 2))
    ctrl = np.zeros((2 * D, 2 * D), dtype=complex)
    ctrl[:D, :D] = U
    ctrl[D:, D:] = flip
    g = s / s_max
    amp = np.sqrt(np.abs(g))
    rest = np.sqrt(np.clip(1.0 - np.abs(g), 0.0, None))
    # blocks indexed by j; each acts on (gamma, anc, sys)
    dim = 2 * D * M
    big = np.zeros((M, 2 * D, M, 2 * D), dtype=complex)
    eyeD = np.eye(D)
    for j in range(M):
        if g[j] < 0:
            OR = np.array([[-amp[j], rest[j]], [rest[j], amp[j]]], dtype=complex)
        else:
            OR = np.array([[amp[j], -rest[j]], [rest[j], amp[j]]], dtype=complex)
        OL = np.array([[amp[j], -rest[j]], [rest[j], amp[j]]], dtype=complex)
        big[j, :, j, :] = np.kron(OL.conj().T, eyeD) @ ctrl @ np.kron(OR, eyeD)
    # reorder (j, gamma, anc, sys) -> (gamma, anc, j, sys) so ancillas lead
    A = D // n
    big = big.reshape(M, 2, A, n, M, 2, A, n).transpose(1, 2, 0, 3, 5, 6, 4, 7).reshape(dim, dim)
    target = np.kron(np.diag(s), be_H.target)
    return BlockEncoding(big, a + 1, be_H.normalization * s_max, target)


def embed_padded(dil: DilationHamiltonian) -> np.ndarray:
    """Map the unpadded stacked H into the padded (p, system) layout."""
    r, c = dil.L_ref.n_v, dil.L_ref.n_w
    n = max(r, c)
    idx = np.concatenate([np.arange(c), n + np.arange(r)])
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    out[np.ix_(idx, idx)] = dil.H
    return out
