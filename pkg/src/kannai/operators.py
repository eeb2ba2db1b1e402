"""Discrete factors L (A = L^dagger L) and forcing vectors for the supported PDEs."""

from __future__ import annotations

import enum
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateGrid, ShapeError, SizeLimit, UnsupportedGrid

DEFAULT_SIZE_CAP = 2**14


def size_cap() -> int:
    """Dense-dimension cap, overridable through KANNAI_SIZE_CAP."""
    raw = os.environ.get("KANNAI_SIZE_CAP")
    if raw is None or raw.strip() == "":
        return DEFAULT_SIZE_CAP
    try:
        cap = int(raw)
    except ValueError:
        raise SizeLimit(f"KANNAI_SIZE_CAP must be an integer, got {raw!r}") from None
    if cap < 1:
        raise SizeLimit("KANNAI_SIZE_CAP must be positive")
    return cap


def check_size(n: int, what: str = "matrix") -> None:
    cap = size_cap()
    if n > cap:
        raise SizeLimit(f"{what} dimension {n} exceeds the dense cap {cap}")


class FactorKind(enum.Enum):
    HeatDirichlet = "heat-dirichlet"
    HeatNeumann = "heat-neumann"
    Biharmonic = "biharmonic"
    HJFourier = "hj-fourier"
    Custom = "custom"


class Slot(enum.Enum):
    WSlot = "w"
    VSlot = "v"


class TimeProfile(enum.Enum):
    LinearInS = "linear"
    ConstantInS = "constant"


@dataclass(frozen=True)
class Grid:
    d: int
    n_cells: int
    h: float


@dataclass(frozen=True, eq=False)
class DiscreteFactor:
    """L together with its grid metadata; rows index v, columns index w."""

    matrix: np.ndarray
    grid: Grid
    kind: FactorKind
    spectral_norm: float = field(default=-1.0)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.size == 0:
            raise ShapeError("factor matrix must be a nonempty 2D array")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        if self.spectral_norm < 0:
            object.__setattr__(self, "spectral_norm", operator_norm(m))

    @property
    def n_w(self) -> int:
        return self.matrix.shape[1]

    @property
    def n_v(self) -> int:
        return self.matrix.shape[0]

    @property
    def A(self) -> np.ndarray:
        L = self.matrix
        A = L.conj().T @ L
        return 0.5 * (A + A.conj().T)


@dataclass(frozen=True, eq=False)
class ForcingVector:
    """Forcing on the stacked (w, v) layout."""

    values: np.ndarray
    slot: Slot = Slot.WSlot
    time_profile: TimeProfile = TimeProfile.LinearInS

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex).ravel()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


def operator_norm(L) -> float:
    L = np.asarray(L)
    if L.size == 0:
        raise ShapeError("operator_norm of an empty matrix")
    if L.ndim == 1:
        L = L.reshape(-1, 1)
    return float(np.linalg.norm(L, 2))


def _check_cells(n_cells: int) -> int:
    n = int(n_cells)
    if n != n_cells or n < 2:
        raise DegenerateGrid(f"need at least 2 cells, got {n_cells}")
    return n


def build_heat_gradient_1d(n_cells: int) -> DiscreteFactor:
    """Staggered gradient for Dirichlet heat: w on interior nodes, v on faces.

    (L w)_{i+1/2} = -(w_{i+1} - w_i)/h with w_0 = w_N = 0, shape N x (N-1).
    """
    n = _check_cells(n_cells)
    h = 1.0 / n
    L = np.zeros((n, n - 1))
    idx = np.arange(n - 1)
    L[idx, idx] = -1.0 / h
    L[idx + 1, idx] = 1.0 / h
    return DiscreteFactor(L, Grid(1, n, h), FactorKind.HeatDirichlet)


def build_heat_neumann_1d(n_cells: int) -> DiscreteFactor:
    """Neumann variant: w at cell centers, v at interior nodes (zero boundary flux)."""
    n = _check_cells(n_cells)
    h = 1.0 / n
    L = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    L[idx, idx] = 1.0 / h
    L[idx, idx + 1] = -1.0 / h
    return DiscreteFactor(L, Grid(1, n, h), FactorKind.HeatNeumann)


def build_biharmonic_1d(n_cells: int) -> DiscreteFactor:
    """(1/h^2) tridiag(-1, 2, -1) on interior nodes; A = L^2 is the biharmonic."""
    n = _check_cells(n_cells)
    h = 1.0 / n
    m = n - 1
    L = (2.0 * np.eye(m) - np.eye(m, k=1) - np.eye(m, k=-1)) / h**2
    return DiscreteFactor(L, Grid(1, n, h), FactorKind.Biharmonic)


def lift_to_dimension(base: DiscreteFactor, d: int) -> DiscreteFactor:
    """Lift a 1D factor to d dimensions (direction 1 slowest).

    Gradient-type factors are stacked Kronecker lifts; the biharmonic
    factor becomes the Kronecker-sum Laplacian.
    """
    if base.grid.d != 1:
        raise UnsupportedGrid("lift_to_dimension expects a 1D base factor")
    d = int(d)
    if d < 1:
        raise UnsupportedGrid("dimension must be at least 1")
    if d == 1:
        return base
    L1 = np.asarray(base.matrix)
    r, c = L1.shape
    grid = Grid(d, base.grid.n_cells, base.grid.h)
    if base.kind == FactorKind.Biharmonic:
        check_size(c**d, "lifted factor")
        eye = np.eye(c)
        L = np.zeros((c**d, c**d), dtype=L1.dtype)
        for k in range(d):
            L += _kron_chain([eye] * k + [L1] + [eye] * (d - k - 1))
        return DiscreteFactor(L, grid, base.kind, float(d * base.spectral_norm))
    check_size(d * r * c ** (d - 1), "lifted factor")
    eye = np.eye(c)
    blocks = [_kron_chain([eye] * k + [L1] + [eye] * (d - k - 1)) for k in range(d)]
    L = np.vstack(blocks)
    return DiscreteFactor(L, grid, base.kind, float(np.sqrt(d) * base.spectral_norm))


def _kron_chain(mats):
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out


def fourier_indices(n_modes: int) -> np.ndarray:
    """Integer wavenumbers in FFT order: 0, 1, .., N/2-1, -N/2, .., -1."""
    return np.fft.fftfreq(n_modes, d=1.0 / n_modes).round().astype(int)


def fourier_matrix(n_modes: int, d: int = 1) -> np.ndarray:
    n = n_modes
    j = np.arange(n)
    k = fourier_indices(n)
    F1 = np.exp(-2j * np.pi * np.outer(k, j) / n) / np.sqrt(n)
    return _kron_chain([F1] * d)


def hj_symbol(n_modes: int, d: int, nu: float) -> np.ndarray:
    """D(k) = nu (2 pi)^2 |k|^2 over the lexicographic mode grid."""
    k = fourier_indices(n_modes).astype(float)
    grids = np.meshgrid(*([k] * d), indexing="ij")
    k2 = sum(g**2 for g in grids).ravel()
    return nu * (2 * np.pi) ** 2 * k2


def build_hj_fourier_factor(n_modes: int, d: int = 1, nu: float = 1.0) -> DiscreteFactor:
    """L_HJ = D^{1/2} U_F on a periodic grid with N^d points."""
    n = int(n_modes)
    if n != n_modes or n < 2 or n % 2:
        raise UnsupportedGrid(f"HJ Fourier grid needs an even number of modes, got {n_modes}")
    if not nu > 0:
        raise UnsupportedGrid("viscosity must be positive")
    d = int(d)
    if d < 1:
        raise UnsupportedGrid("dimension must be at least 1")
    check_size(n**d, "Fourier factor")
    D = hj_symbol(n, d, nu)
    L = np.sqrt(D)[:, None] * fourier_matrix(n, d)
    return DiscreteFactor(L, Grid(d, n, 1.0 / n), FactorKind.HJFourier, float(np.sqrt(D.max())))


def custom_factor(matrix) -> DiscreteFactor:
    m = np.atleast_2d(np.asarray(matrix, dtype=complex))
    return DiscreteFactor(m, Grid(1, max(m.shape), 1.0), FactorKind.Custom)


def dirichlet_boundary_forcing(n_cells: int, left_value: float = 1.0,
                               right_value: float = 1.0) -> ForcingVector:
    """Boundary data u(0)=left, u(1)=right entering the first and last faces."""
    n = _check_cells(n_cells)
    h = 1.0 / n
    f = np.zeros(2 * n - 1, dtype=complex)
    f[n - 1] = -left_value / h
    f[2 * n - 2] = right_value / h
    return ForcingVector(f, Slot.VSlot, TimeProfile.ConstantInS)


def source_forcing(factor: DiscreteFactor, f_h) -> ForcingVector:
    """Interior source f_h placed in the w slot: b = (f_h, 0)."""
    f_h = np.asarray(f_h, dtype=complex).ravel()
    if f_h.shape[0] != factor.n_w:
        raise ShapeError(f"source has length {f_h.shape[0]}, factor expects {factor.n_w}")
    b = np.zeros(factor.n_w + factor.n_v, dtype=complex)
    b[: factor.n_w] = f_h
    return ForcingVector(b, Slot.WSlot, TimeProfile.LinearInS)


def w_points(factor: DiscreteFactor) -> np.ndarray:
    """Coordinates of the w unknowns for 1D grids (nodes or cell centers)."""
    n, h = factor.grid.n_cells, factor.grid.h
    if factor.kind == FactorKind.HeatNeumann:
        return (np.arange(n) + 0.5) * h
    if factor.kind == FactorKind.HJFourier:
        return np.arange(n) * h
    return np.arange(1, n) * h
