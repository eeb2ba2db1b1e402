"""Panel Gauss-Legendre and trapezoid grids on [-R, R], parameter selection and LCU coefficients."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .errors import InvalidPanel, InvalidPrecision, InvalidTime, RootFindingFailure
from .operators import TimeProfile

log = logging.getLogger(__name__)

Q_MAX = 64


def _legendre_and_derivative(Q, x):
    p0 = np.ones_like(x)
    p1 = x.copy()
    for k in range(2, Q + 1):
        p0, p1 = p1, ((2 * k - 1) * x * p1 - (k - 1) * p0) / k
    # P'_Q = Q (x P_Q - P_{Q-1}) / (x^2 - 1)
    dp = Q * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_legendre_reference(Q: int):
    """Nodes and weights of the Q-point Gauss-Legendre rule on [-1, 1]."""
    Q = int(Q)
    if Q < 1 or Q > Q_MAX:
        raise InvalidPrecision(f"Gauss order must lie in [1, {Q_MAX}], got {Q}")
    if Q == 1:
        return np.array([0.0]), np.array([2.0])
    i = np.arange(1, Q + 1)
    x = np.cos(np.pi * (i - 0.25) / (Q + 0.5))
    for _ in range(100):
        p, dp = _legendre_and_derivative(Q, x)
        dx = p / dp
        # guard: keep each root inside its bracket (-1, 1)
        x_new = np.clip(x - dx, -1 + 1e-300, 1 - 1e-300)
        x = x_new
        if np.max(np.abs(dx)) < 1e-15:
            break
    else:
        raise RootFindingFailure(f"Newton iteration for P_{Q} did not converge")
    p, dp = _legendre_and_derivative(Q, x)
    w = 2.0 / ((1.0 - x * x) * dp * dp)
    order = np.argsort(x)
    x, w = x[order], w[order]
    # enforce exact symmetry
    x = 0.5 * (x - x[::-1])
    w = 0.5 * (w + w[::-1])
    return x, w


@dataclass(frozen=True, eq=False)
class QuadraturePlan:
    R: float
    h1: float
    Q: int
    rule: str
    nodes: np.ndarray
    weights: np.ndarray
    panels: int
    h1_adjusted: bool = False

    @property
    def M(self) -> int:
        return int(self.nodes.shape[0])

    @property
    def s_max(self) -> float:
        return float(np.max(np.abs(self.nodes)))


def build_panel_grid(R: float, h1: float, Q: int) -> QuadraturePlan:
    """Composite Q-point Gauss-Legendre on 2 M_R panels of width h1; s = 0 is a panel edge."""
    if not (R > 0 and np.isfinite(R)):
        raise InvalidPanel(f"R must be positive, got {R}")
    if not h1 > 0:
        raise InvalidPanel(f"h1 must be positive, got {h1}")
    if h1 > R * (1 + 1e-12):
        raise InvalidPanel(f"panel width {h1} exceeds R = {R}")
    M_R = int(math.ceil(R / h1 - 1e-9))
    h_new = R / M_R
    adjusted = not math.isclose(h_new, h1, rel_tol=1e-12)
    if adjusted:
        log.info("panel width %.6g shrunk to %.6g so that R/h1 = %d", h1, h_new, M_R)
    x, w = gauss_legendre_reference(Q)
    m = np.arange(-M_R, M_R)
    centers = (2 * m + 1) / 2.0 * h_new
    nodes = (centers[:, None] + 0.5 * h_new * x[None, :]).ravel()
    weights = np.tile(0.5 * h_new * w, 2 * M_R)
    return QuadraturePlan(float(R), float(h_new), int(Q), "gauss-legendre", nodes, weights,
                          2 * M_R, adjusted)


def build_trapezoid_grid(R: float, M_panels: int) -> QuadraturePlan:
    M = int(M_panels)
    if M < 1 or not R > 0:
        raise InvalidPanel("trapezoid rule needs R > 0 and at least one panel")
    ds = 2.0 * R / M
    nodes = -R + ds * np.arange(M + 1)
    if M % 2 == 0:
        nodes[M // 2] = 0.0
    weights = np.full(M + 1, ds)
    weights[0] = weights[-1] = 0.5 * ds
    return QuadraturePlan(float(R), float(ds), 1, "trapezoid", nodes, weights, M)


@dataclass(frozen=True)
class ParameterChoice:
    R: float
    h1: float
    Q: int
    delta_off: float
    h1_raw: float


def select_parameters(T: float, normH: float, eps: float) -> ParameterChoice:
    """R = 2 sqrt(T log(8/eps)), Q = ceil(log2(8R/(eps sqrt T))), h1 = sqrt T / (e(|H| + 1/sqrt(2T))).

    h1 is clamped to R; the integer-panel rounding happens in build_panel_grid.
    """
    if not (np.isfinite(T) and T > 0):
        raise InvalidTime(f"T must be positive, got {T}")
    if not (np.isfinite(eps) and 0 < eps < 8):
        raise InvalidPrecision(f"precision must lie in (0, 8), got {eps}")
    if not normH >= 0:
        raise InvalidPrecision("operator norm must be nonnegative")
    R = kernels.truncation_radius(T, eps)
    sT = math.sqrt(T)
    Q = max(1, math.ceil(math.log2(8.0 * R / (eps * sT))))
    if Q > Q_MAX:
        raise InvalidPrecision(f"eps={eps:g} needs Gauss order {Q} > {Q_MAX}")
    h1_raw = sT / (math.e * (normH + 1.0 / math.sqrt(2.0 * T)))
    return ParameterChoice(R, min(h1_raw, R), Q, eps / 4.0, h1_raw)


def theorem_plan(T: float, normH: float, eps: float) -> QuadraturePlan:
    p = select_parameters(T, normH, eps)
    return build_panel_grid(p.R, p.h1, p.Q)


@dataclass(frozen=True, eq=False)
class LcuCoefficients:
    c: np.ndarray
    d: np.ndarray
    T: float
    time_profile: TimeProfile
    delta_off: float = 0.0

    @property
    def alpha_c(self) -> float:
        return float(np.sum(np.abs(self.c)))

    @property
    def alpha_d(self) -> float:
        return float(np.sum(np.abs(self.d)))

    @property
    def theta_c(self) -> np.ndarray:
        return np.angle(self.c)

    @property
    def theta_d(self) -> np.ndarray:
        return np.angle(self.d)


def moment_kernel(profile: TimeProfile):
    if profile == TimeProfile.ConstantInS:
        return kernels.lambda_zeroth_moment
    return kernels.lambda_first_moment


def coefficients(plan: QuadraturePlan, T: float,
                 time_profile: TimeProfile = TimeProfile.LinearInS,
                 delta_off: float = 0.0, seed: Optional[int] = None,
                 mode: str = "random") -> LcuCoefficients:
    """c_j = w_j kappa_T(s_j), d_j = w_j Lambda_T(s_j), optionally with injected relative noise."""
    kap = kernels.kappa(T, plan.nodes)
    lam = moment_kernel(time_profile)(T, plan.nodes)
    if delta_off:
        rng = np.random.default_rng(seed)
        s1, s2 = (None, None) if mode == "up" else tuple(rng.integers(0, 2**63, size=2))
        kap = kernels.perturb_relative(kap, delta_off, s1, mode)
        lam = kernels.perturb_relative(lam, delta_off, s2, mode)
    c = (plan.weights * kap).astype(complex)
    d = (plan.weights * lam).astype(complex)
    return LcuCoefficients(c, d, float(T), time_profile, float(delta_off))


def write_plan_csv(plan: QuadraturePlan, coeffs: LcuCoefficients, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["node", "weight", "c_re", "c_im", "d_re", "d_im"])
    for s, wt, c, d in zip(plan.nodes, plan.weights, coeffs.c, coeffs.d):
        w.writerow([repr(float(s)), repr(float(wt)), repr(c.real), repr(c.imag),
                    repr(d.real), repr(d.imag)])
