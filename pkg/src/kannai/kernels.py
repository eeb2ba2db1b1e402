"""Kannai kernel family, moment kernels, tails and the comparison kernels."""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import integrate, optimize

from .errors import (InvalidPrecision, InvalidTime, MissingParameter,
                     QuadratureFailure, RootFindingFailure)

_SQRT_PI = math.sqrt(math.pi)
_SERIES_CUT = 1.5
_SERIES_TERMS = 60
_CF_TERMS = 200


def _erfc_series(x):
    # erf(x) = 2x/sqrt(pi) e^{-x^2} sum_n (2x^2)^n / (2n+1)!!, all terms positive
    x2 = x * x
    term = np.ones_like(x)
    total = np.ones_like(x)
    for n in range(1, _SERIES_TERMS):
        term = term * 2.0 * x2 / (2 * n + 1)
        total = total + term
    return 1.0 - 2.0 * x / _SQRT_PI * np.exp(-x2) * total


def _erfc_cf(x):
    # Laplace continued fraction erfc(x) = e^{-x^2}/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
    # evaluated bottom-up with a fixed depth
    t = x.copy()
    for k in range(_CF_TERMS, 0, -1):
        t = x + (k / 2.0) / t
    return _exp_minus_square(x) / (_SQRT_PI * t)


def _exp_minus_square(x):
    # exp(-x^2) with x^2 split exactly, avoiding the ~x^2 ulp loss for large x
    xh = np.round(x * 4096.0) / 4096.0
    xl = x - xh
    return np.exp(-xh * xh) * np.exp(-(2.0 * xh + xl) * xl)


def erfc(x):
    """Complementary error function, vectorized, relative error ~1e-15."""
    xa = np.asarray(x, dtype=float)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    ax = np.abs(xa)
    out = np.empty_like(ax)
    small = ax <= _SERIES_CUT
    out[small] = _erfc_series(ax[small])
    big = ~small & (ax < 27.3)
    out[big] = _erfc_cf(ax[big])
    out[ax >= 27.3] = 0.0
    neg = xa < 0
    out[neg] = 2.0 - out[neg]
    out[np.isnan(xa)] = np.nan
    return float(out[0]) if scalar else out


def _check_T(T):
    if not (np.isfinite(T) and T > 0):
        raise InvalidTime(f"T must be positive and finite, got {T}")


def kappa(T, s):
    """Heat kernel in the auxiliary time s: (4 pi T)^{-1/2} exp(-s^2/4T)."""
    _check_T(T)
    s = np.asarray(s, dtype=float)
    return np.exp(-s * s / (4.0 * T)) / np.sqrt(4.0 * np.pi * T)


def gaussian_tail(T, a):
    """Phi_T(a) = int_a^inf kappa_T = erfc(a / 2 sqrt T) / 2."""
    _check_T(T)
    a = np.asarray(a, dtype=float)
    return 0.5 * erfc(a / (2.0 * np.sqrt(T)))


def lambda_first_moment(T, sigma):
    """int_{|sigma|}^inf (s - |sigma|) kappa_T(s) ds.

    Even in sigma, continuous with a kink at 0, peak sqrt(T/pi) and
    Fourier transform (1 - e^{-lambda^2 T}) / lambda^2.
    """
    _check_T(T)
    a = np.abs(np.asarray(sigma, dtype=float))
    return np.sqrt(T / np.pi) * np.exp(-a * a / (4.0 * T)) - a * gaussian_tail(T, a)


def lambda_zeroth_moment(T, sigma):
    """Odd kernel for forcing that is constant in s: sign(sigma) Phi_T(|sigma|).

    sigma == 0 takes the positive branch.
    """
    _check_T(T)
    s = np.asarray(sigma, dtype=float)
    sign = np.where(s < 0, -1.0, 1.0)
    return sign * gaussian_tail(T, np.abs(s))


def _check_eps(eps, upper=1.0):
    if not (np.isfinite(eps) and 0 < eps < upper):
        raise InvalidPrecision(f"precision must lie in (0, {upper:g}), got {eps}")


def truncation_radius(T, eps):
    """R = 2 sqrt(T) sqrt(log(8/eps)).

    eps is accepted on (0, 8), the range where the log is positive.
    """
    _check_T(T)
    _check_eps(eps, 8.0)
    return 2.0 * math.sqrt(T) * math.sqrt(math.log(8.0 / eps))


class KernelKind(enum.Enum):
    KannaiGaussian = "kannai"
    LambdaFirstMoment = "lambda1"
    LambdaZerothMoment = "lambda0"
    OptSchrodingerization = "opt-schrodingerization"
    ImprovedLCHS = "improved-lchs"
    OptLCHS = "opt-lchs"


COMPETITORS = (KernelKind.OptSchrodingerization, KernelKind.ImprovedLCHS, KernelKind.OptLCHS)


@dataclass(frozen=True)
class KernelSpec:
    kind: KernelKind
    T: float
    eps_param: Optional[float] = None
    beta: Optional[float] = None
    delta_off: float = 0.0


def comparison_kernel(spec: KernelSpec, s):
    """Evaluate any kernel of the family; the competitor rows are complex."""
    T = spec.T
    _check_T(T)
    s = np.asarray(s, dtype=float)
    kind = spec.kind
    if kind == KernelKind.KannaiGaussian:
        return kappa(T, s)
    if kind == KernelKind.LambdaFirstMoment:
        return lambda_first_moment(T, s)
    if kind == KernelKind.LambdaZerothMoment:
        return lambda_zeroth_moment(T, s)
    if kind == KernelKind.ImprovedLCHS:
        if spec.beta is None:
            raise MissingParameter("ImprovedLCHS needs beta")
        b = spec.beta
        if not 0 < b < 1:
            raise InvalidPrecision(f"beta must lie in (0, 1), got {b}")
        z = 1.0 + 1j * s / T
        return np.exp(2.0**b - z**b) / (2 * np.pi * (T - 1j * s))
    if spec.eps_param is None:
        raise MissingParameter(f"{kind.value} needs eps_param")
    _check_eps(spec.eps_param)
    ell = math.log(1.0 / spec.eps_param)
    if kind == KernelKind.OptSchrodingerization:
        z = 1.0 + 1j * s / T
        return np.exp(z * z / (16.0 * ell)) / (2 * np.pi * (T + 1j * s))
    if kind == KernelKind.OptLCHS:
        return np.exp(-((s / T) ** 2 + 1.0) / (4.0 * ell)) / (2 * np.pi * (T - 1j * s))
    raise MissingParameter(f"unknown kernel kind {kind}")


def _numeric_tail(spec: KernelSpec, R: float) -> float:
    f = lambda s: float(np.abs(comparison_kernel(spec, s)))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(f, R, np.inf, epsabs=1e-13, epsrel=1e-10, limit=500)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(f"tail integral at R={R} did not converge: {exc}") from None
    if not np.isfinite(val) or err > max(1e-12, 1e-8 * abs(val)):
        raise QuadratureFailure(f"tail integral at R={R} has error estimate {err}")
    return 2.0 * val


def tail_error(spec: KernelSpec, R: float) -> float:
    """eps(R) = 2 int_R^inf |K(s)| ds."""
    T = spec.T
    _check_T(T)
    if spec.kind == KernelKind.KannaiGaussian:
        return float(erfc(R / (2.0 * math.sqrt(T))))
    if spec.kind == KernelKind.LambdaZerothMoment:
        # int_a^inf erfc(x) dx = e^{-a^2}/sqrt(pi) - a erfc(a), scaled by 2 sqrt T / 2
        a = R / (2.0 * math.sqrt(T))
        return float(2.0 * math.sqrt(T) * (math.exp(-a * a) / _SQRT_PI - a * erfc(a)))
    return _numeric_tail(spec, R)


def truncation_error_curve(spec: KernelSpec, R_grid):
    R_grid = np.asarray(R_grid, dtype=float)
    if np.any(R_grid < 0) or np.any(np.diff(R_grid) <= 0):
        raise ValueError("R grid must be nonnegative and increasing")
    return [(float(R), tail_error(spec, float(R))) for R in R_grid]


def minimal_truncation_radius(spec: KernelSpec, eps: float) -> float:
    """Smallest R with eps(R) <= eps, by bracketing and Brent's method."""
    _check_eps(eps)
    g = lambda R: math.log(tail_error(spec, R)) - math.log(eps)
    lo, hi = 0.0, max(1.0, spec.T)
    if tail_error(spec, lo) <= eps:
        return 0.0
    for _ in range(200):
        if tail_error(spec, hi) <= eps:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise RootFindingFailure("could not bracket the truncation radius")
    try:
        return float(optimize.brentq(g, lo, hi, xtol=1e-12, rtol=1e-13, maxiter=200))
    except (RuntimeError, ValueError) as exc:
        raise RootFindingFailure(str(exc)) from None


def perturb_relative(values, delta_off: float, seed=None, mode: str = "random"):
    """Inject relative noise |v_a - v| <= delta_off |v| into kernel samples.

    mode "random" draws a factor uniformly in [1 - delta_off, 1 + delta_off];
    mode "up" applies the worst-case (1 + delta_off) scaling.
    """
    v = np.asarray(values)
    if delta_off < 0:
        raise InvalidPrecision("delta_off must be nonnegative")
    if delta_off == 0:
        return v.copy()
    if mode == "up":
        return v * (1.0 + delta_off)
    rng = np.random.default_rng(seed)
    return v * (1.0 + delta_off * rng.uniform(-1.0, 1.0, size=v.shape))
