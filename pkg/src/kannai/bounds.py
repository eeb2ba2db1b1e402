"""Error bounds for truncation, quadrature, coefficient sums and LCU noise,
plus exact spectral transforms of the kernels used as oracles."""

from __future__ import annotations

import math
import warnings

import numpy as np
from scipy import integrate, special

from . import kernels
from .errors import QuadratureFailure
from .operators import TimeProfile


def gl_constant(Q: int) -> float:
    """Per-panel Gauss-Legendre remainder constant (Q!)^4 / ((2Q+1) ((2Q)!)^3)."""
    return math.factorial(Q) ** 4 / ((2 * Q + 1) * math.factorial(2 * Q) ** 3)


def truncation_bound_c(T, R):
    return 2.0 * math.sqrt(T) / (math.sqrt(math.pi) * R) * math.exp(-R * R / (4.0 * T))


def truncation_bound_d(T, R):
    return 4.0 * T * math.sqrt(T) / (math.sqrt(math.pi) * R) * math.exp(-R * R / (4.0 * T))


def _growth(T, h1, Q, normH):
    return 2.0 ** (-2 * Q + 1) * h1 ** (2 * Q) * (normH + 1.0 / math.sqrt(2.0 * T)) ** (2 * Q)


def quadrature_bound_c(T, R, h1, Q, normH):
    return R * _growth(T, h1, Q, normH) / math.sqrt(T)


def quadrature_bound_d(T, R, h1, Q, normH):
    return R * _growth(T, h1, Q, normH) * math.sqrt(T)


def coefficient_bound_c(T, R, h1, Q, delta_off=0.0):
    return (1.0 + delta_off) + 2.0 ** (-2 * Q + 1) * R / math.sqrt(T) * (h1 / math.sqrt(T)) ** (2 * Q)


def coefficient_bound_d(T, R, h1, Q, delta_off=0.0):
    return (1.0 + delta_off) * T + 2.0 ** (-2 * Q + 1) * R * math.sqrt(T) * (h1 / math.sqrt(T)) ** (2 * Q)


def total_bound_c(T, R, h1, Q, normH, delta_off=0.0, kernel_sum=None):
    """Triangle-inequality composition: noise + quadrature + truncation.

    kernel_sum is sum_j w_j kappa(s_j); when omitted the coefficient bound is used.
    """
    if kernel_sum is None:
        kernel_sum = coefficient_bound_c(T, R, h1, Q)
    return (delta_off * kernel_sum + quadrature_bound_c(T, R, h1, Q, normH)
            + truncation_bound_c(T, R))


def total_bound_d(T, R, h1, Q, normH, delta_off=0.0, kernel_sum=None):
    if kernel_sum is None:
        kernel_sum = coefficient_bound_d(T, R, h1, Q)
    return (delta_off * kernel_sum + quadrature_bound_d(T, R, h1, Q, normH)
            + truncation_bound_d(T, R))


def total_bound_unit_c(T, R, h1, Q, normH, delta_off=0.0):
    """The same three terms with every hidden constant set to one."""
    return (delta_off + 2.0 ** (-2 * Q + 1) * R / math.sqrt(T) * (h1 / math.sqrt(T)) ** (2 * Q)
            * (normH + 1.0 / math.sqrt(2.0 * T)) ** (2 * Q)
            + math.sqrt(T) / R * math.exp(-R * R / (4.0 * T)))


def total_bound_unit_d(T, R, h1, Q, normH, delta_off=0.0):
    return (delta_off * T + 2.0 ** (-2 * Q + 1) * R * math.sqrt(T) * (h1 / math.sqrt(T)) ** (2 * Q)
            * (normH + 1.0 / math.sqrt(2.0 * T)) ** (2 * Q)
            + T * math.sqrt(T) / R * math.exp(-R * R / (4.0 * T)))


def lcu_noise_bound(delta1, alpha_c, alpha_d, psi_norm, b_norm):
    """|u_f^h - u_f^a| <= delta1 (alpha_c |psi0| + alpha_d |b|)."""
    return delta1 * (alpha_c * psi_norm + alpha_d * b_norm)


# exact transforms int K(s) e^{-i mu s} ds, evaluated per eigenvalue mu of H

def kappa_transform(T, mu):
    mu = np.asarray(mu, dtype=float)
    return np.exp(-mu * mu * T)


def _phi(T, x):
    # (1 - e^{-x T}) / x with the x -> 0 limit T
    x = np.asarray(x, dtype=float)
    out = np.full_like(x, float(T))
    nz = np.abs(x * T) > 1e-300
    out[nz] = -np.expm1(-x[nz] * T) / x[nz]
    return out


def lambda_transform(T, mu, profile=TimeProfile.LinearInS):
    mu = np.asarray(mu, dtype=float)
    if profile == TimeProfile.ConstantInS:
        return -1j * mu * _phi(T, mu * mu)
    return _phi(T, mu * mu).astype(complex)


def _kappa_tail(T, R, mu):
    # int_R^inf kappa(s) e^{-i mu s} ds through the Faddeeva function
    z = 1j * (R / (2.0 * math.sqrt(T)) + 1j * mu * math.sqrt(T))
    return 0.5 * np.exp(-R * R / (4.0 * T) - 1j * mu * R) * special.wofz(z)


def truncated_kappa_transform(T, R, mu):
    """int_{-R}^{R} kappa_T(s) e^{-i mu s} ds."""
    mu = np.asarray(mu, dtype=float)
    return kappa_transform(T, mu) - (_kappa_tail(T, R, mu) + _kappa_tail(T, R, -mu))


def _quad_tail(f, R, mu, weight):
    # non-oscillatory regime only: |mu| sqrt(T) small
    g = (lambda s: f(s) * math.cos(mu * s)) if weight == "cos" else (lambda s: f(s) * math.sin(mu * s))
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(g, R, np.inf, epsabs=1e-16, epsrel=1e-13, limit=400)
        except integrate.IntegrationWarning as exc:
            raise QuadratureFailure(str(exc)) from None
    return val


def _moment_tail(T, R, mu, profile):
    """int_R^inf Lambda_T(s) e^{-i mu s} ds for s > 0, by swapping the order of integration.

    With x = -i mu, K = int_R^inf kappa e^{x s}:
    first moment: (K - e^{xR} Phi(R)) / x^2 - e^{xR} Lambda(R) / x
    zeroth moment: (K - e^{xR} Phi(R)) / x
    """
    x = -1j * mu
    K = _kappa_tail(T, R, mu)
    ph = float(kernels.gaussian_tail(T, R))
    eR = np.exp(x * R)
    if profile == TimeProfile.ConstantInS:
        return (K - eR * ph) / x
    return (K - eR * ph) / (x * x) - eR * float(kernels.lambda_first_moment(T, R)) / x


def truncated_lambda_transform(T, R, mu, profile=TimeProfile.LinearInS):
    """int_{-R}^{R} Lambda_T(s) e^{-i mu s} ds for either moment kernel."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    full = lambda_transform(T, mu, profile)
    out = np.empty_like(full)
    small = 0.2 / math.sqrt(T)
    for i, m in enumerate(mu):
        if profile == TimeProfile.ConstantInS:
            if abs(m) < small:
                tail = -2j * _quad_tail(lambda s: float(kernels.gaussian_tail(T, s)), R, m, "sin")
            else:
                tail = _moment_tail(T, R, m, profile) - _moment_tail(T, R, -m, profile)
        else:
            if abs(m) < small:
                tail = 2.0 * _quad_tail(lambda s: float(kernels.lambda_first_moment(T, s)), R, m, "cos")
            else:
                tail = 2.0 * _moment_tail(T, R, m, profile).real
        out[i] = full[i] - tail
    return out
