import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from kannai import kernels
from kannai.errors import InvalidPrecision, InvalidTime, MissingParameter
from kannai.kernels import KernelKind, KernelSpec

# frozen oracle values (mpmath, 40 digits)
KAPPA_0 = 0.28209479177387814       # 1/(2 sqrt pi)
KAPPA_2 = 0.10377687435514868       # e^{-1}/(2 sqrt pi)
PHI_2 = 0.07864960352514257         # erfc(1)/2
LAM1_2 = 0.05025454166001222        # e^{-1}/sqrt(pi) - erfc(1)
ERFC_2 = 0.004677734981047266
R_1E6 = 7.973694777114085           # 2 sqrt(log 8e6)
OPT_LCHS_0 = 0.15630083960408000
IMPROVED_LCHS_0 = 0.24083011669508238


def _mp_erfc(x):
    mp.mp.dps = 50
    return float(mp.erfc(mp.mpf(x)))


@pytest.mark.parametrize("x", [-6.0, -1.0, -1e-3, 0.0, 1e-8, 0.3, 1.0, 1.49, 1.5, 1.51, 1.9, 2.0,
                               2.5, 4.0, 7.3, 12.0, 20.0, 26.0])
def test_erfc_probe_grid(x):
    ref = _mp_erfc(x)
    assert abs(kernels.erfc(x) - ref) <= 1e-13 * abs(ref)


@given(st.floats(-6.0, 26.0, allow_nan=False))
@settings(max_examples=200, deadline=None)
def test_erfc_relative_error(x):
    ref = _mp_erfc(x)
    assert abs(kernels.erfc(x) - ref) <= 1e-13 * abs(ref)


def test_erfc_vectorized_and_limits():
    v = kernels.erfc(np.array([0.0, 30.0, -30.0, np.nan]))
    assert v[0] == 1.0 and v[1] == 0.0 and v[2] == 2.0 and np.isnan(v[3])
    assert isinstance(kernels.erfc(1.0), float)


def test_kappa_values():
    assert kernels.kappa(1.0, 0.0) == pytest.approx(KAPPA_0, rel=1e-15)
    assert kernels.kappa(1.0, 2.0) == pytest.approx(KAPPA_2, rel=1e-15)
    assert kernels.kappa(0.25, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    with pytest.raises(InvalidTime):
        kernels.kappa(0.0, 1.0)
    with pytest.raises(InvalidTime):
        kernels.kappa(-1.0, 1.0)


def test_gaussian_tail_values():
    assert kernels.gaussian_tail(1.0, 0.0) == 0.5
    assert kernels.gaussian_tail(1.0, 2.0) == pytest.approx(PHI_2, rel=1e-14)
    assert kernels.gaussian_tail(1.0, -1e3) == 1.0


def test_lambda_first_moment_values():
    assert kernels.lambda_first_moment(1.0, 0.0) == pytest.approx(1 / math.sqrt(math.pi), rel=1e-15)
    assert kernels.lambda_first_moment(1.0, 2.0) == pytest.approx(LAM1_2, rel=1e-13)
    # even kernel: the mirrored branch keeps the sign
    assert kernels.lambda_first_moment(1.0, -2.0) == pytest.approx(LAM1_2, rel=1e-13)


def test_lambda_zeroth_moment_values():
    assert kernels.lambda_zeroth_moment(1.0, 2.0) == pytest.approx(PHI_2, rel=1e-14)
    assert kernels.lambda_zeroth_moment(1.0, 0.0) == 0.5
    assert kernels.lambda_zeroth_moment(1.0, -2.0) == pytest.approx(-PHI_2, rel=1e-14)


@pytest.mark.parametrize("T", [0.3, 1.0, 4.0])
def test_kernel_masses(T):
    m0, _ = integrate.quad(lambda s: kernels.kappa(T, s), -np.inf, np.inf, epsabs=1e-14)
    assert m0 == pytest.approx(1.0, abs=1e-10)
    m1, _ = integrate.quad(lambda s: abs(kernels.lambda_first_moment(T, s)), 0, np.inf, epsabs=1e-14)
    assert 2 * m1 == pytest.approx(T, abs=1e-8)


@pytest.mark.parametrize("a", [0.0, 1.0, 2.0, 5.0])
def test_tail_matches_quadrature(a):
    T = 0.7
    q, _ = integrate.quad(lambda s: kernels.kappa(T, s), a * math.sqrt(T), np.inf, epsabs=1e-15)
    assert kernels.gaussian_tail(T, a * math.sqrt(T)) == pytest.approx(q, abs=1e-10)


@pytest.mark.parametrize("lam", [0.5, 1.0, 2.0])
def test_fourier_identities(lam):
    T = 1.0
    g, _ = integrate.quad(lambda s: kernels.kappa(T, s) * math.cos(lam * s), 0, np.inf, limit=200)
    assert 2 * g == pytest.approx(math.exp(-lam * lam * T), abs=1e-10)
    m, _ = integrate.quad(lambda s: kernels.lambda_first_moment(T, s) * math.cos(lam * s), 0, np.inf,
                          limit=200)
    assert 2 * m == pytest.approx((1 - math.exp(-lam * lam * T)) / lam**2, abs=1e-8)


def test_truncation_radius():
    assert kernels.truncation_radius(1.0, 1e-6) == pytest.approx(R_1E6, rel=1e-14)
    assert kernels.truncation_radius(4.0, 1e-6) == pytest.approx(2 * R_1E6, rel=1e-14)
    assert kernels.truncation_radius(1.0, 8 / math.e) == pytest.approx(2.0, rel=1e-14)
    for bad in (0.0, -1.0, 8.0, float("nan")):
        with pytest.raises(InvalidPrecision):
            kernels.truncation_radius(1.0, bad)


def test_comparison_kernels():
    s0 = np.array(0.0)
    v = kernels.comparison_kernel(KernelSpec(KernelKind.OptLCHS, 1.0, eps_param=1e-6), s0)
    assert complex(v) == pytest.approx(OPT_LCHS_0, rel=1e-13)
    assert kernels.comparison_kernel(KernelSpec(KernelKind.KannaiGaussian, 1.0), 0.0) == \
        pytest.approx(KAPPA_0, rel=1e-15)
    v = kernels.comparison_kernel(KernelSpec(KernelKind.ImprovedLCHS, 1.0, beta=0.5), s0)
    assert complex(v) == pytest.approx(IMPROVED_LCHS_0, rel=1e-13)
    with pytest.raises(MissingParameter):
        kernels.comparison_kernel(KernelSpec(KernelKind.ImprovedLCHS, 1.0), s0)
    with pytest.raises(MissingParameter):
        kernels.comparison_kernel(KernelSpec(KernelKind.OptLCHS, 1.0), s0)
    with pytest.raises(InvalidPrecision):
        kernels.comparison_kernel(KernelSpec(KernelKind.ImprovedLCHS, 1.0, beta=1.5), s0)


def test_truncation_curve():
    spec = KernelSpec(KernelKind.KannaiGaussian, 1.0)
    curve = kernels.truncation_error_curve(spec, [0.0, 4.0])
    assert curve[0] == (0.0, 1.0)
    assert curve[1][1] == pytest.approx(ERFC_2, rel=1e-13)
    opt = kernels.tail_error(KernelSpec(KernelKind.OptLCHS, 1.0, eps_param=1e-6), 4.0)
    assert opt > ERFC_2
    with pytest.raises(ValueError):
        kernels.truncation_error_curve(spec, [2.0, 1.0])


def test_zeroth_moment_tail_closed_form():
    spec = KernelSpec(KernelKind.LambdaZerothMoment, 1.3)
    q, _ = integrate.quad(lambda s: abs(kernels.lambda_zeroth_moment(1.3, s)), 2.0, np.inf, epsabs=1e-15)
    assert kernels.tail_error(spec, 2.0) == pytest.approx(2 * q, rel=1e-10)


def test_numeric_tail_agrees_with_closed_form():
    spec = KernelSpec(KernelKind.LambdaFirstMoment, 1.0)
    q, _ = integrate.quad(lambda s: kernels.lambda_first_moment(1.0, s), 3.0, np.inf, epsabs=1e-15)
    assert kernels.tail_error(spec, 3.0) == pytest.approx(2 * q, rel=1e-9)


def test_minimal_radius_kannai_inverts_erfc():
    spec = KernelSpec(KernelKind.KannaiGaussian, 1.0)
    for eps in (1e-3, 1e-6, 1e-9):
        R = kernels.minimal_truncation_radius(spec, eps)
        assert _mp_erfc(R / 2) == pytest.approx(eps, rel=1e-9)


def test_perturb_relative():
    v = np.linspace(0.1, 1.0, 50)
    p = kernels.perturb_relative(v, 1e-3, seed=3)
    assert np.all(np.abs(p - v) <= 1e-3 * v + 1e-18)
    np.testing.assert_array_equal(p, kernels.perturb_relative(v, 1e-3, seed=3))
    np.testing.assert_allclose(kernels.perturb_relative(v, 1e-3, mode="up"), v * 1.001)
    np.testing.assert_array_equal(kernels.perturb_relative(v, 0.0), v)
    with pytest.raises(InvalidPrecision):
        kernels.perturb_relative(v, -1.0)
