import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from kannai import bounds, kernels
from kannai.operators import TimeProfile

# T = 1, R = 2, mu = 1.5, mpmath quadrature
TRUNC_KAPPA = 0.19465476763499059
TRUNC_LAM1 = 0.43659823601702629
TRUNC_LAM0 = -0.64071351137732772j


def test_gl_constant():
    assert bounds.gl_constant(1) == pytest.approx(1 / 24, rel=1e-15)
    assert bounds.gl_constant(2) == pytest.approx(1 / 4320, rel=1e-15)


def test_truncation_bounds_decay():
    assert bounds.truncation_bound_c(1.0, 8.0) < 1e-7
    assert bounds.truncation_bound_d(1.0, 8.0) == pytest.approx(2 * bounds.truncation_bound_c(1.0, 8.0))


def test_coefficient_bounds_limit():
    # h1 -> 0 leaves only the noise term
    assert bounds.coefficient_bound_c(2.0, 5.0, 1e-9, 3, 1e-3) == pytest.approx(1.001)
    assert bounds.coefficient_bound_d(2.0, 5.0, 1e-9, 3, 1e-3) == pytest.approx(2.002)


def test_total_bound_composition():
    args = (1.0, 6.0, 0.1, 2, 3.0)
    tc = bounds.total_bound_c(*args, delta_off=1e-3, kernel_sum=1.0)
    assert tc == pytest.approx(1e-3 + bounds.quadrature_bound_c(*args) + bounds.truncation_bound_c(1.0, 6.0))
    assert bounds.lcu_noise_bound(0.1, 1.0, 2.0, 3.0, 4.0) == pytest.approx(1.1)


def test_kappa_transform_vs_mpmath():
    mpmath.mp.dps = 30
    T, mu = 0.7, 1.3
    f = lambda s: mpmath.exp(-s**2 / (4 * T)) / mpmath.sqrt(4 * mpmath.pi * T) * mpmath.cos(mu * s)
    ref = float(mpmath.quad(f, [-mpmath.inf, 0, mpmath.inf]))
    assert bounds.kappa_transform(T, mu) == pytest.approx(ref, rel=1e-14)


@pytest.mark.parametrize("mu", [0.0, 0.4, 2.0])
def test_lambda_transforms_vs_mpmath(mu):
    mpmath.mp.dps = 30
    T = 0.8
    lin = lambda s: kernels.lambda_first_moment(T, float(s)) * mpmath.cos(mu * s)
    con = lambda s: kernels.lambda_zeroth_moment(T, float(s)) * mpmath.sin(mu * s)
    pts = [0, 2, 5, 10, 40]
    ref_lin = 2 * float(mpmath.quad(lin, pts))
    ref_con = -2j * float(mpmath.quad(con, pts))
    assert bounds.lambda_transform(T, mu) == pytest.approx(ref_lin, rel=1e-10)
    assert bounds.lambda_transform(T, mu, TimeProfile.ConstantInS) == pytest.approx(ref_con, abs=1e-10)


def test_truncated_frozen():
    assert bounds.truncated_kappa_transform(1.0, 2.0, 1.5) == pytest.approx(TRUNC_KAPPA, abs=1e-15)
    assert bounds.truncated_lambda_transform(1.0, 2.0, 1.5)[0] == pytest.approx(TRUNC_LAM1, abs=1e-14)
    assert bounds.truncated_lambda_transform(1.0, 2.0, 1.5, TimeProfile.ConstantInS)[0] == \
        pytest.approx(TRUNC_LAM0, abs=1e-14)


@given(T=st.sampled_from([0.3, 1.0, 2.5]), R=st.floats(0.5, 8.0), mu=st.floats(-6.0, 6.0))
@settings(max_examples=40, deadline=None)
def test_truncated_vs_quad(T, R, mu):
    k = lambda s: float(kernels.kappa(T, s)) * math.cos(mu * s)
    l1 = lambda s: float(kernels.lambda_first_moment(T, s)) * math.cos(mu * s)
    l0 = lambda s: float(kernels.lambda_zeroth_moment(T, s)) * math.sin(mu * s)
    q = lambda f: 2 * integrate.quad(f, 0, R, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    assert bounds.truncated_kappa_transform(T, R, mu) == pytest.approx(q(k), abs=1e-12)
    assert bounds.truncated_lambda_transform(T, R, mu)[0].real == pytest.approx(q(l1), abs=1e-11)
    got = bounds.truncated_lambda_transform(T, R, mu, TimeProfile.ConstantInS)[0]
    assert got.imag == pytest.approx(-q(l0), abs=1e-11)
    assert abs(got.real) <= 1e-12


def test_truncated_tends_to_full():
    mu = np.array([0.0, 0.5, 3.0])
    np.testing.assert_allclose(bounds.truncated_lambda_transform(1.0, 40.0, mu),
                               bounds.lambda_transform(1.0, mu), atol=1e-14)
