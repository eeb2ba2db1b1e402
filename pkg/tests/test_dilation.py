import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from kannai.dilation import (build_ham_h, build_selector_blockenc, dilation_matrix, embed_padded,
                             hermitian_dilation, padded_dilation_matrix, phase_conjugation_residual,
                             unitary_completion)
from kannai.errors import DegenerateSelector, NormalizationTooSmall, ShapeError
from kannai.operators import build_heat_gradient_1d


def test_scalar_dilation():
    dil = hermitian_dilation([[2.0]])
    np.testing.assert_array_equal(dil.H, [[0, 2j], [-2j, 0]])
    np.testing.assert_allclose(dil.eigenvalues, [-2.0, 2.0], rtol=1e-15)
    assert dil.norm == pytest.approx(2.0)


def test_zero_factor():
    dil = hermitian_dilation([[0.0]])
    assert dil.norm == 0.0
    np.testing.assert_array_equal(dil.H, np.zeros((2, 2)))


def test_rectangular_layout():
    L = np.arange(6.0).reshape(3, 2)
    H = dilation_matrix(L)
    assert H.shape == (5, 5)
    np.testing.assert_array_equal(H[:2, 2:], 1j * L.T)
    np.testing.assert_array_equal(H[2:, :2], -1j * L)
    assert np.all(H[:2, :2] == 0) and np.all(H[2:, 2:] == 0)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
              elements=st.floats(-5, 5, allow_nan=False)))
@settings(max_examples=50, deadline=None)
def test_dilation_hermitian_and_norm(L):
    dil = hermitian_dilation(L)
    np.testing.assert_allclose(dil.H, dil.H.conj().T, atol=0)
    assert dil.norm == pytest.approx(np.linalg.norm(L, 2), rel=1e-10, abs=1e-12)


def test_dilation_immutable():
    dil = hermitian_dilation(build_heat_gradient_1d(4))
    with pytest.raises(ValueError):
        dil.H[0, 0] = 1.0


def test_dirichlet_norm():
    # 2 sqrt(2 + sqrt 2) / h for 4 cells
    dil = hermitian_dilation(build_heat_gradient_1d(4))
    assert dil.norm == pytest.approx(7.391036260090294, rel=1e-13)


def test_function_matches_expm():
    from scipy.linalg import expm
    dil = hermitian_dilation(np.array([[1.0, 2.0], [0.5, -1.0], [0.0, 3.0]]))
    np.testing.assert_allclose(dil.function(np.exp(-0.7j * dil.eigenvalues)),
                               expm(-0.7j * dil.H), atol=1e-13)


def test_embed_padded_matches_padded_dilation():
    L = np.arange(1.0, 7.0).reshape(3, 2)
    np.testing.assert_allclose(embed_padded(hermitian_dilation(L)), padded_dilation_matrix(L))


def test_completion_identity_scalar():
    be = unitary_completion(np.diag([1.0, -1.0]), 1.0)
    np.testing.assert_allclose(be.unitary[:2, :2], np.diag([1.0, -1.0]))
    assert be.unitarity_residual() <= 1e-14


def test_completion_half():
    be = unitary_completion([[1.0]], 2.0)
    np.testing.assert_allclose(be.unitary, [[0.5, math.sqrt(3) / 2], [math.sqrt(3) / 2, -0.5]],
                               atol=1e-15)
    assert be.ancilla_count == 1 and be.system_dim == 1


def test_completion_rejects_small_alpha():
    with pytest.raises(NormalizationTooSmall):
        unitary_completion([[2.0]], 1.0)
    with pytest.raises(NormalizationTooSmall):
        unitary_completion([[0.0]], 0.0)


def test_completion_size_limit():
    with pytest.raises(ShapeError):
        unitary_completion(np.eye(65), 1.0)


@pytest.mark.parametrize("shape", [(1, 1), (3, 2), (2, 3), (5, 5)])
def test_completion_residuals(shape, rng):
    L = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    be = unitary_completion(L, np.linalg.norm(L, 2))
    assert be.block_residual() <= 1e-12
    assert be.unitarity_residual() <= 1e-12


def test_ham_h_scalar():
    be = build_ham_h(unitary_completion([[1.0]], 1.0))
    np.testing.assert_allclose(be.block(), [[0, 1j], [-1j, 0]], atol=1e-15)
    assert be.ancilla_count == 2
    assert be.block_residual() <= 1e-15


def test_ham_h_matches_dilation(rng):
    L = rng.standard_normal((3, 3))
    be = build_ham_h(unitary_completion(L, 2 * np.linalg.norm(L, 2)))
    np.testing.assert_allclose(be.target, padded_dilation_matrix(L), atol=1e-14)
    assert be.block_residual() <= 1e-12
    assert be.unitarity_residual() <= 1e-12


def test_phase_conjugation(rng):
    assert phase_conjugation_residual(rng.standard_normal((4, 2))) <= 1e-14


@pytest.mark.parametrize("nodes", [[1.0], [1.0, -1.0], [0.5, 1.0], [-3.0, 0.0, 2.0]])
def test_selector(nodes):
    be_H = build_ham_h(unitary_completion([[1.0]], 1.0))
    be = build_selector_blockenc(nodes, be_H)
    s_max = max(abs(x) for x in nodes)
    assert be.normalization == pytest.approx(s_max)
    np.testing.assert_allclose(be.block(), np.kron(np.diag(nodes), be_H.target) / s_max, atol=1e-14)
    assert be.unitarity_residual() <= 1e-13
    assert be.ancilla_count == be_H.ancilla_count + 1


def test_selector_degenerate():
    be_H = build_ham_h(unitary_completion([[1.0]], 1.0))
    with pytest.raises(DegenerateSelector):
        build_selector_blockenc([], be_H)
    with pytest.raises(DegenerateSelector):
        build_selector_blockenc([0.0, 0.0], be_H)
