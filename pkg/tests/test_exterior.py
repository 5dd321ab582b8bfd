import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from heatforms.exterior import (FormValue, derivation_ext, fiber_tables,
                                interior, lambda_ext, lambda_gram, wedge,
                                weitzenboeck_from_riemann)


def complex_block(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_wedge_basis_products():
    a = FormValue.from_blocks(2, {1: [1, 0]})
    b = FormValue.from_blocks(2, {1: [0, 1]})
    assert wedge(a, b).block(2)[0] == 1
    assert wedge(b, a).block(2)[0] == -1
    # (dx0 + dx1) ^ dx0 = -dx0^dx1
    c = FormValue.from_blocks(2, {1: [1, 1]})
    assert wedge(c, a).block(2)[0] == -1


def test_wedge_frame_mismatch_rejected():
    a = FormValue.from_blocks(2, {1: [1, 0]}, frame="coordinate")
    b = FormValue.from_blocks(2, {1: [0, 1]}, frame="orthonormal")
    with pytest.raises(ValueError, match="frame"):
        wedge(a, b)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2 ** 31 - 1))
def test_wedge_bilinear_and_graded_antisymmetric(m, seed):
    rng = np.random.default_rng(seed)
    t = fiber_tables(m)
    ka, kb = rng.integers(0, m + 1, size=2)
    a = FormValue.from_blocks(m, {int(ka): complex_block(rng, t.degree_slices[ka].stop - t.degree_slices[ka].start)})
    b = FormValue.from_blocks(m, {int(kb): complex_block(rng, t.degree_slices[kb].stop - t.degree_slices[kb].start)})
    ab = wedge(a, b).coeffs
    ba = wedge(b, a).coeffs
    assert np.allclose(ab, (-1.0) ** (ka * kb) * ba, atol=1e-12)
    lam = rng.standard_normal() + 1j * rng.standard_normal()
    assert np.allclose(wedge(lam * a, b).coeffs, lam * ab, atol=1e-12)


def test_interior_examples_m3():
    m = 3
    eps01 = wedge(FormValue.from_blocks(m, {1: [1, 0, 0]}),
                  FormValue.from_blocks(m, {1: [0, 1, 0]}))
    e0 = np.array([1.0, 0, 0])
    e2 = np.array([0, 0, 1.0])
    assert np.allclose(interior(np.eye(m), e0, eps01).block(1), [0, 1, 0])
    assert np.allclose(interior(np.eye(m), e2, eps01).coeffs, 0)


def test_interior_degree0_convention():
    f = FormValue.from_blocks(2, {0: [3.0]})
    out = interior(np.eye(2), np.array([1.0, 0]), f)
    assert np.allclose(out.coeffs, 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2 ** 31 - 1))
def test_interior_antiderivation(m, seed):
    rng = np.random.default_rng(seed)
    t = fiber_tables(m)
    ka = int(rng.integers(1, m))
    na = t.degree_slices[ka].stop - t.degree_slices[ka].start
    a = FormValue.from_blocks(m, {ka: complex_block(rng, na)})
    kb = int(rng.integers(0, m + 1 - ka))
    nb = t.degree_slices[kb].stop - t.degree_slices[kb].start
    b = FormValue.from_blocks(m, {kb: complex_block(rng, nb)})
    X = rng.standard_normal(m)
    lhs = interior(None, X, wedge(a, b)).coeffs
    rhs = (wedge(interior(None, X, a), b).coeffs
           + (-1.0) ** ka * wedge(a, interior(None, X, b)).coeffs)
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_lambda_gram_examples():
    assert np.allclose(lambda_gram(np.eye(3), 2), np.eye(3))
    assert abs(lambda_gram(np.diag([4.0, 9.0]), 2)[0, 0] - 1 / 36) < 1e-15
    assert lambda_gram(np.diag([4.0, 9.0]), 0)[0, 0] == 1.0


def test_lambda_gram_rejects_bad_metric():
    with pytest.raises(ValueError):
        lambda_gram(np.array([[1.0, 2.0], [0.0, 1.0]]), 1)
    with pytest.raises(ValueError):
        lambda_gram(np.diag([1.0, -1.0]), 1)


def test_lambda_ext_multiplicative_and_block_diagonal():
    rng = np.random.default_rng(5)
    m = 3
    A = rng.standard_normal((m, m)) + 2 * np.eye(m)
    B = rng.standard_normal((m, m)) + 2 * np.eye(m)
    # precomposition is an antihomomorphism on coefficients
    assert np.allclose(lambda_ext(m, A @ B), lambda_ext(m, B) @ lambda_ext(m, A))
    t = fiber_tables(m)
    L = lambda_ext(m, A)
    for k in range(m + 1):
        s = t.degree_slices[k]
        mask = np.ones_like(L, dtype=bool)
        mask[s, s] = False
        row = np.zeros(L.shape[0], dtype=bool)
        row[s] = True
        assert np.all(L[np.ix_(row, ~row[: L.shape[0]])] == 0)


def test_derivation_ext_leibniz():
    rng = np.random.default_rng(6)
    m = 3
    B = rng.standard_normal((m, m))
    d = derivation_ext(m, B)
    a = FormValue.from_blocks(m, {1: complex_block(rng, 3)})
    b = FormValue.from_blocks(m, {1: complex_block(rng, 3)})
    lhs = d @ wedge(a, b).coeffs
    rhs = (wedge(FormValue(m, d @ a.coeffs), b).coeffs
           + wedge(a, FormValue(m, d @ b.coeffs)).coeffs)
    assert np.allclose(lhs, rhs, atol=1e-12)


@pytest.mark.parametrize("m,K", [(2, 1.0), (2, -1.0), (3, 1.0), (4, 1.0)])
def test_weitzenboeck_constant_curvature(m, K):
    eye = np.eye(m)
    R = K * (np.einsum("bc,ad->abcd", eye, eye)
             - np.einsum("ac,bd->abcd", eye, eye))
    W = weitzenboeck_from_riemann(R)
    t = fiber_tables(m)
    assert np.allclose(W, W.T)
    for k in range(m + 1):
        s = t.degree_slices[k]
        nk = s.stop - s.start
        assert np.allclose(W[s, s], K * k * (m - k) * np.eye(nk), atol=1e-12)
    # block diagonality is exact
    for k in range(m + 1):
        s = t.degree_slices[k]
        other = np.ones(W.shape[0], dtype=bool)
        other[s] = False
        assert np.all(W[s][:, other] == 0)


def test_formvalue_blocks_and_validation():
    v = FormValue.from_blocks(3, {0: [2.0], 2: [1, 2, 3]})
    assert v.degree_mask == (0, 2)
    assert np.allclose(v.block(2), [1, 2, 3])
    with pytest.raises(ValueError):
        FormValue.from_blocks(3, {1: [1, 2]})
    with pytest.raises(ValueError):
        FormValue(2, np.zeros(5))
