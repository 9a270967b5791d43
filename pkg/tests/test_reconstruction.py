import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from scipy.linalg import expm
from hypothesis import strategies as st

from lochar.errors import DiagonalClampWarning, NegativeDiagonal, SingularSystem
from lochar.model import assemble, canonicalize, distance_to_class, random_haar_unitary
from lochar.reconstruction import (
    assemble_estimate,
    max_likely_unitary,
    nearest_unitary,
    nearest_unitary_svd,
    solve_diagonals,
    unitarity_defect,
)


def test_balanced_splitter_diagonals():
    lam, mu, info = solve_diagonals(np.array([[1, 1], [1, -1]], dtype=complex))
    np.testing.assert_allclose(mu, [0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(lam, [1.0, 1.0], atol=1e-14)
    U = assemble_estimate(np.ones((2, 2)), np.array([[0, 0], [0, np.pi]]), lam, mu)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(U, np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-14)


@pytest.mark.parametrize("seed", range(5))
def test_diagonals_fixed_point(seed):
    rep = canonicalize(random_haar_unitary(5, seed))
    lam, mu, _ = solve_diagonals(rep.alpha * np.exp(1j * rep.theta))
    np.testing.assert_allclose(lam, rep.lam, rtol=1e-10)
    np.testing.assert_allclose(mu, rep.mu, rtol=1e-10)


def test_scaled_row_is_flagged():
    rep = canonicalize(random_haar_unitary(4, 0))
    for row in range(4):
        alpha = rep.alpha.copy()
        alpha[row] *= 2
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            try:
                W, info = max_likely_unitary(alpha, rep.theta)
            except NegativeDiagonal:
                continue
        assert any(issubclass(w.category, DiagonalClampWarning) for w in caught)
        assert unitarity_defect(W) < 1e-12


def test_negative_diagonal_counterexample():
    # A mu = e1 forces mu = (-1, 2)
    A = np.array([[1, 1], [1, 0.5]], dtype=complex)
    with pytest.raises(NegativeDiagonal):
        solve_diagonals(A, strict=True)
    with pytest.warns(DiagonalClampWarning):
        lam, mu, info = solve_diagonals(A)
    assert mu[0] == 1e-8
    assert ("mu", 1, pytest.approx(-1.0)) in info["clamped"]


def test_singular_system():
    with pytest.raises(SingularSystem):
        solve_diagonals(np.ones((3, 3), dtype=complex))


def test_nearest_unitary_fixed_point():
    U = random_haar_unitary(5, 1)
    np.testing.assert_allclose(nearest_unitary(U), U, atol=1e-12)


def test_nearest_unitary_removes_scale():
    np.testing.assert_allclose(nearest_unitary(2 * np.eye(3)), np.eye(3), atol=1e-15)


def test_nearest_unitary_rank_deficient():
    with pytest.raises(np.linalg.LinAlgError):
        nearest_unitary(np.diag([1.0, 0.0]))


def test_nearest_unitary_beats_sampled_unitaries(rng):
    # oracle: no unitary sampled near U is closer to the noisy estimate
    U = random_haar_unitary(4, rng)
    G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    Ut = U + 0.05 * G
    W = nearest_unitary(Ut)
    best = np.linalg.norm(W - Ut)
    for _ in range(10_000):
        H = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        Q = U @ expm(0.05j * (H + H.conj().T) / 2)
        assert best <= np.linalg.norm(Q - Ut) + 1e-12


@settings(max_examples=50)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_polar_matches_svd(m, seed):
    rng = np.random.default_rng(seed)
    Ut = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
    s = np.linalg.svd(Ut, compute_uv=False)
    if s[-1] < 1e-3 * s[0]:
        return
    np.testing.assert_allclose(nearest_unitary(Ut), nearest_unitary_svd(Ut), atol=1e-10)


@settings(max_examples=50)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1), st.floats(0.0, 1.0))
def test_output_always_unitary(m, seed, scale):
    rng = np.random.default_rng(seed)
    rep = canonicalize(random_haar_unitary(m, rng))
    alpha = rep.alpha * np.exp(scale * rng.normal(size=(m, m)) * 0.3)
    alpha[0] = rep.alpha[0]
    alpha[:, 0] = rep.alpha[:, 0]
    theta = rep.theta + scale * rng.normal(size=(m, m)) * 0.3
    theta[0] = 0
    theta[:, 0] = 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            W, _ = max_likely_unitary(alpha, theta)
        except SingularSystem:
            return
    assert unitarity_defect(W) < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_exact_data_recovers_class(seed):
    U = random_haar_unitary(4, seed)
    rep = canonicalize(U)
    W, info = max_likely_unitary(rep.alpha, rep.theta)
    assert distance_to_class(W, U) < 1e-10
    assert info["defect"] < 1e-10
    np.testing.assert_allclose(W, assemble(rep), atol=1e-10)
