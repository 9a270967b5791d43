import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lochar.coincidence import SubmatrixParams, coincidence_curve, single_photon_probs
from lochar.errors import DegeneratePort, DimensionMismatch
from lochar.model import (
    CoincidenceCurve,
    LossModel,
    RepresentativeMatrix,
    SinglePhotonCounts,
    assemble,
    assemble_lossy,
    beam_splitter,
    canonicalize,
    distance_to_class,
    identity_representative,
    random_haar_unitary,
    random_representative,
    representative_from_unitary,
    wrap_angle,
)
from lochar.spectra import gaussian_spectrum

seeds = st.integers(0, 2**31 - 1)
sizes = st.integers(2, 6)


def random_diag(m, rng):
    return np.diag(np.exp(1j * rng.uniform(-np.pi, np.pi, m)))


# -- assemble_lossy ------------------------------------------------------------------


def test_identity_assembles_to_identity():
    rep = identity_representative(3)
    U = assemble_lossy(rep, LossModel.lossless(3))
    np.testing.assert_allclose(U, np.eye(3), atol=0)


def test_balanced_beam_splitter_parameterization():
    rep = representative_from_unitary(beam_splitter(np.pi / 4))
    # class representative of [[1, i], [i, 1]]/sqrt(2) is the real-bordered Hadamard form
    np.testing.assert_allclose(assemble(rep), np.array([[1, 1], [1, -1]]) / np.sqrt(2), atol=1e-15)
    # diag(1, i) H diag(1, i) gives back [[1, i], [i, 1]] / sqrt(2)
    D = np.diag([1, 1j])
    np.testing.assert_allclose(D @ assemble(rep) @ D, np.array([[1, 1j], [1j, 1]]) / np.sqrt(2),
                               atol=1e-15)


def test_zero_transmission_zeroes_row(rng):
    rep = random_representative(4, rng)
    loss = LossModel(np.array([1.0, 0.0, 1.0, 1.0]), np.ones(4), np.zeros(4), np.zeros(4))
    U = assemble_lossy(rep, loss)
    assert np.all(U[1] == 0)
    assert np.all(np.abs(U[[0, 2, 3]]) > 0)


def test_assemble_lossy_entry_formula(rng):
    rep = random_representative(3, rng)
    loss = LossModel.random(3, rng)
    U = assemble_lossy(rep, loss)
    i, j = 2, 1
    expected = (np.exp(1j * loss.phi[i]) * np.sqrt(loss.kappa[i] * rep.lam[i]) * rep.alpha[i, j]
                * np.exp(1j * rep.theta[i, j]) * np.sqrt(rep.mu[j] * loss.nu[j])
                * np.exp(1j * loss.xi[j]))
    assert U[i, j] == pytest.approx(expected, rel=1e-14)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        assemble_lossy(identity_representative(3), LossModel.lossless(4))


# -- types ---------------------------------------------------------------------------


def test_representative_rejects_non_real_border():
    alpha = np.ones((2, 2))
    theta = np.array([[0.0, 0.3], [0.0, 1.0]])
    with pytest.raises(ValueError):
        RepresentativeMatrix(alpha, theta, np.ones(2), np.ones(2))


def test_loss_model_rejects_bad_transmission():
    with pytest.raises(ValueError):
        LossModel([1.2, 1.0], [1, 1], [0, 0], [0, 0])


def test_curve_validation():
    with pytest.raises(ValueError):
        CoincidenceCurve((1, 1, 1, 2), [0, 1], [1, 1])
    with pytest.raises(ValueError):
        CoincidenceCurve((1, 2, 1, 2), [1, 0], [1, 1])
    with pytest.raises(ValueError):
        CoincidenceCurve((1, 2, 1, 2), [0, 1], [1, -1])


def test_single_counts_need_two_repetitions():
    with pytest.raises(ValueError):
        SinglePhotonCounts(np.ones((2, 2, 1)))


def test_records_are_immutable(rng):
    rep = random_representative(3, rng)
    with pytest.raises(ValueError):
        rep.alpha[1, 1] = 0.0


# -- canonicalize --------------------------------------------------------------------


def test_canonicalize_identity_is_degenerate():
    # the identity has zeros in its first row; it must be relabeled first
    with pytest.raises(DegeneratePort):
        canonicalize(np.eye(3))


def test_canonicalize_global_phase(rng):
    U = random_haar_unitary(4, rng)
    a = canonicalize(U)
    b = canonicalize(np.exp(0.7j) * U)
    np.testing.assert_allclose(a.alpha, b.alpha, atol=1e-12)
    np.testing.assert_allclose(a.theta, b.theta, atol=1e-12)


def test_canonicalize_recovers_diagonals(rng):
    # oracle: extract the phases of the first row and column directly
    U = random_haar_unitary(4, rng)
    R = assemble(canonicalize(U, fix_conjugation=False))
    d1 = np.exp(-1j * np.angle(U[:, 0]))
    d2 = np.exp(-1j * (np.angle(U[0, :]) - np.angle(U[0, 0])))
    np.testing.assert_allclose(np.diag(d1) @ U @ np.diag(d2), R, atol=1e-12)
    assert np.all(np.abs(R[0].imag) < 1e-14) and np.all(R[0].real > 0)
    assert np.all(np.abs(R[:, 0].imag) < 1e-14) and np.all(R[:, 0].real > 0)


def test_canonicalize_fixes_theta22_sign(rng):
    for _ in range(20):
        rep = canonicalize(random_haar_unitary(3, rng))
        assert rep.theta[1, 1] >= 0


@given(seeds, sizes)
def test_round_trip(seed, m):
    rep = random_representative(m, seed)
    back = canonicalize(assemble(rep))
    np.testing.assert_allclose(back.alpha, rep.alpha, atol=1e-10)
    np.testing.assert_allclose(wrap_angle(back.theta - rep.theta), 0, atol=1e-10)
    np.testing.assert_allclose(back.lam, rep.lam, atol=1e-10)
    np.testing.assert_allclose(back.mu, rep.mu, atol=1e-10)


@given(seeds, sizes)
def test_idempotence(seed, m):
    U = random_haar_unitary(m, seed)
    once = canonicalize(U)
    twice = canonicalize(assemble(once))
    np.testing.assert_allclose(assemble(once), assemble(twice), atol=1e-12)


# -- Haar sampling -------------------------------------------------------------------


def test_haar_unitary_and_deterministic():
    U = random_haar_unitary(2, 5)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(2), atol=1e-12)
    assert np.array_equal(random_haar_unitary(4, 9), random_haar_unitary(4, 9))


def test_haar_first_moment():
    # |U_11|^2 of a Haar unitary is Beta(1, m-1): mean 1/m, variance (m-1)/(m^2 (m+1))
    m, n = 5, 1000
    rng = np.random.default_rng(0)
    x = np.array([abs(random_haar_unitary(m, rng)[0, 0]) ** 2 for _ in range(n)])
    se = np.sqrt((m - 1) / (m**2 * (m + 1)) / n)
    assert abs(x.mean() - 1 / m) < 3 * se


def test_haar_rejects_small_m():
    with pytest.raises(ValueError):
        random_haar_unitary(1)


# -- distance ------------------------------------------------------------------------


@given(seeds, sizes)
def test_distance_zero_on_class(seed, m):
    rng = np.random.default_rng(seed)
    U = random_haar_unitary(m, rng)
    V = random_diag(m, rng) @ U @ random_diag(m, rng).conj().T
    assert distance_to_class(U, U) < 1e-12
    assert distance_to_class(U, V) < 1e-10


def test_distance_conjugation_invariant(rng):
    U = random_haar_unitary(4, rng)
    assert distance_to_class(U.conj(), U) < 1e-12


def test_distance_monotone_in_perturbation(rng):
    U = random_haar_unitary(4, rng)
    G = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    d = [distance_to_class(U + eps * G, U) for eps in np.logspace(-1, -6, 10)]
    assert all(x > 0 for x in d)
    assert all(a > b for a, b in zip(d, d[1:]))


def test_distance_continuous_across_theta22_zero():
    # two matrices on either side of theta_22 = 0 are close, not 2-3 apart
    U = random_haar_unitary(3, 4)
    rep = canonicalize(U)
    th = np.array(rep.theta)
    th[1, 1] = 0.001
    a = RepresentativeMatrix(rep.alpha, th, rep.lam, rep.mu)
    th2 = th.copy()
    th2[1, 1] = -0.001
    b = RepresentativeMatrix(rep.alpha, th2, rep.lam, rep.mu)
    assert distance_to_class(assemble(a), assemble(b)) < 0.01


def test_distance_shape_mismatch():
    with pytest.raises(DimensionMismatch):
        distance_to_class(np.eye(2), np.eye(3))


# -- dephasing invariance ---------------------------------------------------------------


@given(seeds)
def test_dephasing_invariance(seed):
    rng = np.random.default_rng(seed)
    rep = random_representative(3, rng)
    k, n = rng.uniform(0.3, 1, 3), rng.uniform(0.3, 1, 3)
    a = LossModel(k, n, rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3))
    b = LossModel(k, n, rng.uniform(-3, 3, 3), rng.uniform(-3, 3, 3))
    np.testing.assert_allclose(single_photon_probs(rep, a), single_photon_probs(rep, b),
                               rtol=1e-12)
    np.testing.assert_allclose(np.abs(assemble_lossy(rep, a)) ** 2,
                               np.abs(assemble_lossy(rep, b)) ** 2, rtol=1e-12)
    # coincidence curves see only rep, not phi/xi; check the submatrix permanent directly
    Ua, Ub = assemble_lossy(rep, a), assemble_lossy(rep, b)
    sub = np.ix_([0, 2], [1, 2])
    perm = lambda M: abs(M[0, 0] * M[1, 1] + M[0, 1] * M[1, 0]) ** 2  # noqa: E731
    assert perm(Ua[sub]) == pytest.approx(perm(Ub[sub]), rel=1e-12)
    spec = gaussian_spectrum()
    tau = np.linspace(-3, 3, 7)
    params = SubmatrixParams.from_rep(rep, (1, 3, 2, 3))
    c = coincidence_curve(spec, spec, tau, params, 1.0)
    assert np.all(c >= 0)
