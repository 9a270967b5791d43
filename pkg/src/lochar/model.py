"""Interferometer parameterization, losses and measurement record types.

Port labels are 1-based in every public signature and in port tuples,
following the usual (output i, output i', input j, input j') notation.
Arrays are indexed from 0 internally.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePort, DimensionMismatch

TOL_UNITARY = 1e-8
TOL_ZERO = 1e-12


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def wrap_angle(theta):
    """Map angles into (-pi, pi]."""
    w = np.angle(np.exp(1j * np.asarray(theta, dtype=float)))
    return np.where(w <= -np.pi, np.pi, w)


@dataclass(frozen=True, eq=False)
class RepresentativeMatrix:
    """Real-bordered class representative ``U = L A M``.

    ``U[i, j] = sqrt(lam[i]) * alpha[i, j] * exp(1j * theta[i, j]) * sqrt(mu[j])``
    with the first row and column of ``alpha`` equal to one and of ``theta``
    equal to zero, and ``lam[0] == 1``.
    """

    alpha: np.ndarray
    theta: np.ndarray
    lam: np.ndarray
    mu: np.ndarray

    def __post_init__(self):
        alpha = _frozen(self.alpha)
        theta = _frozen(self.theta)
        lam = _frozen(self.lam)
        mu = _frozen(self.mu)
        m = alpha.shape[0]
        if alpha.shape != (m, m) or theta.shape != (m, m):
            raise DimensionMismatch("alpha and theta must be square and equal-sized")
        if lam.shape != (m,) or mu.shape != (m,):
            raise DimensionMismatch("lam and mu must have length m")
        if np.any(alpha < 0):
            raise ValueError("amplitudes must be non-negative")
        if not (np.allclose(alpha[0], 1) and np.allclose(alpha[:, 0], 1)):
            raise ValueError("first row and column of alpha must be 1")
        if not (np.allclose(theta[0], 0) and np.allclose(theta[:, 0], 0)):
            raise ValueError("first row and column of theta must be 0")
        if np.any(theta <= -np.pi - 1e-12) or np.any(theta > np.pi + 1e-12):
            raise ValueError("arguments must lie in (-pi, pi]")
        if np.any(lam <= 0) or np.any(mu <= 0) or not np.isclose(lam[0], 1.0):
            raise ValueError("lam, mu must be positive with lam[0] == 1")
        for name, value in (("alpha", alpha), ("theta", theta), ("lam", lam), ("mu", mu)):
            object.__setattr__(self, name, value)

    @classmethod
    def unchecked(cls, alpha, theta, lam, mu):
        """Build without validating the real border.

        Needed for physical matrices with zeros in row or column 1 (such as
        the identity) which have no real-bordered representative but can
        still be simulated.
        """
        obj = object.__new__(cls)
        for name, value in (("alpha", alpha), ("theta", theta), ("lam", lam), ("mu", mu)):
            object.__setattr__(obj, name, _frozen(value))
        return obj

    @property
    def m(self):
        return self.alpha.shape[0]

    def matrix(self):
        return assemble(self)

    def is_unitary(self, tol=TOL_UNITARY):
        u = self.matrix()
        return np.linalg.norm(u.conj().T @ u - np.eye(self.m)) < tol


@dataclass(frozen=True, eq=False)
class LossModel:
    """Port transmissions and dephasings.

    ``kappa``/``phi`` act on outputs, ``nu``/``xi`` on inputs.
    """

    kappa: np.ndarray
    nu: np.ndarray
    phi: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        kappa, nu, phi, xi = (_frozen(v) for v in (self.kappa, self.nu, self.phi, self.xi))
        m = kappa.shape[0]
        if any(v.shape != (m,) for v in (nu, phi, xi)):
            raise DimensionMismatch("all loss vectors must have the same length")
        for v in (kappa, nu):
            if np.any(v < 0) or np.any(v > 1):
                raise ValueError("transmissions must lie in [0, 1]")
        for name, value in (("kappa", kappa), ("nu", nu), ("phi", phi), ("xi", xi)):
            object.__setattr__(self, name, value)

    @property
    def m(self):
        return self.kappa.shape[0]

    @classmethod
    def lossless(cls, m):
        return cls(np.ones(m), np.ones(m), np.zeros(m), np.zeros(m))

    @classmethod
    def random(cls, m, rng=None, low=0.5):
        """Transmissions uniform in ``[low, 1]`` and uniform dephasings."""
        rng = np.random.default_rng(rng)
        return cls(
            rng.uniform(low, 1.0, m),
            rng.uniform(low, 1.0, m),
            rng.uniform(-np.pi, np.pi, m),
            rng.uniform(-np.pi, np.pi, m),
        )


@dataclass(frozen=True, eq=False)
class CoincidenceCurve:
    """Coincidence counts between outputs ``(i, i')`` for inputs ``(j, j')``."""

    ports: tuple
    tau: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        ports = tuple(int(p) for p in self.ports)
        if len(ports) != 4 or ports[0] == ports[1] or ports[2] == ports[3]:
            raise ValueError(f"invalid port tuple {self.ports}")
        tau = _frozen(self.tau)
        counts = _frozen(self.counts)
        if tau.ndim != 1 or tau.shape != counts.shape:
            raise ValueError("tau and counts must be 1-D arrays of equal length")
        if tau.size > 1 and np.any(np.diff(tau) <= 0):
            raise ValueError("tau must be strictly increasing")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise ValueError("counts must be finite and non-negative")
        object.__setattr__(self, "ports", ports)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "counts", counts)

    @property
    def outputs(self):
        return self.ports[:2]

    @property
    def inputs(self):
        return self.ports[2:]

    def with_counts(self, counts):
        return CoincidenceCurve(self.ports, self.tau, counts)


@dataclass(frozen=True, eq=False)
class SinglePhotonCounts:
    """Detection counts ``counts[i, j, b]``: output i, input j, repetition b."""

    counts: np.ndarray

    def __post_init__(self):
        counts = np.array(self.counts)
        if counts.ndim != 3 or counts.shape[0] != counts.shape[1]:
            raise ValueError("counts must have shape (m, m, B)")
        if counts.shape[2] < 2:
            raise ValueError("at least two repetitions are required")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)

    @property
    def m(self):
        return self.counts.shape[0]

    @property
    def B(self):
        return self.counts.shape[2]


def check_gamma(gamma):
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"mode-matching parameter must lie in [0, 1], got {gamma}")
    return gamma


# -- assembly and canonical form ---------------------------------------------


def assemble(rep):
    s_lam = np.sqrt(rep.lam)
    s_mu = np.sqrt(rep.mu)
    return s_lam[:, None] * rep.alpha * np.exp(1j * rep.theta) * s_mu[None, :]


def assemble_lossy(rep, loss):
    """Transformation actually effected by the lossy, dephased interferometer."""
    if rep.m != loss.m:
        raise DimensionMismatch(f"representative has m={rep.m}, loss model m={loss.m}")
    out = np.exp(1j * loss.phi) * np.sqrt(loss.kappa)
    inp = np.sqrt(loss.nu) * np.exp(1j * loss.xi)
    return out[:, None] * assemble(rep) * inp[None, :]


def canonicalize(U, tol_zero=TOL_ZERO, fix_conjugation=True):
    """Class representative of ``U`` under ``U -> D1 U D2^dagger``.

    The returned parameters assemble to a matrix with real positive first
    row and column. If the resulting ``theta[1, 1]`` is negative the whole
    matrix is complex-conjugated so that ``theta[1, 1] >= 0``, unless
    ``fix_conjugation`` is false.
    """
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise DimensionMismatch("U must be square")
    m = U.shape[0]
    border = np.concatenate([np.abs(U[0, :]), np.abs(U[:, 0])])
    if np.any(border < tol_zero):
        raise DegeneratePort("first row/column of U contains a zero entry; relabel ports")

    row_phase = np.exp(-1j * np.angle(U[:, 0]))
    col_phase = np.exp(-1j * np.angle(U[0, :])) * np.exp(1j * np.angle(U[0, 0]))
    V = row_phase[:, None] * U * col_phase[None, :]

    mag = np.abs(V)
    mu = mag[0, :] ** 2
    lam = mag[:, 0] ** 2 / mag[0, 0] ** 2
    alpha = mag / (np.sqrt(lam)[:, None] * np.sqrt(mu)[None, :])
    alpha[0, :] = 1.0
    alpha[:, 0] = 1.0
    lam[0] = 1.0

    theta = wrap_angle(np.angle(V))
    theta[0, :] = 0.0
    theta[:, 0] = 0.0
    if m >= 2 and fix_conjugation:
        if theta[1, 1] < -1e-12:
            theta = wrap_angle(-theta)
        elif theta[1, 1] < 0:
            theta[1, 1] = 0.0
    return RepresentativeMatrix(alpha, theta, lam, mu)


def canonical_matrix(U, fix_conjugation=True):
    return assemble(canonicalize(U, fix_conjugation=fix_conjugation))


def random_haar_unitary(m, seed=None):
    """Haar-random ``m x m`` unitary (QR of a complex Ginibre matrix)."""
    if m < 2:
        raise ValueError("mode count must be at least 2")
    rng = np.random.default_rng(seed)
    z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))[None, :]


def random_representative(m, seed=None):
    return canonicalize(random_haar_unitary(m, seed))


def distance_to_class(U, V):
    """Frobenius distance between the canonical forms of ``U`` and ``V``.

    The conjugation ambiguity is resolved by also comparing ``conj(U)``.
    Both sides are put in real-bordered form without the ``theta_22 >= 0``
    convention, which would make the comparison discontinuous where
    ``theta_22`` crosses zero.
    """
    U = np.asarray(U, dtype=complex)
    V = np.asarray(V, dtype=complex)
    if U.shape != V.shape:
        raise DimensionMismatch(f"shapes differ: {U.shape} vs {V.shape}")
    cv = canonical_matrix(V, fix_conjugation=False)
    cu = canonical_matrix(U, fix_conjugation=False)
    d1 = np.linalg.norm(cu - cv)
    d2 = np.linalg.norm(cu.conj() - cv)
    return float(min(d1, d2))


def beam_splitter(vartheta):
    """Beam splitter of reflectivity ``cos(vartheta)``."""
    c, s = np.cos(vartheta), np.sin(vartheta)
    return np.array([[c, 1j * s], [1j * s, c]])


def identity_representative(m):
    return RepresentativeMatrix.unchecked(np.eye(m), np.zeros((m, m)), np.ones(m), np.ones(m))


def representative_from_unitary(U):
    """RepresentativeMatrix of ``U``, tolerating zero border entries.

    Uses ``canonicalize`` when every border entry is non-zero. Otherwise the
    magnitudes and phases of ``U`` are taken as they are, which assembles
    back to ``U`` only when its border is already real and non-negative.
    """
    U = np.asarray(U, dtype=complex)
    try:
        return canonicalize(U)
    except DegeneratePort:
        mag = np.abs(U)
        return RepresentativeMatrix.unchecked(mag, np.angle(U), np.ones(len(U)), np.ones(len(U)))
