"""Forward model: single-photon probabilities and two-photon coincidence curves.

For real spectral amplitudes the two-photon cross integral factorizes. With
``g(w) = f_j(w) f_j'(w)`` and ``G(t) = sum_a w_a g(w_a) exp(i w_a t)`` on the
trapezoidal weights ``w_a``,

    I2(t) = |G(t)|**2 * cos(phi),

so a curve costs O(k l) instead of O(k**2 l). ``coincidence_curve_direct``
keeps the double sum as an independent check.
"""

from dataclasses import dataclass

import numpy as np

from .kernels import coherence_envelope
from .model import check_gamma, wrap_angle
from .spectra import TOL_NORM, common_grid, trapezoid_weights


@dataclass(frozen=True)
class SubmatrixParams:
    """Amplitudes and arguments of the 2x2 submatrix on outputs (i, i'), inputs (j, j').

    Both tuples are ordered ``(ij, ij', i'j, i'j')``.
    """

    amps: tuple
    phases: tuple

    def __post_init__(self):
        amps = tuple(float(a) for a in self.amps)
        phases = tuple(float(p) for p in self.phases)
        if len(amps) != 4 or len(phases) != 4:
            raise ValueError("need exactly four amplitudes and four phases")
        if any(a < 0 for a in amps):
            raise ValueError("amplitudes must be non-negative")
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "phases", phases)

    @classmethod
    def from_rep(cls, rep, ports):
        """Pick the submatrix of ``rep`` for 1-based ``ports = (i, i', j, j')``."""
        i, ip, j, jp = (p - 1 for p in ports)
        idx = ((i, j), (i, jp), (ip, j), (ip, jp))
        return cls(tuple(rep.alpha[r, c] for r, c in idx), tuple(rep.theta[r, c] for r, c in idx))

    @property
    def direct_weight(self):
        """``a_ij^2 a_i'j'^2 + a_ij'^2 a_i'j^2``, the distinguishable-photon term."""
        a, b, c, d = self.amps
        return a * a * d * d + b * b * c * c

    @property
    def cross_weight(self):
        a, b, c, d = self.amps
        return a * b * c * d

    @property
    def net_phase(self):
        """``theta_ij - theta_ij' - theta_i'j + theta_i'j'`` wrapped to (-pi, pi]."""
        p = self.phases
        return float(wrap_angle(p[0] - p[1] - p[2] + p[3]))


def single_photon_prob(rep, loss, i, j):
    """Probability that a photon entering input ``j`` leaves by output ``i`` (1-based)."""
    m = rep.m
    if not (1 <= i <= m and 1 <= j <= m):
        raise IndexError(f"port ({i}, {j}) out of range for m={m}")
    a, b = i - 1, j - 1
    return float(loss.kappa[a] * rep.lam[a] * rep.alpha[a, b] ** 2 * rep.mu[b] * loss.nu[b])


def single_photon_probs(rep, loss):
    """All ``P_ij`` as an m x m array."""
    return (loss.kappa * rep.lam)[:, None] * rep.alpha**2 * (rep.mu * loss.nu)[None, :]


def loss_factor(rep, loss, ports):
    """Multiplicative prefactor of a coincidence curve from losses and diagonals."""
    i, ip, j, jp = (p - 1 for p in ports)
    out = loss.kappa[i] * loss.kappa[ip] * rep.lam[i] * rep.lam[ip]
    inp = rep.mu[j] * rep.mu[jp] * loss.nu[j] * loss.nu[jp]
    return float(out * inp)


def _check_normalized(spec, tol):
    if not spec.is_normalized(tol):
        raise ValueError(f"spectrum is not normalized (norm^2 = {spec.norm2:.12g})")


class SpectralEnvelope:
    """Interference envelope ``|G(t)|**2`` computed from two sampled spectra.

    Parameters
    ----------
    spec1, spec2 : Spectrum
        Normalized spectra of the two input photons.
    tol : float
        Normalization tolerance.

    Attributes
    ----------
    direct_integral : float
        ``I1 = int f1^2 * int f2^2`` on the common grid.
    """

    def __init__(self, spec1, spec2, tol=TOL_NORM):
        _check_normalized(spec1, tol)
        _check_normalized(spec2, tol)
        s1, s2 = common_grid(spec1, spec2)
        w = trapezoid_weights(s1.omega)
        self.omega = s1.omega
        self.weights = w * s1.amplitude * s2.amplitude
        self.direct_integral = float((w @ s1.amplitude**2) * (w @ s2.amplitude**2))

    def __call__(self, t):
        return coherence_envelope(self.omega, self.weights, t)

    @property
    def peak(self):
        return float(self.weights.sum() ** 2)

    def frequency_variance(self):
        """Variance of ``omega`` under the density proportional to ``f1 f2``."""
        p = self.weights / self.weights.sum()
        mean = p @ self.omega
        return float(p @ (self.omega - mean) ** 2)

    def gaussian(self):
        """Gaussian envelope with the same peak and second moment."""
        return GaussianEnvelope(self.peak, self.frequency_variance(), self.direct_integral)


class GaussianEnvelope:
    """``peak * exp(-variance * t**2)``: the envelope of Gaussian spectra.

    Used as the conventional Gaussian fitting curve; exact when both spectra
    are Gaussian.
    """

    def __init__(self, peak, variance, direct_integral=1.0):
        self.peak = float(peak)
        self.variance = float(variance)
        self.direct_integral = float(direct_integral)

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return self.peak * np.exp(-self.variance * t * t)


def make_envelope(spec1, spec2, kind="spectral", tol=TOL_NORM):
    env = SpectralEnvelope(spec1, spec2, tol)
    if kind == "spectral":
        return env
    if kind == "gaussian":
        return env.gaussian()
    raise ValueError(f"unknown envelope kind {kind!r}")


def curve_from_envelope(envelope, taus, params, gamma):
    """Coincidence curve for a prepared envelope (see ``coincidence_curve``)."""
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size == 0:
        raise ValueError("empty delay grid")
    gamma = check_gamma(gamma)
    base = params.direct_weight * envelope.direct_integral
    cross = 2.0 * gamma * params.cross_weight * np.cos(params.net_phase)
    out = base + cross * envelope(taus)
    # tiny negative values only arise from rounding at a perfect dip
    return np.clip(out, 0.0, None)


def coincidence_curve(spec1, spec2, taus, params, gamma, tol=TOL_NORM):
    """Expected coincidence rate versus delay, without the loss prefactor.

    Parameters
    ----------
    spec1, spec2 : Spectrum
        Normalized spectra entering inputs j and j'.
    taus : array_like
        Delay grid (inverse frequency units), at least one point.
    params : SubmatrixParams
        Submatrix of the representative matrix.
    gamma : float
        Mode-matching parameter in [0, 1].

    Returns
    -------
    ndarray
        ``P * I1 + 2 gamma Q * I2(tau)``.
    """
    return curve_from_envelope(SpectralEnvelope(spec1, spec2, tol), taus, params, gamma)


def coincidence_curve_direct(spec1, spec2, taus, params, gamma, tol=TOL_NORM):
    """Same quantity as ``coincidence_curve`` via the full double trapezoid sum."""
    _check_normalized(spec1, tol)
    _check_normalized(spec2, tol)
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    if taus.size == 0:
        raise ValueError("empty delay grid")
    gamma = check_gamma(gamma)
    s1, s2 = common_grid(spec1, spec2)
    w = trapezoid_weights(s1.omega)
    f1, f2 = s1.amplitude, s2.amplitude
    ww = np.outer(w, w)
    i1 = np.sum(ww * np.outer(f1**2, f2**2))
    cross = ww * np.outer(f1 * f2, f2 * f1)
    dw = s1.omega[None, :] - s1.omega[:, None]
    phase = params.net_phase
    i2 = np.array([np.sum(cross * np.cos(dw * t + phase)) for t in taus])
    return params.direct_weight * i1 + 2.0 * gamma * params.cross_weight * i2


def baseline(curve):
    """Large-delay level estimated from the two end points."""
    c = np.asarray(curve, dtype=float)
    return 0.5 * (c[0] + c[-1])


def extremum_index(curve):
    c = np.asarray(curve, dtype=float)
    return int(np.argmax(np.abs(c - c.mean())))


def visibility(curve):
    """Relative depth of the dip (or height of the peak) of a curve.

    The baseline is the mean of the two end points and the extremum is the
    point farthest from the curve mean.
    """
    c = np.asarray(curve, dtype=float)
    if c.size == 0:
        raise ValueError("empty curve")
    base = baseline(c)
    if base <= 0:
        raise ValueError("curve baseline is zero")
    return float(abs(base - c[extremum_index(c)]) / base)


def beam_splitter_visibility(vartheta, gamma):
    """Closed-form visibility of a lossless splitter with identical spectra."""
    c2, s2 = np.cos(vartheta) ** 2, np.sin(vartheta) ** 2
    return 2.0 * gamma * c2 * s2 / (c2 * c2 + s2 * s2)


def beam_splitter_params(vartheta):
    """Submatrix parameters of the splitter ``[[c, i s], [i s, c]]``."""
    c, s = np.cos(vartheta), np.sin(vartheta)
    return SubmatrixParams((c, s, s, c), (0.0, np.pi / 2, np.pi / 2, 0.0))
