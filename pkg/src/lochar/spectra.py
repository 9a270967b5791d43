"""Sampled spectral amplitudes and the trapezoidal rule they are integrated with."""

from dataclasses import dataclass

import numpy as np

from .errors import LocharError

TOL_NORM = 1e-10


def trapezoid_weights(x):
    """Weights ``w`` with ``w @ f == np.trapezoid(f, x)`` for any samples ``f``."""
    x = np.asarray(x, dtype=float)
    d = np.diff(x)
    w = np.zeros_like(x)
    w[:-1] += d / 2
    w[1:] += d / 2
    return w


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Spectral amplitude ``f(omega)`` sampled on an increasing grid.

    Frequencies are in an arbitrary but consistent unit; delays are in the
    inverse unit.
    """

    omega: np.ndarray
    amplitude: np.ndarray

    def __post_init__(self):
        omega = np.array(self.omega, dtype=float)
        amp = np.array(self.amplitude, dtype=float)
        if omega.ndim != 1 or omega.shape != amp.shape:
            raise ValueError("omega and amplitude must be 1-D arrays of equal length")
        if omega.size < 2:
            raise ValueError("a spectrum needs at least two samples")
        if np.any(np.diff(omega) <= 0):
            raise ValueError("omega must be strictly increasing")
        if np.any(amp < 0) or not np.all(np.isfinite(amp)):
            raise ValueError("amplitude must be finite and non-negative")
        omega.setflags(write=False)
        amp.setflags(write=False)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "amplitude", amp)

    @property
    def norm2(self):
        """Trapezoidal integral of ``f**2``."""
        return float(trapezoid_weights(self.omega) @ self.amplitude**2)

    def is_normalized(self, tol=TOL_NORM):
        return abs(self.norm2 - 1.0) < tol

    def normalize(self):
        n2 = self.norm2
        if n2 <= 0:
            raise LocharError("cannot normalize an all-zero spectrum")
        return Spectrum(self.omega, self.amplitude / np.sqrt(n2))

    def rms_width(self):
        """Standard deviation of the intensity ``f**2`` viewed as a density."""
        w = trapezoid_weights(self.omega) * self.amplitude**2
        w = w / w.sum()
        mean = w @ self.omega
        return float(np.sqrt(w @ (self.omega - mean) ** 2))

    def resample(self, omega):
        amp = np.interp(omega, self.omega, self.amplitude, left=0.0, right=0.0)
        return Spectrum(omega, amp)


def common_grid(s1, s2):
    """Bring two spectra onto one grid.

    Identical grids pass through. Otherwise the finer spectrum is linearly
    interpolated onto the coarser grid.
    """
    if s1.omega.shape == s2.omega.shape and np.array_equal(s1.omega, s2.omega):
        return s1, s2
    step1 = np.mean(np.diff(s1.omega))
    step2 = np.mean(np.diff(s2.omega))
    if step1 >= step2:
        return s1, s2.resample(s1.omega)
    return s1.resample(s2.omega), s2


def default_grid(center=0.0, width=1.0, k=121, span=6.0):
    return np.linspace(center - span * width, center + span * width, k)


def gaussian_spectrum(center=0.0, width=1.0, k=121, span=6.0, omega=None):
    """Gaussian amplitude whose intensity ``f**2`` has standard deviation ``width``."""
    if omega is None:
        omega = default_grid(center, width, k, span)
    amp = np.exp(-((omega - center) ** 2) / (4.0 * width**2))
    return Spectrum(omega, amp).normalize()


def sinc_spectrum(center=0.0, width=1.0, k=161, span=8.0, omega=None):
    """``|sinc|`` amplitude, the usual phase-matching profile of pair sources."""
    if omega is None:
        omega = default_grid(center, width, k, span)
    amp = np.abs(np.sinc((omega - center) / (2.0 * width)))
    return Spectrum(omega, amp).normalize()


def measured_like_spectrum(center=0.0, width=1.0, k=161, span=7.0, rng=None,
                           jitter=0.0, omega=None):
    """Asymmetric multi-lobe intensity with ripple, resembling a measured spectrum.

    ``jitter`` perturbs lobe positions and weights (relative units) using
    ``rng`` so different ports can carry slightly different spectra.
    """
    if omega is None:
        omega = default_grid(center, width, k, span)
    rng = np.random.default_rng(rng)
    x = (omega - center) / width
    lobes = [(1.0, 0.0, 0.6), (0.7, 2.2, 0.4), (0.3, -2.0, 0.3)]
    intensity = np.zeros_like(x)
    for weight, pos, sig in lobes:
        if jitter:
            weight *= 1.0 + jitter * rng.standard_normal()
            pos += jitter * rng.standard_normal()
        intensity += abs(weight) * np.exp(-((x - pos) ** 2) / (2 * sig**2))
    intensity *= 1.0 + 0.1 * np.sin(6.0 * x)
    return Spectrum(omega, np.sqrt(np.clip(intensity, 0.0, None))).normalize()


SPECTRUM_FACTORIES = {
    "gaussian": gaussian_spectrum,
    "sinc": sinc_spectrum,
    "measured": measured_like_spectrum,
}
