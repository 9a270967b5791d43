"""End-to-end characterization: calibration, amplitudes, arguments, unitary."""

from dataclasses import dataclass, field

import numpy as np

from .estimation import (
    PIPELINE_TOL_ZERO_ANGLE,
    THETA_THRESHOLD,
    calibrate_gamma,
    estimate_amplitudes,
    estimate_arguments,
    estimate_bs_angle,
    warm_start,
)
from .model import check_gamma
from .reconstruction import max_likely_unitary
from .simulator import DatasetSource, standard_tuples


@dataclass
class PipelineConfig:
    """Options of ``characterize``.

    Parameters
    ----------
    theta_threshold : float
        Stability margin below which a sign is re-resolved.
    envelope_kind : {"spectral", "gaussian"}
        Fitting curves computed from the spectra, or Gaussian curves of
        matching width.
    calibrate : bool
        Fit the mode-matching parameter on the calibration curve; otherwise
        ``gamma_default`` is used.
    mitigate : bool
        Relabeling and threshold re-resolution of unstable signs.
    strict : bool
        Raise on unstable signs and non-positive diagonals.
    vartheta_cal : float
        Nominal calibration splitter angle, used when no calibration singles exist.
    tol_zero_angle : float
        Argument magnitudes below this take a positive sign.
    """

    theta_threshold: float = THETA_THRESHOLD
    envelope_kind: str = "spectral"
    calibrate: bool = True
    mitigate: bool = True
    strict: bool = False
    gamma_default: float = 1.0
    vartheta_cal: float = np.pi / 4
    tol_zero_angle: float = PIPELINE_TOL_ZERO_ANGLE

    def to_dict(self):
        return dict(self.__dict__)


@dataclass
class Dataset:
    """Everything a characterization consumes (no ground truth)."""

    singles: object
    source: object
    spectra: tuple
    calibration: object = None
    calibration_singles: object = None

    @property
    def m(self):
        return self.singles.m

    def validate(self):
        """Check that the standard curve set is present."""
        missing = [t for t in standard_tuples(self.m) if not self.source.available(t)]
        return missing


@dataclass
class ReconstructionReport:
    """Result of a characterization, optionally extended by the bootstrap."""

    W: np.ndarray
    gamma_hat: float
    vartheta_hat: float
    amplitudes: object
    arguments: object
    calibration_fit: object = None
    diagnostics: dict = field(default_factory=dict)
    sigma_re: np.ndarray = None
    sigma_im: np.ndarray = None
    sigma_gamma: float = None
    bootstrap_samples: int = 0

    @property
    def m(self):
        return self.W.shape[0]

    def to_dict(self):
        out = {
            "m": int(self.m),
            "W": {"re": self.W.real.tolist(), "im": self.W.imag.tolist()},
            "gamma_hat": float(self.gamma_hat),
            "vartheta_hat": float(self.vartheta_hat),
            "alpha_hat": self.amplitudes.alpha_hat.tolist(),
            "sigma_alpha": self.amplitudes.sigma_alpha.tolist(),
            "diagnostics": self.diagnostics,
            "bootstrap_samples": int(self.bootstrap_samples),
        }
        out.update(self.arguments.to_dict())
        if self.sigma_re is not None:
            out["sigma_re"] = self.sigma_re.tolist()
            out["sigma_im"] = self.sigma_im.tolist()
            out["sigma_gamma"] = float(self.sigma_gamma)
        return out


def _fit_diag(results):
    return {",".join(map(str, k)): v.diagnostics() for k, v in sorted(results.items())}


def characterize(dataset, config=None, permutation=None, alternatives=None, rng=None,
                 warm=None):
    """Run every stage on one dataset.

    ``permutation`` and ``alternatives`` replay the sign-resolution choices
    of an earlier run (see ``estimate_arguments``). ``rng`` resamples the
    repetitions of the single-photon counts, and ``warm`` (an earlier
    ReconstructionReport) adds that report's solutions as fitting starts; both
    are used by the bootstrap.
    """
    config = config or PipelineConfig()
    spectra = dataset.spectra
    cal_fit = None
    vartheta = config.vartheta_cal
    if dataset.calibration_singles is not None:
        vartheta = estimate_bs_angle(estimate_amplitudes(dataset.calibration_singles, rng))
    if config.calibrate:
        if dataset.calibration is None:
            raise ValueError("calibration requested but no calibration curve present")
        cal_starts = ()
        if warm is not None and warm.calibration_fit is not None:
            cal_starts = warm_start(warm.calibration_fit)
        gamma, cal_fit = calibrate_gamma(dataset.calibration, spectra[0], spectra[1], vartheta,
                                         config.envelope_kind, cal_starts)
    else:
        gamma = check_gamma(config.gamma_default)
    amps = estimate_amplitudes(dataset.singles, rng)
    args = estimate_arguments(
        dataset.source, amps, gamma, spectra,
        theta_threshold=config.theta_threshold,
        mitigate=config.mitigate,
        envelope_kind=config.envelope_kind,
        strict=config.strict,
        permutation=permutation,
        alternatives=alternatives,
        tol_zero_angle=config.tol_zero_angle,
        warm=warm.arguments.fits if warm is not None else None,
    )
    W, info = max_likely_unitary(amps.alpha_hat, args.theta_hat, strict=config.strict)
    diagnostics = {
        "fits": _fit_diag(args.fits),
        "calibration_fit": cal_fit.diagnostics() if cal_fit is not None else None,
        "diagonal_solve": {
            "cond_mu": info["cond_mu"],
            "cond_lam": info["cond_lam"],
            "clamped": [list(c) for c in info["clamped"]],
            "unitarity_defect": info["defect"],
        },
        "config": config.to_dict(),
    }
    return ReconstructionReport(
        W=W,
        gamma_hat=float(gamma),
        vartheta_hat=float(vartheta),
        amplitudes=amps,
        arguments=args,
        calibration_fit=cal_fit,
        diagnostics=diagnostics,
    )


def dataset_from_simulation(plan, data, source=None):
    """Wrap simulator output as a Dataset (drops the ground truth)."""
    return Dataset(
        singles=data.singles,
        source=source if source is not None else DatasetSource(data.curves),
        spectra=plan.spectra,
        calibration=data.calibration,
        calibration_singles=data.calibration_singles,
    )
