"""Characterization of lossy linear-optical interferometers from one- and two-photon data."""

from .bootstrap import BootstrapResult, bootstrap
from .coincidence import SubmatrixParams, coincidence_curve, single_photon_prob
from .errors import (
    BootstrapUnstable,
    DegeneratePort,
    DimensionMismatch,
    FitFailure,
    IncompleteAcquisition,
    LocharError,
    MissingCurve,
    NegativeDiagonal,
    SingularSystem,
    UnstableSign,
    ZeroCountChannel,
)
from .estimation import calibrate_gamma, estimate_amplitudes, estimate_arguments, sign_calc
from .fitting import FitProblem, FitResult, fit, normalized_residuals
from .model import (
    CoincidenceCurve,
    LossModel,
    RepresentativeMatrix,
    SinglePhotonCounts,
    assemble,
    assemble_lossy,
    canonicalize,
    distance_to_class,
    random_haar_unitary,
)
from .pipeline import Dataset, PipelineConfig, ReconstructionReport, characterize
from .reconstruction import max_likely_unitary, nearest_unitary, solve_diagonals
from .simulator import (
    ExperimentPlan,
    SimulatedSource,
    make_plan,
    simulate_coincidence,
    simulate_direct,
    simulate_scattershot,
)
from .spectra import Spectrum, gaussian_spectrum, measured_like_spectrum, sinc_spectrum

__version__ = "0.1.0"

__all__ = [
    "BootstrapResult",
    "BootstrapUnstable",
    "CoincidenceCurve",
    "Dataset",
    "DegeneratePort",
    "DimensionMismatch",
    "ExperimentPlan",
    "FitFailure",
    "FitProblem",
    "FitResult",
    "IncompleteAcquisition",
    "LocharError",
    "LossModel",
    "MissingCurve",
    "NegativeDiagonal",
    "PipelineConfig",
    "ReconstructionReport",
    "RepresentativeMatrix",
    "SimulatedSource",
    "SinglePhotonCounts",
    "SingularSystem",
    "Spectrum",
    "SubmatrixParams",
    "UnstableSign",
    "ZeroCountChannel",
    "assemble",
    "assemble_lossy",
    "bootstrap",
    "calibrate_gamma",
    "canonicalize",
    "characterize",
    "coincidence_curve",
    "distance_to_class",
    "estimate_amplitudes",
    "estimate_arguments",
    "fit",
    "gaussian_spectrum",
    "make_plan",
    "max_likely_unitary",
    "measured_like_spectrum",
    "nearest_unitary",
    "normalized_residuals",
    "random_haar_unitary",
    "sign_calc",
    "simulate_coincidence",
    "simulate_direct",
    "simulate_scattershot",
    "sinc_spectrum",
    "single_photon_prob",
    "solve_diagonals",
]
