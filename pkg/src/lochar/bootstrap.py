"""Error bars on the reconstructed unitary by residual bootstrap.

Each round builds a replica dataset from the primary fits: single-photon
repetitions are resampled with replacement, and every fitted curve is
replaced by ``fit + fit * r`` with ``r`` drawn with replacement from the
normalized residuals of that fit. The replica goes through the whole
pipeline with the primary run's relabeling and sign choices replayed.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from .errors import BootstrapUnstable, LocharError
from .fitting import normalized_residuals
from .model import CoincidenceCurve
from .pipeline import Dataset, PipelineConfig, characterize
from .simulator import DatasetSource

MIN_ROUNDS = 50
MAX_DROP_FRACTION = 0.10
# normalized residuals below this are fit round-off, not noise
RESIDUAL_FLOOR = 1e-9
# points fitted below one count have meaningless relative residuals
MIN_POOL_COUNT = 1.0


def resample_curve(curve, result, rng):
    """Replica of ``curve`` built from its fit and resampled residuals.

    Only points fitted at one count or more feed the residual pool; the
    relative residual of a point near an exact zero of the fit is
    dominated by a single stray count.
    """
    r, mask = normalized_residuals(result, return_mask=True)
    r = np.where(np.abs(r) < RESIDUAL_FLOOR, 0.0, r)
    fitted = np.asarray(result.fitted, dtype=float)
    pool = r[mask & (fitted >= MIN_POOL_COUNT)]
    if pool.size == 0:
        pool = r[mask]
    drawn = pool[rng.integers(0, pool.size, fitted.size)]
    counts = np.where(mask, fitted * (1.0 + drawn), 0.0)
    return CoincidenceCurve(curve.ports, curve.tau, np.maximum(counts, 0.0))


def replica_dataset(dataset, primary, rng):
    """Resampled curves of one round; singles are resampled later, per entry."""
    curves = []
    for ports, result in sorted(primary.arguments.fits.items()):
        curves.append(resample_curve(dataset.source.get(ports), result, rng))
    calibration = dataset.calibration
    if primary.calibration_fit is not None:
        calibration = resample_curve(dataset.calibration, primary.calibration_fit, rng)
    return Dataset(
        singles=dataset.singles,
        source=DatasetSource(curves),
        spectra=dataset.spectra,
        calibration=calibration,
        calibration_singles=dataset.calibration_singles,
    )


def align_conjugation(W, reference):
    """``W`` or its conjugate, whichever is closer to ``reference``."""
    if np.linalg.norm(W.conj() - reference) < np.linalg.norm(W - reference):
        return W.conj()
    return W


def _round(dataset, config, primary, seed_seq):
    rng = np.random.default_rng(seed_seq)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            replica = replica_dataset(dataset, primary, rng)
            rep = characterize(
                replica, config,
                permutation=primary.arguments.permutation,
                alternatives=primary.arguments.alternatives,
                rng=rng,
                warm=primary,
            )
    except (LocharError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        return None, None, f"{type(exc).__name__}: {exc}"
    return align_conjugation(rep.W, primary.W), rep.gamma_hat, None


def shifted_std(x, axis=0):
    """Sample standard deviation computed about the first sample.

    Identical samples give exactly zero, which a plain two-pass formula
    does not guarantee in floating point.
    """
    x = np.asarray(x, dtype=float)
    d = x - np.take(x, [0], axis=axis)
    n = x.shape[axis]
    if n < 2:
        return np.zeros(np.delete(x.shape, axis))
    mean = d.mean(axis=axis)
    var = (np.square(d).sum(axis=axis) - n * np.square(mean)) / (n - 1)
    return np.sqrt(np.maximum(var, 0.0))


@dataclass
class BootstrapResult:
    """Error bars and the per-round samples behind them.

    Attributes
    ----------
    sigma_re, sigma_im : ndarray
        Standard deviations of the real and imaginary parts of ``W``.
    sigma_gamma : float
    samples : ndarray
        Kept samples of ``W``, shape ``(n_kept, m, m)``.
    gammas : ndarray
    rounds : ndarray
        Round index of each kept sample.
    dropped : list
        ``(round, message)`` of every failed round.
    checkpoints : dict
        ``n -> mean error bar`` over the first ``n`` kept samples.
    """

    sigma_re: np.ndarray
    sigma_im: np.ndarray
    sigma_gamma: float
    samples: np.ndarray
    gammas: np.ndarray
    rounds: np.ndarray
    n_requested: int
    dropped: list = field(default_factory=list)
    checkpoints: dict = field(default_factory=dict)

    @property
    def drop_fraction(self):
        return len(self.dropped) / self.n_requested

    def archive_rows(self):
        """``(round, i, j, re, im)`` rows with 1-based ports."""
        rows = []
        for k, W in zip(self.rounds, self.samples):
            m = W.shape[0]
            for i in range(m):
                for j in range(m):
                    rows.append((int(k), i + 1, j + 1, float(W[i, j].real), float(W[i, j].imag)))
        return rows

    def diagnostics(self):
        return {
            "requested": int(self.n_requested),
            "kept": int(self.samples.shape[0]),
            "dropped": len(self.dropped),
            "drop_fraction": float(self.drop_fraction),
            "drop_messages": [f"{k}: {msg}" for k, msg in self.dropped],
            "checkpoints": {str(k): v for k, v in self.checkpoints.items()},
        }

    def apply(self, report):
        """Attach the error bars to a ReconstructionReport."""
        report.sigma_re = self.sigma_re
        report.sigma_im = self.sigma_im
        report.sigma_gamma = float(self.sigma_gamma)
        report.bootstrap_samples = int(self.samples.shape[0])
        report.diagnostics["bootstrap"] = self.diagnostics()
        return report


def _checkpoints(samples, n_requested):
    out = {}
    for n in sorted({max(n_requested // 4, 2), max(n_requested // 2, 2), n_requested}):
        n_kept = min(n, samples.shape[0])
        if n_kept < 2:
            continue
        sub = samples[:n_kept]
        out[n] = {
            "mean_sigma_re": float(shifted_std(sub.real).mean()),
            "mean_sigma_im": float(shifted_std(sub.imag).mean()),
        }
    return out


def bootstrap(dataset, config=None, n=200, seed=0, workers=1, primary=None,
              min_rounds=MIN_ROUNDS):
    """Residual bootstrap of a characterization.

    Parameters
    ----------
    dataset : Dataset
    config : PipelineConfig, optional
    n : int
        Number of rounds, at least ``min_rounds``.
    seed : int
        Rounds use independent streams spawned from this seed, so results do
        not depend on ``workers``.
    workers : int
        joblib worker count.
    primary : ReconstructionReport, optional
        The primary characterization; computed when omitted.

    Returns
    -------
    BootstrapResult

    Raises
    ------
    BootstrapUnstable
        When more than 10% of the rounds fail.
    """
    if n < min_rounds:
        raise ValueError(f"at least {min_rounds} bootstrap rounds are required, got {n}")
    config = config or PipelineConfig()
    if primary is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            primary = characterize(dataset, config)
    seeds = np.random.SeedSequence(seed).spawn(n)
    if workers == 1:
        out = [_round(dataset, config, primary, s) for s in seeds]
    else:
        out = Parallel(n_jobs=workers)(delayed(_round)(dataset, config, primary, s)
                                       for s in seeds)
    kept, gammas, rounds, dropped = [], [], [], []
    for k, (W, g, msg) in enumerate(out):
        if W is None:
            dropped.append((k, msg))
        else:
            kept.append(W)
            gammas.append(g)
            rounds.append(k)
    if len(dropped) > MAX_DROP_FRACTION * n:
        raise BootstrapUnstable(len(dropped), n)
    samples = np.array(kept)
    gammas = np.array(gammas)
    return BootstrapResult(
        sigma_re=shifted_std(samples.real),
        sigma_im=shifted_std(samples.imag),
        sigma_gamma=float(shifted_std(gammas)) if gammas.size else 0.0,
        samples=samples,
        gammas=gammas,
        rounds=np.array(rounds, dtype=int),
        n_requested=n,
        dropped=dropped,
        checkpoints=_checkpoints(samples, n),
    )


__all__ = [
    "BootstrapResult",
    "align_conjugation",
    "bootstrap",
    "replica_dataset",
    "resample_curve",
    "shifted_std",
]
