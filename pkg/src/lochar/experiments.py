"""Closed-loop experiments: simulate from a known interferometer, characterize, score.

Used by the CLI ``figures`` command and by the acceptance tests.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import expm
from scipy.optimize import brentq

from .coincidence import SubmatrixParams, beam_splitter_params, coincidence_curve
from .errors import LocharError
from .model import canonicalize, distance_to_class, random_haar_unitary, wrap_angle
from .pipeline import PipelineConfig, characterize, dataset_from_simulation
from .simulator import (
    SimulatedSource,
    _herald_pattern_probs,
    make_plan,
    scattershot_settings,
    simulate_direct,
    simulate_scattershot,
)
from .spectra import gaussian_spectrum

# entries whose true argument is this close to 0 or pi have no meaningful sign
SIGN_MARGIN = 0.2
# below 1e4 pairs per delay point the m=5 signs are mostly noise and every method ties
DEFAULT_BUDGETS = (1e4, 1e5, 1e6, 1e7)
SINGLES_PER_PAIR = 100.0


@dataclass
class TrialResult:
    """Score of one closed-loop characterization."""

    seed: int
    distance: float
    sign_errors: int
    gamma_hat: float = float("nan")
    unstable: int = 0
    failed: str = ""
    extra: dict = field(default_factory=dict)


def sign_errors(theta_hat, theta_true, margin=SIGN_MARGIN):
    """Wrong signs among entries with ``|theta_true|`` in ``(margin, pi - margin)``.

    Counted up to global conjugation (the smaller of the two counts).
    """
    t = np.asarray(theta_true, dtype=float)
    h = np.asarray(theta_hat, dtype=float)
    mask = (np.abs(t) > margin) & (np.abs(t) < np.pi - margin)
    direct = int(np.sum(mask & (np.sign(h) != np.sign(t))))
    flipped = int(np.sum(mask & (np.sign(-h) != np.sign(t))))
    return min(direct, flipped)


def budget_plan(m, seed, budget, spectrum="measured", jitter=0.05, **kwargs):
    """Plan whose coincidence budget is ``budget`` expected pairs per delay point.

    Single-photon runs get ``SINGLES_PER_PAIR`` times as many photons.
    """
    kwargs.setdefault("photons_per_run", SINGLES_PER_PAIR * budget)
    return make_plan(m, seed=seed, spectrum=spectrum, jitter=jitter,
                     pairs_per_delay=budget, **kwargs)


def run_trial(plan, config=None, adaptive=True, data=None):
    """Simulate (unless ``data`` is given), characterize and score one plan.

    With ``adaptive`` the characterization may request extra curves, as an
    experimenter re-measuring after relabeling would.
    """
    if data is None:
        data = simulate_direct(plan)
    source = SimulatedSource(plan, data.curves.values()) if adaptive else None
    dataset = dataset_from_simulation(plan, data, source)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            rep = characterize(dataset, config)
    except LocharError as exc:
        return TrialResult(plan.seed, float("nan"), -1, failed=f"{type(exc).__name__}: {exc}")
    return TrialResult(
        seed=plan.seed,
        distance=float(distance_to_class(rep.W, plan.rep.matrix())),
        sign_errors=sign_errors(rep.arguments.theta_hat, plan.rep.theta),
        gamma_hat=rep.gamma_hat,
        unstable=len(rep.arguments.unstable),
    )


def _compare_one(m, seed, budget, configs, plan_kwargs, adaptive):
    plan = budget_plan(m, seed, budget, **plan_kwargs)
    data = simulate_direct(plan)
    return {name: run_trial(plan, cfg, adaptive, data) for name, cfg in configs.items()}


def compare_configs(configs, m=5, trials=100, budgets=DEFAULT_BUDGETS, seed=0, workers=1,
                    adaptive=True, **plan_kwargs):
    """Mean error of several pipeline configurations on shared datasets.

    Every configuration is run on the same simulated dataset for each
    ``(budget, trial)``, so differences are paired.

    Returns
    -------
    dict
        ``name -> budget -> list of TrialResult``.
    """
    jobs = [(b, seed + k) for b in budgets for k in range(trials)]
    run = delayed(_compare_one)
    if workers == 1:
        out = [_compare_one(m, s, b, configs, plan_kwargs, adaptive) for b, s in jobs]
    else:
        out = Parallel(n_jobs=workers)(run(m, s, b, configs, plan_kwargs, adaptive)
                                       for b, s in jobs)
    results = {name: {b: [] for b in budgets} for name in configs}
    for (b, _), res in zip(jobs, out):
        for name, r in res.items():
            results[name][b].append(r)
    return results


def mean_errors(results):
    """``name -> budget -> (mean distance, standard error, failures)``."""
    out = {}
    for name, by_budget in results.items():
        out[name] = {}
        for b, trials in by_budget.items():
            d = np.array([t.distance for t in trials])
            ok = d[np.isfinite(d)]
            se = float(ok.std(ddof=1) / np.sqrt(ok.size)) if ok.size > 1 else float("nan")
            out[name][b] = (float(ok.mean()) if ok.size else float("nan"), se,
                            int(np.sum(~np.isfinite(d))))
    return out


def fitting_curve_sweep(trials=100, budgets=DEFAULT_BUDGETS, m=5, seed=0, workers=1,
                        **plan_kwargs):
    """Spectra-based versus Gaussian fitting curves on measured-like spectra."""
    configs = {
        "spectral": PipelineConfig(envelope_kind="spectral"),
        "gaussian": PipelineConfig(envelope_kind="gaussian"),
    }
    plan_kwargs.setdefault("spectrum", "measured")
    return compare_configs(configs, m, trials, budgets, seed, workers, **plan_kwargs)


def calibration_sweep(trials=100, budgets=DEFAULT_BUDGETS, m=5, seed=0, workers=1,
                      gamma_true=0.8, **plan_kwargs):
    """Calibrated versus uncalibrated (gamma fixed to 1) characterization."""
    configs = {
        "calibrated": PipelineConfig(calibrate=True),
        "uncalibrated": PipelineConfig(calibrate=False, gamma_default=1.0),
    }
    plan_kwargs.setdefault("spectrum", "measured")
    return compare_configs(configs, m, trials, budgets, seed, workers,
                           gamma_true=gamma_true, **plan_kwargs)


# -- engineered interferometers -----------------------------------------------------------


def _raw_theta22(U):
    return float(np.angle(U[1, 1] * U[0, 0] * np.conj(U[0, 1]) * np.conj(U[1, 0])))


def engineered_unitary(m=5, theta22=0.01, seed=0, t_max=3.0, grid=301):
    """Haar-like unitary whose canonical ``theta_22`` equals ``theta22``.

    Moves along ``U(t) = U_a expm(i t H)`` from a Haar unitary ``U_a`` with a
    random Hermitian ``H`` and solves ``theta_22(t) = theta22`` by bracketing.
    """
    rng = np.random.default_rng(seed)
    for _ in range(100):
        Ua = random_haar_unitary(m, rng)
        G = rng.normal(size=(m, m)) + 1j * rng.normal(size=(m, m))
        H = (G + G.conj().T) / 2

        def f(t):
            return float(wrap_angle(_raw_theta22(Ua @ expm(1j * t * H)) - theta22))

        ts = np.linspace(0.0, t_max, grid)
        vals = np.array([f(t) for t in ts])
        for k in range(grid - 1):
            a, b = vals[k], vals[k + 1]
            # a genuine crossing, not the wrap at +-pi
            if a * b <= 0 and abs(a - b) < np.pi:
                t = brentq(f, ts[k], ts[k + 1], xtol=1e-14)
                U = Ua @ expm(1j * t * H)
                rep = canonicalize(U, fix_conjugation=False)
                if abs(rep.theta[1, 1] - theta22) < 1e-9:
                    return U
    raise RuntimeError("no crossing found")


def engineered_plan(seed, theta22=0.01, m=5, truth_seed=0, budget=1e5, **kwargs):
    """Plan on the fixed engineered interferometer; ``seed`` drives the noise only."""
    rep = canonicalize(engineered_unitary(m, theta22, truth_seed))
    kwargs.setdefault("spectrum", "gaussian")
    kwargs.setdefault("jitter", 0.0)
    return budget_plan(m, seed, budget, rep=rep, **kwargs)


def mitigation_trials(trials=100, theta22=0.01, m=5, truth_seed=0, budget=1e5, seed=0,
                      workers=1, **kwargs):
    """Sign errors with and without the instability mitigation on shared data.

    Returns ``{"mitigated": [...], "unmitigated": [...]}`` of TrialResult.
    """
    configs = {
        "mitigated": PipelineConfig(mitigate=True),
        "unmitigated": PipelineConfig(mitigate=False),
    }

    def one(s):
        plan = engineered_plan(s, theta22, m, truth_seed, budget, **kwargs)
        data = simulate_direct(plan)
        return {name: run_trial(plan, cfg, True, data) for name, cfg in configs.items()}

    if workers == 1:
        out = [one(seed + k) for k in range(trials)]
    else:
        out = Parallel(n_jobs=workers)(delayed(one)(seed + k) for k in range(trials))
    return {name: [o[name] for o in out] for name in configs}


# -- scattershot versus direct ----------------------------------------------------------


def matched_plans(m, seed, budget, herald_prob=0.1, **kwargs):
    """A plan for scattershot acquisition and the direct plan with matched counts.

    The direct plan gets as many pairs per delay point as a scattershot
    curve collects on average, and as many photons per single-photon run
    as a scattershot repetition.
    """
    plan = make_plan(m, seed=seed, herald_prob=(herald_prob,) * m, **kwargs)
    cfg = scattershot_settings(plan, budget)
    single, pair = _herald_pattern_probs(plan.herald_prob)
    ppd = cfg.pulses_per_setting * float(np.mean(list(pair.values())))
    ppr = cfg.pulses_per_setting * len(cfg.settings) * float(np.mean(single)) / plan.B
    plan = plan.with_(pairs_per_delay=ppd, photons_per_run=ppr)
    return plan, plan.with_(herald_prob=None)


def scattershot_trial(m, seed, budget, herald_prob=0.1, config=None, **kwargs):
    """``(scattershot TrialResult, direct TrialResult, accounting)`` on one truth."""
    plan_s, plan_d = matched_plans(m, seed, budget, herald_prob, **kwargs)
    data_s = simulate_scattershot(plan_s, budget)
    res_s = run_trial(plan_s, config, adaptive=False, data=data_s)
    res_d = run_trial(plan_d, config, adaptive=False)
    return res_s, res_d, data_s.accounting


# -- figure data ------------------------------------------------------------------------


def hom_curves(gammas=(0.0, 0.5, 1.0), points=201, span=4.0):
    """Balanced-splitter coincidence probability against delay for several gammas.

    Returns ``(tau, {gamma: curve})`` with delays in units of the inverse
    spectral width.
    """
    spec = gaussian_spectrum()
    tau = np.linspace(-span, span, points) / spec.rms_width()
    params = beam_splitter_params(np.pi / 4)
    return tau, {g: coincidence_curve(spec, spec, tau, params, g) for g in gammas}


def shape_curves(betas=(np.pi, 0.0, np.pi / 3, 2 * np.pi / 3), points=201, span=4.0):
    """Curves for the four characteristic net phases with unequal amplitudes."""
    spec = gaussian_spectrum()
    tau = np.linspace(-span, span, points) / spec.rms_width()
    a = np.sqrt(3) / 4
    b = 0.25
    out = {}
    for beta in betas:
        params = SubmatrixParams((a, b, b, a), (float(beta), 0.0, 0.0, 0.0))
        out[float(beta)] = coincidence_curve(spec, spec, tau, params, 1.0)
    return tau, out


__all__ = [
    "TrialResult",
    "budget_plan",
    "calibration_sweep",
    "compare_configs",
    "engineered_plan",
    "engineered_unitary",
    "fitting_curve_sweep",
    "hom_curves",
    "matched_plans",
    "mean_errors",
    "mitigation_trials",
    "run_trial",
    "scattershot_trial",
    "shape_curves",
    "sign_errors",
]
