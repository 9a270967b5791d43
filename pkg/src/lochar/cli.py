"""Command-line front end: simulate, characterize, bootstrap, figures, score.

Exit codes: 0 success, 2 invalid input, 3 pipeline failure, 4 incomplete
acquisition.
"""

import argparse
import csv
import itertools
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import experiments
from .bootstrap import bootstrap
from .errors import IncompleteAcquisition, LocharError, MissingCurve
from .io import (
    loss_from_dict,
    read_dataset,
    read_json,
    read_truth,
    rep_from_dict,
    write_archive,
    write_dataset,
    write_json,
)
from .model import distance_to_class, representative_from_unitary
from .pipeline import PipelineConfig, characterize
from .simulator import (
    make_plan,
    simulate_coincidence,
    simulate_direct,
    simulate_scattershot,
    standard_tuples,
)

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_PIPELINE = 3
EXIT_INCOMPLETE = 4

log = logging.getLogger("lochar")

# plan.json keys accepted by ``simulate --plan``
PLAN_KEYS = {
    "m", "seed", "spectrum", "width", "jitter", "lossy", "tau_points", "gamma_true", "B",
    "photons_per_run", "pairs_per_delay", "vartheta_cal", "noise", "count_scale", "tau0",
    "herald_prob", "mode", "budget", "representative", "loss", "unitary", "all_curves",
}


class InvalidInput(Exception):
    """Bad arguments or plan; reported with exit code 2."""


# -- simulate -----------------------------------------------------------------------------


def _plan_config(args):
    cfg = {}
    if args.plan:
        cfg = read_json(args.plan)
        unknown = set(cfg) - PLAN_KEYS
        if unknown:
            raise InvalidInput(f"unknown plan keys: {sorted(unknown)}")
    flags = {
        "m": args.m, "seed": args.seed, "spectrum": args.spectrum,
        "tau_points": args.tau_points, "pairs_per_delay": args.pairs_per_delay,
        "photons_per_run": args.photons_per_run, "B": args.reps, "gamma_true": args.gamma_true,
        "mode": args.mode, "budget": args.budget, "herald_prob": args.herald_prob,
    }
    for key, value in flags.items():
        if value is not None:
            cfg[key] = value
    if args.noiseless:
        cfg["noise"] = False
    if args.all_curves:
        cfg["all_curves"] = True
    if "seed" not in cfg:
        raise InvalidInput("a seed is required (--seed or \"seed\" in the plan)")
    if "m" not in cfg and not any(k in cfg for k in ("representative", "unitary")):
        raise InvalidInput("the mode count is required (--m or \"m\" in the plan)")
    return cfg


def build_plan(cfg):
    """ExperimentPlan from a plan dictionary (see ``PLAN_KEYS``)."""
    kw = {}
    rep = loss = None
    if "representative" in cfg:
        rep = rep_from_dict(cfg["representative"])
    elif "unitary" in cfg:
        u = cfg["unitary"]
        rep = representative_from_unitary(np.array(u["re"]) + 1j * np.array(u.get("im", 0.0)))
    if "loss" in cfg:
        loss = loss_from_dict(cfg["loss"])
    m = int(cfg["m"]) if "m" in cfg else rep.m
    if rep is not None and rep.m != m:
        raise InvalidInput(f"plan says m={m} but the interferometer is {rep.m} x {rep.m}")
    herald = cfg.get("herald_prob")
    if herald is not None:
        herald = tuple(herald) if isinstance(herald, (list, tuple)) else (float(herald),) * m
        kw["herald_prob"] = herald
    for key in ("gamma_true", "B", "photons_per_run", "pairs_per_delay", "vartheta_cal",
                "noise", "count_scale", "tau0"):
        if key in cfg:
            kw[key] = cfg[key]
    return make_plan(
        m,
        seed=int(cfg["seed"]),
        spectrum=cfg.get("spectrum", "gaussian"),
        width=float(cfg.get("width", 1.0)),
        jitter=float(cfg.get("jitter", 0.0)),
        lossy=bool(cfg.get("lossy", True)),
        tau_points=int(cfg.get("tau_points", 61)),
        rep=rep,
        loss=loss,
        **kw,
    )


def all_tuples(m):
    """Every curve on two outputs and two inputs, one tuple per port-set pair."""
    pairs = list(itertools.combinations(range(1, m + 1), 2))
    return [(i, ip, j, jp) for i, ip in pairs for j, jp in pairs]


def cmd_simulate(args):
    try:
        cfg = _plan_config(args)
        plan = build_plan(cfg)
    except (KeyError, TypeError, ValueError, LocharError) as exc:
        raise InvalidInput(f"invalid plan: {exc}") from exc
    mode = cfg.get("mode", "direct")
    if mode == "scattershot":
        if plan.herald_prob is None:
            raise InvalidInput("scattershot mode needs herald_prob")
        if "budget" not in cfg:
            raise InvalidInput("scattershot mode needs a budget")
        data = simulate_scattershot(plan, float(cfg["budget"]))
    elif mode == "direct":
        data = simulate_direct(plan)
    else:
        raise InvalidInput(f"unknown mode {mode!r}")
    if cfg.get("all_curves"):
        for t in all_tuples(plan.m):
            if t not in data.curves:
                data.curves[t] = simulate_coincidence(plan, t)
    settings = {"mode": mode}
    if mode == "scattershot":
        settings["budget"] = float(cfg["budget"])
    out = write_dataset(args.out, plan, data, **settings)
    print(f"wrote {len(data.curves)} curves, m={plan.m}, mode={mode} to {out}")
    return EXIT_OK


# -- characterize ----------------------------------------------------------------------------


def _config_from_args(args, settings):
    return PipelineConfig(
        theta_threshold=args.theta_threshold,
        envelope_kind="gaussian" if args.gaussian_fit else "spectral",
        calibrate=not args.no_calibration,
        mitigate=not args.no_mitigation,
        strict=args.strict,
        vartheta_cal=float(settings.get("vartheta_cal", np.pi / 4)),
    )


def _load(directory):
    try:
        dataset, settings = read_dataset(directory)
    except (FileNotFoundError, KeyError, ValueError) as exc:
        raise InvalidInput(f"cannot read dataset: {exc}") from exc
    missing = dataset.validate()
    if missing:
        raise InvalidInput(f"dataset lacks required curves: {missing}")
    return dataset, settings


def _score(directory, W):
    U, _ = read_truth(directory)
    if U is None:
        return None
    score = {"distance_to_class": float(distance_to_class(W, U))}
    write_json(Path(directory) / "score.json", score)
    return score


def cmd_characterize(args):
    dataset, settings = _load(args.dataset)
    config = _config_from_args(args, settings)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        report = characterize(dataset, config)
    out = report.to_dict()
    out["warnings"] = [str(w.message) for w in caught]
    path = Path(args.out) if args.out else Path(args.dataset) / "report.json"
    write_json(path, out)
    score = _score(args.dataset, report.W)
    msg = f"wrote {path}"
    if score is not None:
        msg += f"; distance to truth {score['distance_to_class']:.3e}"
    print(msg)
    return EXIT_OK


# -- bootstrap --------------------------------------------------------------------------------


def cmd_bootstrap(args):
    report_path = Path(args.report) if args.report else Path(args.dataset) / "report.json"
    if not report_path.exists():
        raise InvalidInput(f"{report_path} not found; run characterize first")
    previous = read_json(report_path)
    dataset, settings = _load(args.dataset)
    stored = previous.get("diagnostics", {}).get("config")
    config = PipelineConfig(**stored) if stored else _config_from_args(args, settings)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        primary = characterize(dataset, config)
        result = bootstrap(dataset, config, n=args.bootstrap_n, seed=args.seed,
                           workers=args.workers, primary=primary)
    result.apply(primary)
    out = primary.to_dict()
    out["warnings"] = previous.get("warnings", [])
    write_json(report_path, out)
    if args.archive:
        write_archive(args.archive, result.archive_rows())
    diag = result.diagnostics()
    print(f"bootstrap: {diag['kept']} of {diag['requested']} rounds kept; "
          f"max sigma re {result.sigma_re.max():.3e}, im {result.sigma_im.max():.3e}")
    for n, c in sorted(result.checkpoints.items()):
        print(f"  N={n}: mean sigma re {c['mean_sigma_re']:.4e}, im {c['mean_sigma_im']:.4e}")
    return EXIT_OK


# -- score -----------------------------------------------------------------------------------


def cmd_score(args):
    report_path = Path(args.report) if args.report else Path(args.dataset) / "report.json"
    if not report_path.exists():
        raise InvalidInput(f"{report_path} not found")
    rep = read_json(report_path)
    W = np.array(rep["W"]["re"]) + 1j * np.array(rep["W"]["im"])
    score = _score(args.dataset, W)
    if score is None:
        raise InvalidInput("truth.json not found")
    print(json.dumps(score, sort_keys=True))
    return EXIT_OK


# -- figures ----------------------------------------------------------------------------------


def _write_table(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _sweep_rows(results):
    rows = []
    for name, by_budget in experiments.mean_errors(results).items():
        for budget, (mean, se, failed) in sorted(by_budget.items()):
            rows.append((name, budget, mean, se, failed, len(results[name][budget])))
    return rows


def cmd_figures(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tau, curves = experiments.hom_curves()
    gammas = sorted(curves)
    _write_table(out / "hom_curves.csv", ["tau"] + [f"gamma_{g:g}" for g in gammas],
                 [(t, *(curves[g][k] for g in gammas)) for k, t in enumerate(tau)])
    tau, shapes = experiments.shape_curves()
    betas = list(shapes)
    _write_table(out / "shape_curves.csv", ["tau"] + [f"beta_{b:.6f}" for b in betas],
                 [(t, *(shapes[b][k] for b in betas)) for k, t in enumerate(tau)])
    if args.trials > 0:
        budgets = tuple(args.budgets)
        header = ["method", "budget", "mean_error", "std_error", "failures", "trials"]
        fit = experiments.fitting_curve_sweep(args.trials, budgets, args.m, args.seed,
                                              args.workers)
        _write_table(out / "sweep_fitting_curve.csv", header, _sweep_rows(fit))
        cal = experiments.calibration_sweep(args.trials, budgets, args.m, args.seed,
                                            args.workers)
        _write_table(out / "sweep_calibration.csv", header, _sweep_rows(cal))
    print(f"wrote figure data to {out}")
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------------------------


def _add_pipeline_flags(p):
    p.add_argument("--no-calibration", action="store_true",
                   help="skip the calibration fit and use gamma = 1")
    p.add_argument("--gaussian-fit", action="store_true",
                   help="fit Gaussian-shaped curves instead of spectra-based curves")
    p.add_argument("--theta-threshold", type=float, default=0.15,
                   help="stability margin below which signs are re-resolved")
    p.add_argument("--no-mitigation", action="store_true",
                   help="disable relabeling and sign re-resolution")
    p.add_argument("--strict", action="store_true",
                   help="fail on unstable signs and non-positive diagonals")


def build_parser():
    parser = argparse.ArgumentParser(prog="lochar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a dataset directory")
    p.add_argument("--out", required=True, help="dataset directory to write")
    p.add_argument("--plan", help="plan JSON file")
    p.add_argument("--m", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["direct", "scattershot"])
    p.add_argument("--spectrum", choices=["gaussian", "sinc", "measured"])
    p.add_argument("--tau-points", type=int)
    p.add_argument("--pairs-per-delay", type=float)
    p.add_argument("--photons-per-run", type=float)
    p.add_argument("--reps", type=int, help="repetitions B of each single-photon run")
    p.add_argument("--gamma-true", type=float)
    p.add_argument("--budget", type=float, help="two-herald event budget (scattershot)")
    p.add_argument("--herald-prob", type=float, help="herald probability of every source")
    p.add_argument("--noiseless", action="store_true", help="expected counts, no shot noise")
    p.add_argument("--all-curves", action="store_true",
                   help="also acquire the curves needed for relabeling and re-resolution")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("characterize", help="reconstruct the unitary of a dataset")
    p.add_argument("dataset")
    p.add_argument("--out", help="report path (default <dataset>/report.json)")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_characterize)

    p = sub.add_parser("bootstrap", help="add bootstrap error bars to a report")
    p.add_argument("dataset")
    p.add_argument("--report", help="report path (default <dataset>/report.json)")
    p.add_argument("--bootstrap-n", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--archive", help="CSV file for the per-round samples")
    _add_pipeline_flags(p)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("figures", help="emit plot-ready CSV files")
    p.add_argument("--out", required=True)
    p.add_argument("--trials", type=int, default=1000,
                   help="closed-loop trials per budget (0 skips the sweeps)")
    p.add_argument("--budgets", type=float, nargs="+", default=list(experiments.DEFAULT_BUDGETS))
    p.add_argument("--m", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_figures)

    p = sub.add_parser("score", help="distance of a report's unitary to the truth")
    p.add_argument("dataset")
    p.add_argument("--report")
    p.set_defaults(func=cmd_score)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except IncompleteAcquisition as exc:
        print(f"error: incomplete acquisition: {exc}", file=sys.stderr)
        return EXIT_INCOMPLETE
    except MissingCurve as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except LocharError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
