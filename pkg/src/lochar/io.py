"""Dataset directories, JSON and CSV formats.

Layout of a dataset directory::

    plan.json                   acquisition settings (no ground truth)
    spectra/port_<j>.csv        omega, amplitude
    singles.csv                 i, j, b, count
    curves/c_<i>_<i'>_<j>_<j'>.csv   tau, counts
    calibration.csv             tau, counts
    calibration_singles.csv     i, j, b, count
    truth.json                  interferometer, losses and gamma (scoring only)

Ports and repetitions are 1-based in every file.
"""

import csv
import json
import re
from pathlib import Path

import numpy as np

from .model import CoincidenceCurve, LossModel, RepresentativeMatrix, SinglePhotonCounts
from .pipeline import Dataset
from .simulator import DatasetSource, ExperimentPlan
from .spectra import Spectrum

CURVE_NAME = re.compile(r"^c_(\d+)_(\d+)_(\d+)_(\d+)\.csv$")

# plan fields that are settings rather than ground truth
SETTINGS_FIELDS = ("B", "photons_per_run", "pairs_per_delay", "vartheta_cal", "noise", "seed",
                   "count_scale", "herald_prob")


def _num(x):
    """Integers as ``int`` so CSV files of counts stay integral."""
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def write_json(path, obj):
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


# -- model types ------------------------------------------------------------------------


def rep_to_dict(rep):
    return {
        "m": int(rep.m),
        "alpha": rep.alpha.tolist(),
        "theta": rep.theta.tolist(),
        "lambda": rep.lam.tolist(),
        "mu": rep.mu.tolist(),
    }


def rep_from_dict(d):
    rep = RepresentativeMatrix(d["alpha"], d["theta"], d["lambda"], d["mu"])
    if "m" in d and int(d["m"]) != rep.m:
        raise ValueError(f"m={d['m']} does not match the {rep.m} x {rep.m} amplitudes")
    return rep


def loss_to_dict(loss):
    return {
        "m": int(loss.m),
        "kappa": loss.kappa.tolist(),
        "nu": loss.nu.tolist(),
        "phi": loss.phi.tolist(),
        "xi": loss.xi.tolist(),
    }


def loss_from_dict(d):
    loss = LossModel(d["kappa"], d["nu"], d["phi"], d["xi"])
    if "m" in d and int(d["m"]) != loss.m:
        raise ValueError(f"m={d['m']} does not match the loss vectors")
    return loss


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_columns(path, header):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader)
        if [h.strip() for h in head] != list(header):
            raise ValueError(f"{path}: expected columns {list(header)}, got {head}")
        rows = [[float(v) for v in row] for row in reader if row]
    return np.array(rows, dtype=float).reshape(-1, len(header))


def write_spectrum(path, spectrum):
    _write_rows(path, ("omega", "amplitude"),
                ((_num(w), _num(a)) for w, a in zip(spectrum.omega, spectrum.amplitude)))


def read_spectrum(path):
    data = _read_columns(path, ("omega", "amplitude"))
    return Spectrum(data[:, 0], data[:, 1])


def write_curve(path, curve):
    _write_rows(path, ("tau", "counts"),
                ((_num(t), _num(c)) for t, c in zip(curve.tau, curve.counts)))


def read_curve(path, ports):
    data = _read_columns(path, ("tau", "counts"))
    return CoincidenceCurve(ports, data[:, 0], data[:, 1])


def write_singles(path, singles):
    N = singles.counts
    m, _, B = N.shape
    _write_rows(path, ("i", "j", "b", "count"),
                ((i + 1, j + 1, b + 1, _num(N[i, j, b]))
                 for i in range(m) for j in range(m) for b in range(B)))


def read_singles(path):
    data = _read_columns(path, ("i", "j", "b", "count"))
    idx = data[:, :3].astype(int)
    if idx.size == 0 or np.any(idx < 1):
        raise ValueError(f"{path}: indices must be 1-based and non-empty")
    m = int(max(idx[:, 0].max(), idx[:, 1].max()))
    B = int(idx[:, 2].max())
    if data.shape[0] != m * m * B:
        raise ValueError(f"{path}: expected {m * m * B} rows for m={m}, B={B}")
    N = np.full((m, m, B), np.nan)
    N[idx[:, 0] - 1, idx[:, 1] - 1, idx[:, 2] - 1] = data[:, 3]
    if np.any(np.isnan(N)):
        raise ValueError(f"{path}: duplicate or missing (i, j, b) rows")
    return SinglePhotonCounts(N)


def curve_filename(ports):
    return "c_{}_{}_{}_{}.csv".format(*ports)


def write_archive(path, rows):
    """Bootstrap samples as ``round, i, j, re, im`` rows."""
    _write_rows(path, ("round", "i", "j", "re", "im"), rows)


# -- dataset directories ----------------------------------------------------------------


def plan_settings(plan, **extra):
    """JSON-ready acquisition settings of a plan (no ground truth)."""
    out = {"m": int(plan.m), "tau": plan.tau.tolist()}
    for name in SETTINGS_FIELDS:
        value = getattr(plan, name)
        out[name] = list(value) if isinstance(value, tuple) else value
    out.update(extra)
    return out


def truth_dict(plan):
    return {
        "representative": rep_to_dict(plan.rep),
        "loss": loss_to_dict(plan.loss),
        "gamma_true": float(plan.gamma_true),
        "tau0": plan.tau0,
        "U": {"re": plan.rep.matrix().real.tolist(), "im": plan.rep.matrix().imag.tolist()},
    }


def write_dataset(directory, plan, data, **settings):
    """Write simulator output as a dataset directory (truth kept in ``truth.json``)."""
    root = Path(directory)
    (root / "spectra").mkdir(parents=True, exist_ok=True)
    (root / "curves").mkdir(exist_ok=True)
    for old in (root / "curves").glob("c_*.csv"):
        old.unlink()
    write_json(root / "plan.json", plan_settings(plan, **settings))
    for j, spec in enumerate(plan.spectra, start=1):
        write_spectrum(root / "spectra" / f"port_{j}.csv", spec)
    write_singles(root / "singles.csv", data.singles)
    for ports, curve in sorted(data.curves.items()):
        write_curve(root / "curves" / curve_filename(ports), curve)
    if data.calibration is not None:
        write_curve(root / "calibration.csv", data.calibration)
    if data.calibration_singles is not None:
        write_singles(root / "calibration_singles.csv", data.calibration_singles)
    if data.accounting:
        write_json(root / "accounting.json", data.accounting)
    write_json(root / "truth.json", truth_dict(plan))
    return root


def read_curves(directory):
    curves = {}
    for path in sorted((Path(directory) / "curves").glob("c_*.csv")):
        match = CURVE_NAME.match(path.name)
        if match is None:
            continue
        ports = tuple(int(g) for g in match.groups())
        curves[ports] = read_curve(path, ports)
    return curves


def read_dataset(directory):
    """Dataset and acquisition settings from a directory; never reads ``truth.json``."""
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset directory {root} does not exist")
    settings = read_json(root / "plan.json")
    m = int(settings["m"])
    spectra = tuple(read_spectrum(root / "spectra" / f"port_{j}.csv") for j in range(1, m + 1))
    singles = read_singles(root / "singles.csv")
    if singles.m != m:
        raise ValueError(f"singles.csv has m={singles.m}, plan.json says m={m}")
    curves = read_curves(root)
    calibration = None
    if (root / "calibration.csv").exists():
        calibration = read_curve(root / "calibration.csv", (1, 2, 1, 2))
    cal_singles = None
    if (root / "calibration_singles.csv").exists():
        cal_singles = read_singles(root / "calibration_singles.csv")
    dataset = Dataset(singles, DatasetSource(curves), spectra, calibration, cal_singles)
    return dataset, settings


def read_truth(directory):
    """``(U_true, truth dict)`` or ``(None, None)`` when absent."""
    path = Path(directory) / "truth.json"
    if not path.exists():
        return None, None
    truth = read_json(path)
    U = np.array(truth["U"]["re"]) + 1j * np.array(truth["U"]["im"])
    return U, truth


def plan_from_truth(settings, truth, spectra):
    """Rebuild an ExperimentPlan from stored settings and truth."""
    kw = {k: settings[k] for k in SETTINGS_FIELDS if k in settings}
    if kw.get("herald_prob") is not None:
        kw["herald_prob"] = tuple(kw["herald_prob"])
    return ExperimentPlan(
        rep_from_dict(truth["representative"]),
        loss_from_dict(truth["loss"]),
        spectra,
        np.array(settings["tau"]),
        gamma_true=truth["gamma_true"],
        tau0=truth.get("tau0"),
        **kw,
    )


__all__ = [
    "curve_filename",
    "loss_from_dict",
    "loss_to_dict",
    "plan_from_truth",
    "plan_settings",
    "read_curve",
    "read_dataset",
    "read_json",
    "read_singles",
    "read_spectrum",
    "read_truth",
    "rep_from_dict",
    "rep_to_dict",
    "truth_dict",
    "write_archive",
    "write_curve",
    "write_dataset",
    "write_json",
    "write_singles",
    "write_spectrum",
]
