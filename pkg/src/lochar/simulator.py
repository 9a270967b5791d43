"""Synthetic one- and two-photon data for a known interferometer.

Every random draw comes from its own stream, spawned from the plan seed with
a key naming what is drawn (singles, a given curve, the calibration curve),
so datasets are reproducible and independent of the order in which curves
are requested.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .coincidence import (
    SpectralEnvelope,
    SubmatrixParams,
    beam_splitter_params,
    curve_from_envelope,
    loss_factor,
    single_photon_probs,
)
from .errors import DimensionMismatch, IncompleteAcquisition, MissingCurve
from .model import (
    CoincidenceCurve,
    LossModel,
    SinglePhotonCounts,
    check_gamma,
    random_representative,
)
from .spectra import SPECTRUM_FACTORIES, TOL_NORM

_TAG_SINGLES = 1
_TAG_CURVE = 2
_TAG_CALIBRATION = 3
_TAG_CAL_SINGLES = 4
_TAG_SCATTERSHOT = 5


def standard_tuples(m):
    """Port tuples measured by default, ``2 (m - 1)**2`` of them.

    * ``(1, i, 1, j)`` for ``i, j >= 2``: argument magnitudes;
    * ``(2, i, 1, 2)`` for ``i >= 3``: signs in column 2;
    * ``(1, 2, 2, j)`` for ``j >= 3``: signs in row 2;
    * ``(2, i, 2, j)`` for ``i, j >= 3``: remaining signs;
    * ``(2, 1, 2, 1)``: a second, independent curve for ``|theta_22|``.
    """
    if m < 2:
        raise ValueError("mode count must be at least 2")
    out = [(1, i, 1, j) for i in range(2, m + 1) for j in range(2, m + 1)]
    out += [(2, i, 1, 2) for i in range(3, m + 1)]
    out += [(1, 2, 2, j) for j in range(3, m + 1)]
    out += [(2, i, 2, j) for i in range(3, m + 1) for j in range(3, m + 1)]
    out.append((2, 1, 2, 1))
    return out


def port_sets(ports):
    """Unordered (outputs, inputs) pair; curves depend only on these sets."""
    return frozenset(ports[:2]), frozenset(ports[2:])


def default_tau_grid(spectrum, points=61, span=4.0):
    width = spectrum.rms_width()
    return np.linspace(-span / width, span / width, points)


@dataclass(frozen=True, eq=False)
class ExperimentPlan:
    """Ground truth plus acquisition settings of one simulated experiment.

    Parameters
    ----------
    rep, loss : RepresentativeMatrix, LossModel
        The interferometer to characterize.
    spectra : tuple of Spectrum
        Normalized spectrum entering each input port.
    tau : ndarray
        Delay grid of every coincidence curve.
    gamma_true : float
        Mode-matching parameter of the photon source.
    B : int
        Repetitions of each single-photon run.
    photons_per_run : float
        Expected photons injected per single-photon run.
    pairs_per_delay : float
        Expected photon pairs injected per delay point.
    vartheta_cal : float
        Angle of the calibration beam splitter (reflectivity ``cos``).
    noise : bool
        Poisson shot noise; without it the expected counts are returned as floats.
    seed : int
    tau0 : float or None
        Unknown zero of the delay axis; ``None`` draws it uniformly within
        two grid steps for every curve.
    count_scale : float
        Extra unknown factor on coincidence counts.
    herald_prob : tuple of float or None
        Per-port herald probability for scattershot acquisition.
    """

    rep: object
    loss: object
    spectra: tuple
    tau: np.ndarray
    gamma_true: float = 1.0
    B: int = 10
    photons_per_run: float = 1e5
    pairs_per_delay: float = 1000.0
    vartheta_cal: float = np.pi / 4
    noise: bool = True
    seed: int = 0
    tau0: float = None
    count_scale: float = 1.0
    herald_prob: tuple = None

    def __post_init__(self):
        m = self.rep.m
        if self.loss.m != m:
            raise DimensionMismatch("loss model and interferometer sizes differ")
        spectra = tuple(self.spectra)
        if len(spectra) != m:
            raise DimensionMismatch(f"need {m} spectra, got {len(spectra)}")
        for s in spectra:
            if not s.is_normalized(TOL_NORM):
                raise ValueError("spectra must be normalized")
        tau = np.array(self.tau, dtype=float)
        if tau.ndim != 1 or tau.size < 5 or np.any(np.diff(tau) <= 0):
            raise ValueError("tau must be a strictly increasing grid of at least 5 points")
        tau.setflags(write=False)
        check_gamma(self.gamma_true)
        if int(self.B) != self.B or self.B < 2:
            raise ValueError("B must be an integer >= 2")
        if self.photons_per_run <= 0 or self.pairs_per_delay <= 0 or self.count_scale <= 0:
            raise ValueError("rates must be positive")
        if self.herald_prob is not None:
            hp = tuple(float(p) for p in self.herald_prob)
            if len(hp) != m or any(not 0 < p <= 1 for p in hp):
                raise ValueError("herald_prob needs one value in (0, 1] per port")
            object.__setattr__(self, "herald_prob", hp)
        object.__setattr__(self, "spectra", spectra)
        object.__setattr__(self, "tau", tau)
        object.__setattr__(self, "B", int(self.B))

    @property
    def m(self):
        return self.rep.m

    def with_(self, **changes):
        return replace(self, **changes)

    def rng(self, *key):
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=tuple(key)))


def make_plan(m, seed=0, spectrum="gaussian", width=1.0, jitter=0.0, lossy=True,
              tau_points=61, rep=None, loss=None, **kwargs):
    """Plan with a Haar-random interferometer and random port losses.

    ``spectrum`` names a factory in ``SPECTRUM_FACTORIES``; with ``jitter``
    the measured-like spectra differ slightly between ports.
    """
    root = np.random.SeedSequence(seed)
    s_rep, s_loss, s_spec = root.spawn(3)
    if rep is None:
        rep = random_representative(m, np.random.default_rng(s_rep))
    if loss is None:
        loss = LossModel.random(m, np.random.default_rng(s_loss)) if lossy else LossModel.lossless(m)
    factory = SPECTRUM_FACTORIES[spectrum]
    if spectrum == "measured" and jitter:
        rng = np.random.default_rng(s_spec)
        spectra = tuple(factory(width=width, rng=rng, jitter=jitter) for _ in range(m))
    else:
        spectra = (factory(width=width),) * m
    tau = default_tau_grid(spectra[0], tau_points)
    return ExperimentPlan(rep, loss, spectra, tau, seed=seed, **kwargs)


# -- single-photon counts ------------------------------------------------------


def _singles(probs, photons_per_run, B, noise, rng):
    m = probs.shape[0]
    if noise:
        n_b = rng.poisson(photons_per_run, size=(m, B)).astype(float)
        lam = probs[:, :, None] * n_b[None, :, :]
        return rng.poisson(lam)
    lam = probs[:, :, None] * np.full((1, m, B), float(photons_per_run))
    return lam


def simulate_single_counts(plan):
    """Counts ``N[i, j, b]`` from photons injected at input j, run b."""
    probs = single_photon_probs(plan.rep, plan.loss)
    counts = _singles(probs, plan.photons_per_run, plan.B, plan.noise, plan.rng(_TAG_SINGLES))
    return SinglePhotonCounts(counts)


# -- coincidence curves ----------------------------------------------------------


def _check_ports(ports, m):
    ports = tuple(int(p) for p in ports)
    if len(ports) != 4 or ports[0] == ports[1] or ports[2] == ports[3]:
        raise ValueError(f"invalid port tuple {ports}")
    if any(not 1 <= p <= m for p in ports):
        raise ValueError(f"port tuple {ports} out of range for m={m}")
    return ports


def _draw_tau0(plan, rng):
    if plan.tau0 is not None:
        return float(plan.tau0)
    step = float(np.mean(np.diff(plan.tau)))
    return float(rng.uniform(-2 * step, 2 * step))


def expected_coincidences(plan, ports, tau0=0.0):
    """Mean counts of a coincidence curve, including losses and the count scale."""
    ports = _check_ports(ports, plan.m)
    j, jp = ports[2] - 1, ports[3] - 1
    env = SpectralEnvelope(plan.spectra[j], plan.spectra[jp])
    params = SubmatrixParams.from_rep(plan.rep, ports)
    shape = curve_from_envelope(env, plan.tau - tau0, params, plan.gamma_true)
    return plan.pairs_per_delay * plan.count_scale * loss_factor(plan.rep, plan.loss, ports) * shape


def _sample_curve(mean, noise, rng):
    if noise:
        return rng.poisson(mean).astype(float)
    return np.asarray(mean, dtype=float)


def simulate_coincidence(plan, ports):
    """Coincidence curve for outputs ``(i, i')`` and inputs ``(j, j')``."""
    ports = _check_ports(ports, plan.m)
    rng = plan.rng(_TAG_CURVE, *ports)
    tau0 = _draw_tau0(plan, rng)
    mean = expected_coincidences(plan, ports, tau0)
    return CoincidenceCurve(ports, plan.tau, _sample_curve(mean, plan.noise, rng))


def calibration_truth(plan):
    """Beam-splitter submatrix used for calibration."""
    return beam_splitter_params(plan.vartheta_cal)


def simulate_calibration(plan):
    """Calibration curve on a lossless beam splitter of angle ``vartheta_cal``.

    The photons are those of input ports 1 and 2. Returns the curve and the
    single-photon counts (2 x 2 x B) through the same splitter.
    """
    rng = plan.rng(_TAG_CALIBRATION)
    tau0 = _draw_tau0(plan, rng)
    env = SpectralEnvelope(plan.spectra[0], plan.spectra[1])
    shape = curve_from_envelope(env, plan.tau - tau0, calibration_truth(plan), plan.gamma_true)
    mean = plan.pairs_per_delay * plan.count_scale * shape
    curve = CoincidenceCurve((1, 2, 1, 2), plan.tau, _sample_curve(mean, plan.noise, rng))
    c, s = np.cos(plan.vartheta_cal) ** 2, np.sin(plan.vartheta_cal) ** 2
    probs = np.array([[c, s], [s, c]])
    singles = _singles(probs, plan.photons_per_run, plan.B, plan.noise, plan.rng(_TAG_CAL_SINGLES))
    return curve, SinglePhotonCounts(singles)


# -- curve sources -----------------------------------------------------------------


class DatasetSource:
    """Curves from a fixed collection.

    Lookup tries the exact tuple first and then any stored curve on the same
    output and input sets.
    """

    def __init__(self, curves):
        self._curves = {}
        self._by_sets = {}
        for c in curves.values() if isinstance(curves, dict) else curves:
            self._curves[c.ports] = c
            self._by_sets.setdefault(port_sets(c.ports), c)
        self.requested = []

    def available(self, ports):
        ports = tuple(ports)
        return ports in self._curves or port_sets(ports) in self._by_sets

    def get(self, ports):
        ports = tuple(ports)
        self.requested.append(ports)
        if ports in self._curves:
            return self._curves[ports]
        c = self._by_sets.get(port_sets(ports))
        if c is None:
            raise MissingCurve(ports)
        return c

    def curves(self):
        return dict(self._curves)


class SimulatedSource:
    """Curves simulated on demand, as if re-acquired from the experiment."""

    def __init__(self, plan, preload=()):
        self.plan = plan
        self._cache = {}
        self.requested = []
        for c in preload:
            self._cache[c.ports] = c

    def available(self, ports):
        return True

    def get(self, ports):
        ports = tuple(int(p) for p in ports)
        self.requested.append(ports)
        c = self._cache.get(ports)
        if c is None:
            c = simulate_coincidence(self.plan, ports)
            self._cache[ports] = c
        return c

    def curves(self):
        return dict(self._cache)


def simulate_direct(plan, tuples=None):
    """Singles, calibration and the standard curve set, acquired one by one."""
    tuples = standard_tuples(plan.m) if tuples is None else tuples
    curves = {t: simulate_coincidence(plan, t) for t in tuples}
    cal_curve, cal_singles = simulate_calibration(plan)
    return SimulatedData(simulate_single_counts(plan), curves, cal_curve, cal_singles)


@dataclass
class SimulatedData:
    singles: SinglePhotonCounts
    curves: dict
    calibration: CoincidenceCurve
    calibration_singles: SinglePhotonCounts
    accounting: dict = field(default_factory=dict)

    def source(self):
        return DatasetSource(self.curves)


# -- scattershot acquisition ----------------------------------------------------------


@dataclass(frozen=True)
class ScattershotEvent:
    """One pump pulse: which heralds fired, which outputs clicked, and the delay setting."""

    heralds: frozenset
    outputs: frozenset
    delay_setting: tuple


def classify_event(event, required_sets):
    """Apply the scattershot selection rule to one event.

    Returns ``("single", (i, j))`` for one herald and one output click,
    ``("pair", (outputs, inputs))`` for two heralds whose input pair and
    output pair form a required curve in the phase sweeping one of them,
    and ``("discard", reason)`` otherwise.
    """
    h, o = event.heralds, event.outputs
    if len(h) == 1 and len(o) == 1:
        return "single", (next(iter(o)), next(iter(h)))
    if len(h) == 2 and len(o) == 2:
        swept = event.delay_setting[0]
        key = (frozenset(o), frozenset(h))
        if swept in h and key in required_sets and _phase_records(swept, h):
            return "pair", key
        return "discard", "unrecorded pair"
    if len(h) > 2:
        return "discard", "multi-herald"
    return "discard", "no usable detection"


def _phase_records(swept, heralds):
    # port-1 sweep records every pair containing 1; port-2 sweep the pairs {2, j >= 3}
    if swept == 1:
        return 1 in heralds
    return 2 in heralds and 1 not in heralds


def _herald_pattern_probs(p):
    """Probabilities of exactly-one and exactly-two herald patterns."""
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    m = p.size
    single = np.empty(m)
    for j in range(m):
        single[j] = p[j] * np.prod(np.delete(q, j))
    pair = {}
    for j in range(m):
        for k in range(j + 1, m):
            pair[(j + 1, k + 1)] = p[j] * p[k] * np.prod(np.delete(q, [j, k]))
    return single, pair


@dataclass(frozen=True)
class ScattershotSettings:
    budget: float
    pulses_per_setting: int
    settings: tuple


def scattershot_settings(plan, budget):
    """Pulses per delay setting so that two-herald events total ``budget`` on average."""
    if plan.herald_prob is None:
        raise ValueError("plan has no herald probabilities")
    if budget <= 0:
        raise ValueError("budget must be positive")
    _, pair = _herald_pattern_probs(plan.herald_prob)
    q2 = sum(pair.values())
    swept = (1, 2) if plan.m > 2 else (1,)
    settings = tuple((port, k) for port in swept for k in range(plan.tau.size))
    pulses = int(np.ceil(budget / (q2 * len(settings))))
    return ScattershotSettings(float(budget), pulses, settings)


def simulate_scattershot(plan, budget, tuples=None):
    """Acquire singles and the curve set with heralded sources on every input.

    Delay settings sweep the port-1 photon over the grid (recording pairs that
    contain input 1) and then the port-2 photon (recording pairs ``{2, j}``,
    ``j >= 3``). Herald patterns per setting are drawn from a multinomial; for
    two-herald patterns the output pair is drawn from the coincidence model.
    Shot noise is always on.

    Returns
    -------
    SimulatedData
        With ``accounting`` holding event totals.

    Raises
    ------
    IncompleteAcquisition
        If any required curve has fewer counts than delay points.
    """
    m = plan.m
    tuples = standard_tuples(m) if tuples is None else [tuple(t) for t in tuples]
    cfg = scattershot_settings(plan, budget)
    rng = plan.rng(_TAG_SCATTERSHOT)
    single_p, pair_p = _herald_pattern_probs(plan.herald_prob)
    pair_keys = list(pair_p)
    pattern_probs = np.concatenate([single_p, [pair_p[k] for k in pair_keys]])
    rest = max(0.0, 1.0 - pattern_probs.sum())
    p_none = np.prod(1.0 - np.asarray(plan.herald_prob))
    p_multi = max(0.0, rest - p_none)
    pattern_probs = np.concatenate([pattern_probs, [p_none, p_multi]])
    pattern_probs /= pattern_probs.sum()

    by_sets = {}
    for t in tuples:
        by_sets.setdefault(port_sets(t), []).append(t)
    tau0 = {t: _draw_tau0(plan, plan.rng(_TAG_CURVE, *t)) for t in tuples}

    # output-pair distributions per input pair and delay index
    out_pairs = [(i, k) for i in range(1, m + 1) for k in range(i + 1, m + 1)]
    pair_dist = {}
    for (j, jp) in pair_keys:
        rows = []
        for (i, ip) in out_pairs:
            ts = by_sets.get((frozenset((i, ip)), frozenset((j, jp))))
            t0 = tau0[ts[0]] if ts else 0.0
            probe = plan.with_(pairs_per_delay=1.0, count_scale=1.0)
            rows.append(expected_coincidences(probe, (i, ip, j, jp), t0))
        pair_dist[(j, jp)] = np.array(rows)

    probs = single_photon_probs(plan.rep, plan.loss)
    curve_counts = {t: np.zeros(plan.tau.size) for t in tuples}
    turn = {k: 0 for k in by_sets}
    single_events = np.zeros(m, dtype=np.int64)
    n_multi = 0
    n_pair_retained = 0
    n_pair_events = 0
    for swept, k in cfg.settings:
        n = rng.multinomial(cfg.pulses_per_setting, pattern_probs)
        single_events += n[:m]
        n_multi += n[-1]
        for idx, (j, jp) in enumerate(pair_keys):
            count = n[m + idx]
            if count == 0:
                continue
            n_pair_events += count
            if not _phase_records(swept, (j, jp)) or swept not in (j, jp):
                continue
            dist = pair_dist[(j, jp)][:, k]
            outcome = rng.multinomial(count, np.append(dist, max(0.0, 1.0 - dist.sum())))
            for (i, ip), c in zip(out_pairs, outcome[:-1]):
                ts = by_sets.get((frozenset((i, ip)), frozenset((j, jp))))
                if not ts or c == 0:
                    continue
                # duplicate tuples on the same port sets take turns
                key = port_sets(ts[0])
                start, L = turn[key], len(ts)
                for q, t in enumerate(ts):
                    curve_counts[t][k] += (start + c - 1 - q) // L - (start - 1 - q) // L
                turn[key] += c
                n_pair_retained += c

    # single-herald events: split into B chunks, then route to outputs
    B = plan.B
    singles = np.zeros((m, m, B), dtype=np.int64)
    n_single_retained = 0
    for j in range(m):
        chunks = rng.multinomial(single_events[j], np.full(B, 1.0 / B))
        col = np.append(probs[:, j], max(0.0, 1.0 - probs[:, j].sum()))
        for b in range(B):
            out = rng.multinomial(chunks[b], col)
            singles[:, j, b] = out[:m]
            n_single_retained += out[:m].sum()

    missing = [t for t in tuples if curve_counts[t].sum() < plan.tau.size]
    if missing:
        raise IncompleteAcquisition(missing)
    total = int(single_events.sum()) + int(n_pair_events) + int(n_multi)
    retained = int(n_single_retained + n_pair_retained)
    accounting = {
        "budget": cfg.budget,
        "pulses_per_setting": cfg.pulses_per_setting,
        "settings": len(cfg.settings),
        "total_events": total,
        "retained": retained,
        "discarded": total - retained,
        "multi_herald": int(n_multi),
        "retained_pairs": int(n_pair_retained),
        "retained_singles": int(n_single_retained),
    }
    curves = {t: CoincidenceCurve(t, plan.tau, curve_counts[t]) for t in tuples}
    cal_curve, cal_singles = simulate_calibration(plan)
    return SimulatedData(SinglePhotonCounts(singles), curves, cal_curve, cal_singles, accounting)
