"""Amplitudes from single-photon counts, the mode-matching calibration, and
arguments (magnitudes and signs) from coincidence curves.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .coincidence import SubmatrixParams, beam_splitter_params, make_envelope
from .errors import (
    FitFailure,
    MissingCurve,
    UnstableSign,
    UnstableSignWarning,
    ZeroCountChannel,
)
from .fitting import FitProblem, Start, fit, fold_angle
from .kernels import pair_product_stats
from .model import wrap_angle

THETA_THRESHOLD = 0.15
TOL_ZERO_ANGLE = 0.02
# zero-angle cutoff used inside the pipeline; exact data must keep tiny signs
PIPELINE_TOL_ZERO_ANGLE = 1e-6


# -- amplitudes --------------------------------------------------------------------


@dataclass
class AmplitudeEstimate:
    """Estimated amplitudes ``alpha_hat`` and their spread ``sigma_alpha``."""

    alpha_hat: np.ndarray
    sigma_alpha: np.ndarray

    @property
    def m(self):
        return self.alpha_hat.shape[0]


def estimate_amplitudes(counts, rng=None):
    """Amplitudes from ratios of single-photon counts.

    For ``i, j >= 2`` the estimate is the mean over all repetition pairs
    ``(b1, bj)`` of ``sqrt(N[0,0,b1] N[i,j,bj] / (N[0,j,bj] N[i,0,b1]))``,
    and ``sigma`` the standard deviation over the same pairs. Per-run photon
    numbers and port losses cancel in the ratio.

    Parameters
    ----------
    counts : SinglePhotonCounts
    rng : numpy Generator, optional
        If given, the repetition indices of each entry are resampled with
        replacement (independently per entry), as in the bootstrap.

    Raises
    ------
    ZeroCountChannel
        If a denominator count is zero (ports and repetition are 1-based).
    """
    N = np.asarray(counts.counts, dtype=float)
    m, _, B = N.shape
    alpha = np.ones((m, m))
    sigma = np.zeros((m, m))
    for i in range(1, m):
        zero = np.flatnonzero(N[i, 0] == 0)
        if zero.size:
            raise ZeroCountChannel(i + 1, 1, int(zero[0]) + 1)
    for j in range(1, m):
        zero = np.flatnonzero(N[0, j] == 0)
        if zero.size:
            raise ZeroCountChannel(1, j + 1, int(zero[0]) + 1)
    for i in range(1, m):
        for j in range(1, m):
            if rng is None:
                b1 = bj = np.arange(B)
            else:
                b1 = rng.integers(0, B, B)
                bj = rng.integers(0, B, B)
            x = np.sqrt(N[0, 0, b1] / N[i, 0, b1])
            y = np.sqrt(N[i, j, bj] / N[0, j, bj])
            alpha[i, j], sigma[i, j] = pair_product_stats(x, y)
    return AmplitudeEstimate(alpha, sigma)


# -- calibration ---------------------------------------------------------------------


def estimate_bs_angle(amp):
    """Splitter angle from the amplitude ``alpha_22 = cot(vartheta)**2``.

    ``amp`` is an AmplitudeEstimate of a 2 x 2 splitter or the value of
    ``alpha_22`` itself.
    """
    a22 = float(amp.alpha_hat[1, 1]) if isinstance(amp, AmplitudeEstimate) else float(amp)
    if not a22 > 0:
        raise ValueError("alpha_22 must be positive (vartheta = pi/2 is degenerate)")
    if np.isinf(a22):
        return 0.0
    return float(np.arctan(1.0 / np.sqrt(a22)))


def warm_start(result):
    """Single fitting start at the solution of an earlier fit."""
    return [Start(result.shape, result.scale, result.shift, "warm")]


def calibrate_gamma(cal_curve, spec1, spec2, vartheta, envelope_kind="spectral",
                    extra_starts=()):
    """Fit the mode-matching parameter on a splitter of known angle.

    ``extra_starts`` are tried in addition to the heuristic starting points.

    Returns
    -------
    gamma : float
    result : FitResult
    """
    env = make_envelope(spec1, spec2, envelope_kind)
    problem = FitProblem(cal_curve, env, beam_splitter_params(vartheta), "gamma")
    result = fit(problem, extra_starts=extra_starts)
    return result.shape, result


# -- argument magnitudes and signs -----------------------------------------------------


def _alpha(amps):
    return amps.alpha_hat if isinstance(amps, AmplitudeEstimate) else np.asarray(amps)


def fit_net_phase(curve, amps, gamma, envelope, shape_kind="beta", extra_starts=()):
    """Fold of the net phase ``|theta_ij - theta_ij' - theta_i'j + theta_i'j'|``.

    Amplitudes of the four entries are taken from ``amps``; the result lies
    in ``[0, pi]``.
    """
    alpha = _alpha(amps)
    i, ip, j, jp = (p - 1 for p in curve.ports)
    params = SubmatrixParams(
        (alpha[i, j], alpha[i, jp], alpha[ip, j], alpha[ip, jp]), (0.0, 0.0, 0.0, 0.0)
    )
    result = fit(FitProblem(curve, envelope, params, shape_kind, gamma),
                 extra_starts=extra_starts)
    return result.shape, result


def estimate_abs_theta(curve, amps, gamma, envelope):
    """``|theta_ij|`` from a curve on outputs ``{1, i}`` and inputs ``{1, j}``.

    The sign cannot be seen in the curve shape.

    Returns
    -------
    abs_theta : float
    result : FitResult
    """
    return fit_net_phase(curve, amps, gamma, envelope, "abs_theta")


def reference_phase(th_ipjp, th_ijp, th_ipj):
    """``theta_i'j' - theta_ij' - theta_i'j``, the known part of the net phase."""
    return th_ipjp - th_ijp - th_ipj


def stability_margin(delta):
    """Distance of the folded reference phase from 0 and pi."""
    d = fold_angle(delta)
    return np.minimum(d, np.pi - d)


def sign_calc(beta, th_ipjp, th_ijp, th_ipj, abs_theta, tol_zero_angle=TOL_ZERO_ANGLE):
    """Sign of ``theta_ij`` from the fitted fold ``beta`` of the net phase.

    The two candidates are ``beta_pm = fold(delta +- |theta_ij|)`` with
    ``delta`` the reference phase; the sign is +1 when ``beta`` is closer to
    ``beta_plus``. Folding into ``[0, pi]`` keeps the candidates comparable
    with ``beta`` when ``delta +- |theta_ij|`` leaves ``(-pi, pi]``.

    Returns 0 when ``|theta_ij| < tol_zero_angle``, or when both candidates
    are equally close.
    """
    if abs(abs_theta) < tol_zero_angle:
        return 0
    delta = reference_phase(th_ipjp, th_ijp, th_ipj)
    b_plus = fold_angle(delta + abs(abs_theta))
    b_minus = fold_angle(delta - abs(abs_theta))
    return int(np.sign(abs(beta - b_minus) - abs(beta - b_plus)))


@dataclass
class ArgumentEstimate:
    """Estimated arguments and the curves that fixed their signs.

    Attributes
    ----------
    theta_hat : ndarray
        Arguments in (-pi, pi], zero on the first row and column, with
        ``theta_hat[1, 1] >= 0``.
    sign_source : dict
        ``(i, j) -> port tuple`` (1-based) of the curve that fixed the sign,
        or a string for entries fixed by convention.
    stability_margin : ndarray
        Margin of the reference phase for every sign-resolved entry (nan elsewhere).
    permutation : tuple
        ``(outputs, inputs)``: working label -> physical label, 1-based.
    unstable : list
        Entries whose sign could not be made stable.
    fits : dict
        ``port tuple -> FitResult`` of every curve used.
    alternatives : list
        ``(entry, partner)`` re-resolutions in working labels, in order.
    """

    theta_hat: np.ndarray
    sign_source: dict
    stability_margin: np.ndarray
    permutation: tuple
    unstable: list = field(default_factory=list)
    fits: dict = field(default_factory=dict)
    magnitude: np.ndarray = None
    notes: list = field(default_factory=list)
    alternatives: list = field(default_factory=list)

    def to_dict(self):
        return {
            "theta_hat": self.theta_hat.tolist(),
            "stability_margin": np.where(
                np.isnan(self.stability_margin), None, self.stability_margin
            ).tolist(),
            "sign_source": {f"{i},{j}": (list(s) if isinstance(s, tuple) else s)
                            for (i, j), s in sorted(self.sign_source.items())},
            "relabeling": {"outputs": list(self.permutation[0]),
                           "inputs": list(self.permutation[1])},
            "unstable": [list(e) for e in self.unstable],
            "notes": list(self.notes),
        }


class _ArgumentSolver:
    """Work state of ``estimate_arguments`` in (possibly relabeled) working labels."""

    def __init__(self, source, alpha, gamma, spectra, envelope_kind, theta_threshold,
                 warm=None):
        self.source = source
        self.warm = warm or {}
        self.alpha = alpha
        self.gamma = gamma
        self.spectra = spectra
        self.envelope_kind = envelope_kind
        self.threshold = theta_threshold
        self.m = alpha.shape[0]
        self._envelopes = {}
        self.fits = {}

    def envelope(self, j, jp):
        key = (min(j, jp), max(j, jp))
        env = self._envelopes.get(key)
        if env is None:
            env = make_envelope(self.spectra[key[0] - 1], self.spectra[key[1] - 1],
                                self.envelope_kind)
            self._envelopes[key] = env
        return env

    def fit_curve(self, ports, shape_kind="beta"):
        """Fit a physical port tuple, reusing earlier fits of the same tuple."""
        ports = tuple(int(p) for p in ports)
        res = self.fits.get(ports)
        if res is None:
            curve = self.source.get(ports)
            if curve.ports != ports:
                # the source returned the same port sets in another order
                ports_used = curve.ports
            else:
                ports_used = ports
            prior = self.warm.get(ports)
            starts = warm_start(prior) if prior is not None else ()
            try:
                _, res = fit_net_phase(curve, self.alpha, self.gamma,
                                       self.envelope(ports_used[2], ports_used[3]), shape_kind,
                                       starts)
            except FitFailure as exc:
                raise FitFailure("fit failed", best=exc.best, ports=ports) from exc
            self.fits[ports] = res
        return res.shape


def _physical(ports, perm_out, perm_in):
    i, ip, j, jp = ports
    return (perm_out[i - 1], perm_out[ip - 1], perm_in[j - 1], perm_in[jp - 1])


def _swap_perm(m, a):
    perm = list(range(1, m + 1))
    perm[1], perm[a - 1] = perm[a - 1], perm[1]
    return tuple(perm)


def sign_plan(m):
    """Primary ``(entry, partner)`` pairs in resolution order (1-based).

    The sign of ``theta[entry]`` is read from the curve on outputs
    ``{entry[0], partner[0]}`` and inputs ``{entry[1], partner[1]}``.
    """
    plan = [((i, 2), (2, 1)) for i in range(3, m + 1)]
    plan += [((2, j), (1, 2)) for j in range(3, m + 1)]
    plan += [((i, j), (2, 2)) for i in range(3, m + 1) for j in range(3, m + 1)]
    return plan


def _sign_tuple(entry, partner):
    (a, c), (b, d) = entry, partner
    return (a, b, c, d)


def estimate_arguments(source, amps, gamma, spectra, theta_threshold=THETA_THRESHOLD,
                       mitigate=True, envelope_kind="spectral", strict=False,
                       permutation=None, alternatives=None,
                       tol_zero_angle=PIPELINE_TOL_ZERO_ANGLE, warm=None):
    """Arguments of the representative matrix from coincidence curves.

    Steps: magnitudes from the ``(1, i, 1, j)`` curves; optional relabeling
    of output and input 2 so that ``|theta_22|`` is as close to pi/2 as
    possible; ``theta_22 >= 0`` by convention; signs of row and column 2;
    signs of the remaining entries; finally, entries whose reference phase
    lies within ``theta_threshold`` of 0 or pi are re-resolved with the
    best-conditioned alternative curve.

    Parameters
    ----------
    source : DatasetSource or SimulatedSource
        Supplies curves by physical port tuple.
    amps : AmplitudeEstimate or ndarray
    gamma : float
        Mode-matching parameter used in every fit.
    spectra : sequence of Spectrum
        Spectrum of each input port.
    mitigate : bool
        Enables the relabeling and the threshold re-resolution.
    strict : bool
        Raise ``UnstableSign`` instead of warning.
    permutation, alternatives : optional
        Force a relabeling ``(outputs, inputs)`` and the ordered list of
        ``(entry, partner)`` re-resolutions in working labels. Used to replay
        a primary run on bootstrap data; no threshold search is done then.
    tol_zero_angle : float
        Magnitudes below this are treated as zero and take a positive sign.
    warm : dict, optional
        ``port tuple -> FitResult`` of an earlier run; its solution is an
        additional starting point for the same curve.

    Raises
    ------
    MissingCurve
        When a required curve is absent.
    UnstableSign
        Only with ``strict=True``.
    """
    alpha_phys = _alpha(amps)
    m = alpha_phys.shape[0]
    solver = _ArgumentSolver(source, alpha_phys, gamma, spectra, envelope_kind, theta_threshold,
                            warm)
    notes = []

    # magnitudes in physical labels
    mag_phys = np.zeros((m, m))
    for i in range(2, m + 1):
        for j in range(2, m + 1):
            mag_phys[i - 1, j - 1] = solver.fit_curve((1, i, 1, j), "abs_theta")
    if m >= 2 and source.available((2, 1, 2, 1)):
        second = solver.fit_curve((2, 1, 2, 1), "abs_theta")
        mag_phys[1, 1] = 0.5 * (mag_phys[1, 1] + second)

    # relabeling
    ident = tuple(range(1, m + 1))
    if permutation is not None:
        perm_out, perm_in = tuple(permutation[0]), tuple(permutation[1])
    else:
        perm_out, perm_in = ident, ident
        if mitigate and m >= 3:
            block = np.abs(mag_phys[1:, 1:] - np.pi / 2)
            a, c = np.unravel_index(np.argmin(block), block.shape)
            a, c = int(a) + 2, int(c) + 2
            if (a, c) != (2, 2):
                po, pi_ = _swap_perm(m, a), _swap_perm(m, c)
                needed = [_physical(_sign_tuple(e, p), po, pi_) for e, p in sign_plan(m)]
                if all(source.available(t) for t in needed):
                    perm_out, perm_in = po, pi_
                else:
                    notes.append("relabeling skipped: curves for the relabeled ports unavailable")

    def phys(ports):
        return _physical(ports, perm_out, perm_in)

    mag = np.zeros((m, m))
    for i in range(2, m + 1):
        for j in range(2, m + 1):
            mag[i - 1, j - 1] = mag_phys[perm_out[i - 1] - 1, perm_in[j - 1] - 1]

    theta = np.zeros((m, m))
    margin = np.full((m, m), np.nan)
    resolved = np.zeros((m, m), dtype=bool)
    resolved[0, :] = resolved[:, 0] = True
    stable = resolved.copy()
    sources = {}
    if m >= 2:
        theta[1, 1] = mag[1, 1]
        resolved[1, 1] = stable[1, 1] = True
        sources[(2, 2)] = "convention"

    def resolve(entry, partner):
        (a, c), (b, d) = entry, partner
        beta = solver.fit_curve(phys(_sign_tuple(entry, partner)))
        t_bd, t_ad, t_bc = theta[b - 1, d - 1], theta[a - 1, d - 1], theta[b - 1, c - 1]
        s = sign_calc(beta, t_bd, t_ad, t_bc, mag[a - 1, c - 1], tol_zero_angle)
        mg = float(stability_margin(reference_phase(t_bd, t_ad, t_bc)))
        return s, mg

    for entry, partner in sign_plan(m):
        a, c = entry
        s, mg = resolve(entry, partner)
        theta[a - 1, c - 1] = s * mag[a - 1, c - 1] if s else mag[a - 1, c - 1]
        margin[a - 1, c - 1] = mg
        resolved[a - 1, c - 1] = True
        stable[a - 1, c - 1] = mg > theta_threshold or not mitigate
        sources[entry] = phys(_sign_tuple(entry, partner))

    # threshold re-resolution with alternative partners
    unstable = []
    chosen = []
    if alternatives is not None:
        for entry, partner in alternatives:
            a, c = entry
            s, mg = resolve(entry, partner)
            theta[a - 1, c - 1] = s * mag[a - 1, c - 1] if s else mag[a - 1, c - 1]
            margin[a - 1, c - 1] = mg
            sources[entry] = phys(_sign_tuple(entry, partner))
            chosen.append((entry, partner))
    elif mitigate:
        pending = [e for e, _ in sign_plan(m) if not stable[e[0] - 1, e[1] - 1]]
        progress = True
        while pending and progress:
            progress = False
            for entry in list(pending):
                a, c = entry
                options = []
                for b in range(2, m + 1):
                    for d in range(2, m + 1):
                        if b == a or d == c:
                            continue
                        if not (stable[b - 1, d - 1] and stable[a - 1, d - 1]
                                and stable[b - 1, c - 1]):
                            continue
                        delta = reference_phase(theta[b - 1, d - 1], theta[a - 1, d - 1],
                                                theta[b - 1, c - 1])
                        options.append((float(stability_margin(delta)), (b, d)))
                options = [p for mg, p in sorted(options, key=lambda t: (-t[0], t[1]))
                           if mg > theta_threshold
                           and source.available(phys(_sign_tuple(entry, p)))]
                if not options:
                    continue
                partner = options[0]
                s, mg = resolve(entry, partner)
                theta[a - 1, c - 1] = s * mag[a - 1, c - 1] if s else mag[a - 1, c - 1]
                margin[a - 1, c - 1] = mg
                stable[a - 1, c - 1] = True
                sources[entry] = phys(_sign_tuple(entry, partner))
                chosen.append((entry, partner))
                pending.remove(entry)
                progress = True
        unstable = list(pending)

    # back to physical labels
    theta_phys = np.zeros((m, m))
    margin_phys = np.full((m, m), np.nan)
    sources_phys = {}
    for i in range(1, m + 1):
        for j in range(1, m + 1):
            pi_, pj = perm_out[i - 1], perm_in[j - 1]
            theta_phys[pi_ - 1, pj - 1] = theta[i - 1, j - 1]
            margin_phys[pi_ - 1, pj - 1] = margin[i - 1, j - 1]
            if (i, j) in sources:
                sources_phys[(pi_, pj)] = sources[(i, j)]
    unstable_phys = [(perm_out[a - 1], perm_in[c - 1]) for a, c in unstable]
    if m >= 2 and theta_phys[1, 1] < 0:
        theta_phys = -theta_phys
    theta_phys = wrap_angle(theta_phys)
    theta_phys[0, :] = theta_phys[:, 0] = 0.0

    for i, j in unstable_phys:
        mg = margin_phys[i - 1, j - 1]
        if strict:
            raise UnstableSign(i, j, mg)
        warnings.warn(f"unstable sign for entry ({i}, {j}), margin {mg:.3g}",
                      UnstableSignWarning, stacklevel=2)

    mag_out = np.abs(theta_phys)
    return ArgumentEstimate(
        theta_hat=theta_phys,
        sign_source=sources_phys,
        stability_margin=margin_phys,
        permutation=(perm_out, perm_in),
        unstable=unstable_phys,
        fits=dict(solver.fits),
        magnitude=mag_out,
        notes=notes,
        alternatives=chosen,
    )


__all__ = [
    "AmplitudeEstimate",
    "ArgumentEstimate",
    "MissingCurve",
    "calibrate_gamma",
    "estimate_abs_theta",
    "estimate_amplitudes",
    "estimate_arguments",
    "estimate_bs_angle",
    "fit_net_phase",
    "sign_calc",
    "sign_plan",
    "stability_margin",
    "warm_start",
]
