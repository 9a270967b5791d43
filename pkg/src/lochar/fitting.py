"""Weighted least-squares fits of coincidence curves.

Every fit has three free parameters: a shape parameter (the mode-matching
parameter or an argument), an ordinate scale and an abscissa shift. The
optimizer works on unconstrained coordinates ``(u, v, shift)``::

    gamma = logistic(u)           shape kind "gamma"
    angle = pi * logistic(u)      shape kinds "abs_theta" and "beta"
    scale = exp(v)

and reports back-transformed values.
"""

from dataclasses import dataclass, field

import numpy as np

from .coincidence import baseline
from .errors import FitFailure
from .model import CoincidenceCurve, check_gamma, wrap_angle

SHAPE_KINDS = ("gamma", "abs_theta", "beta")
ANGLE_STARTS = (np.pi / 4, 3 * np.pi / 4, 5 * np.pi / 4, 7 * np.pi / 4)
U_CLIP = 40.0
SHAPE_EPS = 1e-9

MAX_ITER = 200
FTOL = 1e-10
GTOL = 1e-8
JAC_STEP = 1e-6


def count_weights(counts):
    """``1 / C`` where ``C != 0`` and 1 elsewhere."""
    counts = np.asarray(counts, dtype=float)
    w = np.ones_like(counts)
    nz = counts != 0
    w[nz] = 1.0 / counts[nz]
    return w


def _logistic(u):
    u = np.clip(u, -U_CLIP, U_CLIP)
    return 1.0 / (1.0 + np.exp(-u))


def _logit(p):
    p = min(max(p, SHAPE_EPS), 1.0 - SHAPE_EPS)
    return float(np.log(p / (1.0 - p)))


def fold_angle(x):
    """Map an angle onto [0, pi] via ``|wrap(x)|``."""
    return np.abs(wrap_angle(x))


@dataclass
class FitProblem:
    """One curve together with everything held fixed while fitting it.

    Parameters
    ----------
    curve : CoincidenceCurve
        Measured counts.
    envelope : SpectralEnvelope or GaussianEnvelope
        Interference envelope of the two input spectra.
    params : SubmatrixParams
        Known amplitudes; the phases are used only for ``shape_kind="gamma"``.
    shape_kind : {"gamma", "abs_theta", "beta"}
        Which quantity the shape parameter represents.
    gamma : float
        Known mode-matching parameter for the angle kinds.
    weights : ndarray, optional
        Defaults to ``1 / C`` (1 where ``C == 0``).
    """

    curve: CoincidenceCurve
    envelope: object
    params: object
    shape_kind: str = "abs_theta"
    gamma: float = 1.0
    weights: np.ndarray = None

    def __post_init__(self):
        if self.shape_kind not in SHAPE_KINDS:
            raise ValueError(f"shape_kind must be one of {SHAPE_KINDS}")
        self.gamma = check_gamma(self.gamma)
        if self.weights is None:
            self.weights = count_weights(self.curve.counts)
        else:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != self.curve.counts.shape:
                raise ValueError("weights must match the curve length")
        self._base = self.params.direct_weight * self.envelope.direct_integral
        self._cross = 2.0 * self.params.cross_weight
        self._cache = {}

    @property
    def is_angle(self):
        return self.shape_kind != "gamma"

    def envelope_at(self, shift):
        h = self._cache.get(shift)
        if h is None:
            if len(self._cache) > 16:
                self._cache.clear()
            h = self.envelope(self.curve.tau - shift)
            self._cache[shift] = h
        return h

    def interference_factor(self, shape):
        """Coefficient multiplying ``2 Q H(tau - shift)``."""
        if self.is_angle:
            return self.gamma * np.cos(shape)
        return shape * np.cos(self.params.net_phase)

    def model(self, shape, scale, shift):
        h = self.envelope_at(float(shift))
        return scale * (self._base + self._cross * self.interference_factor(shape) * h)

    def objective(self, shape, scale, shift):
        r = self.curve.counts - self.model(shape, scale, shift)
        return float(self.weights @ (r * r))

    # -- coordinate transforms ------------------------------------------------

    def to_internal(self, shape, scale, shift):
        if scale <= 0:
            raise ValueError("scale must be positive")
        if self.is_angle:
            u = _logit(float(fold_angle(shape)) / np.pi)
        else:
            u = _logit(float(shape))
        return np.array([u, np.log(scale), float(shift)])

    def from_internal(self, p):
        s = _logistic(p[0])
        shape = np.pi * s if self.is_angle else s
        return float(shape), float(np.exp(p[1])), float(p[2])


@dataclass
class FitResult:
    """Outcome of ``fit``.

    ``objective_value`` equals ``sum(weights * residuals**2)`` and
    ``residuals`` equals ``counts - fitted``.
    """

    shape: float
    scale: float
    shift: float
    objective_value: float
    residuals: np.ndarray
    fitted: np.ndarray
    converged: bool
    iterations: int
    start_used: int = 0
    ports: tuple = ()
    shape_kind: str = ""
    history: list = field(default_factory=list, repr=False)

    def diagnostics(self):
        return {
            "shape": self.shape,
            "scale": self.scale,
            "shift": self.shift,
            "objective": self.objective_value,
            "iterations": self.iterations,
            "converged": bool(self.converged),
            "start_used": self.start_used,
        }


@dataclass(frozen=True)
class Start:
    shape: float
    scale: float
    shift: float
    label: str


def locate_feature(problem):
    """Position, baseline and height of the interference feature in the data.

    For every grid point ``s`` the data are regressed on ``a + b H(tau - s)``
    (ordinary least squares) and the ``s`` explaining the most variance is
    kept. On noiseless data this is the extremum of the curve; on noisy,
    low-visibility curves it is far less sensitive to single outliers.

    Returns
    -------
    index : int
        Grid index of the feature centre.
    a, b : float
        Baseline and signed height per unit envelope.
    """
    tau = problem.curve.tau
    c = problem.curve.counts
    n = tau.size
    step = np.diff(tau)
    if np.allclose(step, step[0], rtol=1e-9):
        lags = np.arange(-(n - 1), n) * step[0]
        h = problem.envelope(lags)
        H = h[np.arange(n)[None, :] - np.arange(n)[:, None] + (n - 1)]
    else:
        H = problem.envelope((tau[None, :] - tau[:, None]).ravel()).reshape(n, n)
    # row s of H holds H(tau - tau_s)
    Hc = H - H.mean(axis=1, keepdims=True)
    cc = c - c.mean()
    cov = Hc @ cc
    var = np.einsum("ij,ij->i", Hc, Hc)
    score = np.where(var > 0, cov * cov / np.where(var > 0, var, 1.0), 0.0)
    k = int(np.argmax(score))
    b = cov[k] / var[k] if var[k] > 0 else 0.0
    a = c.mean() - b * H[k].mean()
    return k, float(a), float(b)


def initial_guesses(problem):
    """Heuristic starting points.

    The scale start matches the large-delay level ``(C[0] + C[-1]) / 2``.
    The shift start is the feature position from ``locate_feature`` and
    the shape start inverts the visibility of the regressed feature.
    Angle fits additionally get the four fixed starts pi/4, 3pi/4, 5pi/4
    and 7pi/4.
    """
    c = problem.curve.counts
    tau = problem.curve.tau
    if c.size < 5:
        raise ValueError("need at least five points for initial guesses")
    c_inf = baseline(c)
    if c_inf <= 0:
        if np.all(c == 0):
            raise FitFailure("flat curve with zero baseline", ports=problem.curve.ports)
        c_inf = float(np.mean(c))
    model_inf = problem._base
    if model_inf <= 0:
        raise FitFailure("model has zero baseline", ports=problem.curve.ports)
    scale0 = c_inf / model_inf
    k, a, b = locate_feature(problem)
    shift0 = float(tau[k])
    h0 = float(problem.envelope(np.zeros(1))[0])
    vis = abs(b) * h0 / a if a > 0 else 0.0
    is_peak = b > 0
    starts = []
    if problem.is_angle:
        denom = problem._cross * problem.gamma * h0
        ratio = min(1.0, vis * model_inf / denom) if denom > 0 else 0.0
        cos_s = ratio if is_peak else -ratio
        starts.append(Start(float(np.arccos(cos_s)), scale0, shift0, "visibility"))
        for a in ANGLE_STARTS:
            starts.append(Start(float(a), scale0, shift0, f"fixed {a:.4f}"))
    else:
        denom = problem._cross * abs(np.cos(problem.params.net_phase)) * h0
        g0 = min(1.0, vis * model_inf / denom) if denom > 0 else 0.0
        starts.append(Start(float(g0), scale0, shift0, "visibility"))
    return starts


def _residual_vector(problem, sw, p):
    shape, scale, shift = problem.from_internal(p)
    return sw * (problem.curve.counts - problem.model(shape, scale, shift))


def _jacobian(problem, sw, p):
    J = np.empty((problem.curve.counts.size, p.size))
    for a in range(p.size):
        h = JAC_STEP * max(abs(p[a]), 1.0)
        up = p.copy()
        dn = p.copy()
        up[a] += h
        dn[a] -= h
        J[:, a] = (_residual_vector(problem, sw, up) - _residual_vector(problem, sw, dn)) / (2 * h)
    return J


def levenberg_marquardt(problem, p0, max_iter=MAX_ITER, ftol=FTOL, gtol=GTOL):
    """Minimize the weighted objective from internal coordinates ``p0``.

    Returns ``(p, objective, iterations, converged, history)``.
    """
    sw = np.sqrt(problem.weights)
    p = np.asarray(p0, dtype=float).copy()
    p[0] = np.clip(p[0], -U_CLIP, U_CLIP)
    r = _residual_vector(problem, sw, p)
    f = float(r @ r)
    history = [f]
    damping = 1e-3
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        J = _jacobian(problem, sw, p)
        g = J.T @ r
        if np.max(np.abs(g)) < gtol:
            converged = True
            break
        A = J.T @ J
        diag = np.maximum(np.diag(A), 1e-12)
        accepted = False
        while damping < 1e16:
            M = A + damping * np.diag(diag)
            try:
                step = np.linalg.solve(M, -g)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(M, -g, rcond=None)[0]
            p_new = p + step
            p_new[0] = np.clip(p_new[0], -U_CLIP, U_CLIP)
            r_new = _residual_vector(problem, sw, p_new)
            f_new = float(r_new @ r_new)
            if np.isfinite(f_new) and f_new < f:
                accepted = True
                break
            damping *= 10.0
        if not accepted:
            # no descent direction left at machine precision
            converged = True
            break
        damping = max(damping / 10.0, 1e-12)
        change = f - f_new
        p, r, f = p_new, r_new, f_new
        history.append(f)
        if change <= ftol * f:
            converged = True
            break
    return p, f, it, converged, history


def _dedupe_starts(problem, starts):
    seen = []
    out = []
    for idx, s in enumerate(starts):
        shape = float(fold_angle(s.shape)) if problem.is_angle else s.shape
        if any(abs(shape - t) < 1e-9 for t in seen):
            continue
        seen.append(shape)
        out.append((idx, Start(shape, s.scale, s.shift, s.label)))
    return out


def fit(problem, starts=None, extra_starts=()):
    """Fit the curve from every start and keep the lowest objective.

    ``starts`` replaces the heuristic starting points; ``extra_starts`` are
    tried before them.

    Raises
    ------
    FitFailure
        If no start yields a finite objective.
    """
    if problem.curve.counts.size < 4:
        raise ValueError("need at least four points to fit three parameters")
    if starts is None:
        starts = initial_guesses(problem)
    starts = list(extra_starts) + list(starts)
    best = None
    any_converged = False
    for idx, s in _dedupe_starts(problem, starts):
        p0 = problem.to_internal(s.shape, s.scale, s.shift)
        p, f, it, conv, hist = levenberg_marquardt(problem, p0)
        if not np.isfinite(f):
            continue
        any_converged |= conv
        if best is None or f < best[1]:
            best = (p, f, it, conv, hist, idx)
    if best is None:
        raise FitFailure("all starting points diverged", ports=problem.curve.ports)
    p, f, it, conv, hist, idx = best
    shape, scale, shift = problem.from_internal(p)
    fitted = problem.model(shape, scale, shift)
    resid = problem.curve.counts - fitted
    return FitResult(
        shape=shape,
        scale=scale,
        shift=shift,
        objective_value=float(problem.weights @ (resid * resid)),
        residuals=resid,
        fitted=fitted,
        converged=bool(any_converged),
        iterations=it,
        start_used=idx,
        ports=problem.curve.ports,
        shape_kind=problem.shape_kind,
        history=hist,
    )


def normalized_residuals(result, return_mask=False):
    """Residuals divided by the fitted curve.

    Points where the fit is not positive are excluded: their entry is set
    to 0 and, with ``return_mask=True``, flagged ``False`` in the mask.
    """
    fitted = np.asarray(result.fitted, dtype=float)
    mask = fitted > 0
    if not np.any(mask):
        raise ValueError("fitted curve is zero everywhere")
    out = np.zeros_like(fitted)
    out[mask] = np.asarray(result.residuals)[mask] / fitted[mask]
    if return_mask:
        return out, mask
    return out
