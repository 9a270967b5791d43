"""Diagonal factors from unitarity, and projection onto the unitary group."""

import warnings

import numpy as np

from .errors import DegeneratePort, DiagonalClampWarning, NegativeDiagonal, SingularSystem
from .model import assemble, canonicalize

COND_MAX = 1e12
DIAG_FLOOR = 1e-8
DEFECT_WARN = 0.25
REFINE_STEPS = 5


def _real_lstsq(M, rhs):
    """Least-squares real solution of a complex system ``M x = rhs``."""
    A = np.vstack([M.real, M.imag])
    b = np.concatenate([rhs.real, rhs.imag])
    x, *_ = np.linalg.lstsq(A, b, rcond=None)
    return x, float(np.linalg.cond(A)), float(np.linalg.norm(A @ x - b))


def solve_diagonals(A_hat, strict=False, cond_max=COND_MAX, floor=DIAG_FLOOR):
    """Solve the first-column unitarity conditions for ``lam`` and ``mu``.

    ``A_hat @ mu = e1`` and ``A_hat^H @ (1, lam_2, ..., lam_m) = e1 / mu_1``.
    The unknowns are real, so each complex system is solved as a stacked
    real least-squares problem; the second one is overdetermined because
    ``lam_1`` is fixed to 1.

    Parameters
    ----------
    A_hat : ndarray
        ``alpha_hat * exp(1j * theta_hat)``.
    strict : bool
        Raise ``NegativeDiagonal`` instead of clamping non-positive solutions.

    Returns
    -------
    lam, mu : ndarray
    info : dict
        Condition numbers, residuals and the list of clamped entries.

    Raises
    ------
    SingularSystem
        If either system has condition number above ``cond_max``.
    """
    A = np.asarray(A_hat, dtype=complex)
    m = A.shape[0]
    e1 = np.zeros(m, dtype=complex)
    e1[0] = 1.0
    mu, cond_mu, res_mu = _real_lstsq(A, e1)
    if not np.isfinite(cond_mu) or cond_mu > cond_max:
        raise SingularSystem(f"amplitude matrix is singular (condition {cond_mu:.3g})")
    info = {"cond_mu": cond_mu, "residual_mu": res_mu, "clamped": []}
    clamped = []
    if mu[0] <= 0:
        if strict:
            raise NegativeDiagonal(f"mu_1 = {mu[0]:.3g} is not positive")
        clamped.append(("mu", 1, float(mu[0])))
        mu[0] = floor
    Ah = A.conj().T
    rhs = e1 / mu[0] - Ah[:, 0]
    if m > 1:
        lam_rest, cond_lam, res_lam = _real_lstsq(Ah[:, 1:], rhs)
        if not np.isfinite(cond_lam) or cond_lam > cond_max:
            raise SingularSystem(f"amplitude matrix is singular (condition {cond_lam:.3g})")
    else:
        lam_rest, cond_lam, res_lam = np.zeros(0), 1.0, 0.0
    lam = np.concatenate([[1.0], lam_rest])
    info.update(cond_lam=cond_lam, residual_lam=res_lam)
    for name, vec in (("lam", lam), ("mu", mu)):
        for k in range(m):
            if vec[k] <= 0:
                if strict:
                    raise NegativeDiagonal(f"{name}_{k + 1} = {vec[k]:.3g} is not positive")
                clamped.append((name, k + 1, float(vec[k])))
                vec[k] = floor
    info["clamped"] = clamped
    if clamped:
        warnings.warn(f"clamped non-positive diagonal entries {clamped}",
                      DiagonalClampWarning, stacklevel=2)
    return lam, mu, info


def assemble_estimate(alpha, theta, lam, mu):
    """``U_tilde[i, j] = sqrt(lam_i) alpha_ij exp(i theta_ij) sqrt(mu_j)``."""
    return np.sqrt(lam)[:, None] * alpha * np.exp(1j * theta) * np.sqrt(mu)[None, :]


def nearest_unitary(U_tilde, rtol=1e-14):
    """Unitary polar factor ``(U U^H)^(-1/2) U`` (closest unitary in Frobenius norm).

    The inverse square root comes from an eigendecomposition of the
    Hermitian positive matrix ``U U^H``.
    """
    U = np.asarray(U_tilde, dtype=complex)
    H = U @ U.conj().T
    evals, evecs = np.linalg.eigh(H)
    if evals[0] <= rtol * max(evals[-1], 0.0) or evals[-1] <= 0:
        raise np.linalg.LinAlgError("matrix is rank deficient; no unique polar factor")
    inv_sqrt = (evecs / np.sqrt(evals)[None, :]) @ evecs.conj().T
    W = inv_sqrt @ U
    # U U^H squares the condition number; Newton-Schulz steps restore unitarity
    eye = np.eye(W.shape[0])
    for _ in range(REFINE_STEPS):
        E = W.conj().T @ W - eye
        if np.linalg.norm(E) < 1e-14:
            break
        W = W @ (eye - 0.5 * E)
    return W


def nearest_unitary_svd(U_tilde):
    """Same projection via the singular value decomposition ``V S X^H -> V X^H``."""
    V, _, Xh = np.linalg.svd(np.asarray(U_tilde, dtype=complex))
    return V @ Xh


def unitarity_defect(U):
    U = np.asarray(U)
    return float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0])))


def max_likely_unitary(alpha, theta, strict=False):
    """Unitary most likely to have produced the estimated amplitudes and arguments.

    Returns
    -------
    W : ndarray
        Polar projection of the assembled estimate, put in real-bordered form.
    info : dict
        ``U_tilde``, ``lam``, ``mu``, solver diagnostics and the unitarity
        defect of ``U_tilde``.
    """
    alpha = np.asarray(alpha, dtype=float)
    theta = np.asarray(theta, dtype=float)
    lam, mu, info = solve_diagonals(alpha * np.exp(1j * theta), strict=strict)
    U_tilde = assemble_estimate(alpha, theta, lam, mu)
    defect = unitarity_defect(U_tilde)
    if defect > DEFECT_WARN:
        warnings.warn(f"assembled estimate is far from unitary (defect {defect:.3g})",
                      DiagonalClampWarning, stacklevel=2)
    try:
        W = nearest_unitary(U_tilde)
        info["polar_fallback"] = False
    except np.linalg.LinAlgError:
        # any polar factor is a closest unitary when the estimate is singular
        W = nearest_unitary_svd(U_tilde)
        info["polar_fallback"] = True
    try:
        W = assemble(canonicalize(W))
    except DegeneratePort:
        pass
    info.update(U_tilde=U_tilde, lam=lam, mu=mu, defect=defect)
    return W, info
