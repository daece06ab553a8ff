"""Dense matrix-function kernel for the linear-SDE calibration.

Small (n = 2 or 3 in practice, any n accepted) real matrices only.

* :func:`expm`   -- matrix exponential (scaling-and-squaring with Pade
  approximants via scipy).
* :func:`logm`   -- real principal logarithm, rejecting inputs whose
  spectrum touches the closed negative real axis.
* :func:`drift_integral` -- integral of exp(u*A) du over [0, step]; closed
  form ``inv(A) (exp(step*A) - I)`` for well-conditioned invertible A,
  otherwise adaptive Runge-Kutta on the initial value problem
  M(0) = 0, dM/dt = I + A M.
* :func:`covariance_map` -- finite-horizon covariance of the linear SDE:
  solves dV/dt = A V + V A' + Q over [0, step] through the Kronecker-sum
  identity, falling back to the same IVP integrated numerically when the
  Kronecker sum is near singular.
* :func:`invert_covariance_map` -- recovers Q (and its PSD square root)
  from an observed finite-horizon covariance by solving the n^2 x n^2
  linear system of the forward map.

All functions are pure and reentrant.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.integrate import solve_ivp

from .errors import (
    IndefiniteResultError,
    MapSingularError,
    NonPrincipalBranchError,
    NotPSDError,
    SingularInputError,
)

__all__ = [
    "expm",
    "logm",
    "drift_integral",
    "covariance_map",
    "invert_covariance_map",
    "psd_sqrt",
    "kronecker_sum",
]

# closed forms are used only when the relevant operator is comfortably
# invertible and the series cancellation exp(x) - 1 keeps full precision
_COND_MAX = 1e6
_NORM_MIN = 1e-3

_IVP_OPTS = dict(method="DOP853", rtol=1e-13, atol=1e-15)


def _as_square(M, name: str = "matrix") -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} has non-finite entries")
    return M


def expm(M) -> np.ndarray:
    """Matrix exponential (total function)."""
    return sla.expm(_as_square(M))


def logm(M) -> np.ndarray:
    """Real principal matrix logarithm.

    Raises
    ------
    SingularInputError
        if M is numerically singular.
    NonPrincipalBranchError
        if an eigenvalue lies on the closed negative real axis, i.e. the
        matrix has no real principal logarithm; for a one-period
        transition matrix this signals incompatibility with a real
        continuous-time generator.
    """
    M = _as_square(M)
    scale = max(np.abs(M).max(), 1e-300)
    eigvals = np.linalg.eigvals(M)
    tol = 1e-12 * scale
    if np.any(np.abs(eigvals) <= tol):
        raise SingularInputError("matrix is singular; no logarithm")
    on_negative_axis = (eigvals.real < 0) & (
        np.abs(eigvals.imag) <= 1e-12 * np.abs(eigvals)
    )
    if np.any(on_negative_axis):
        raise NonPrincipalBranchError(
            "eigenvalue on the closed negative real axis; "
            "no real principal logarithm"
        )
    L = sla.logm(M, disp=False)[0]
    if np.iscomplexobj(L):
        if np.abs(L.imag).max() > 1e-8 * max(1.0, np.abs(L.real).max()):
            raise NonPrincipalBranchError(
                "principal logarithm has a significant imaginary part"
            )
        L = L.real
    return L


def drift_integral(A, step: float) -> np.ndarray:
    """Integral of exp(u*A) du from 0 to ``step``.

    Equals ``inv(A) (exp(step*A) - I)`` when A is invertible; that closed
    form is used when A is well conditioned and ``step*A`` is large enough
    for the subtraction to keep full precision, otherwise the initial
    value problem M(0)=0, dM/dt = I + A M is integrated with an adaptive
    Runge-Kutta scheme at tight tolerance.
    """
    A = _as_square(A)
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    n = A.shape[0]
    norm = np.linalg.norm(step * A, 1)
    if norm >= _NORM_MIN:
        svals = np.linalg.svd(A, compute_uv=False)
        if svals[-1] > 0 and svals[0] / svals[-1] < _COND_MAX:
            return np.linalg.solve(A, expm(step * A) - np.eye(n))
    return _drift_integral_ivp(A, step)


def _drift_integral_ivp(A: np.ndarray, step: float) -> np.ndarray:
    n = A.shape[0]
    eye = np.eye(n)

    def rhs(_t, y):
        return (eye + A @ y.reshape(n, n)).ravel()

    sol = solve_ivp(rhs, (0.0, step), np.zeros(n * n), **_IVP_OPTS)
    if not sol.success:
        raise RuntimeError(f"drift integral IVP failed: {sol.message}")
    return sol.y[:, -1].reshape(n, n)


def kronecker_sum(A: np.ndarray) -> np.ndarray:
    """K = A (+) A acting on vec(V) so that vec(A V + V A') = K vec(V)."""
    n = A.shape[0]
    eye = np.eye(n)
    return np.kron(A, eye) + np.kron(eye, A)


def _check_psd(Q: np.ndarray, name: str) -> np.ndarray:
    Q = _as_square(Q, name)
    scale = max(np.abs(Q).max(), 1.0)
    if np.abs(Q - Q.T).max() > 1e-8 * scale:
        raise NotPSDError(f"{name} is not symmetric")
    Q = (Q + Q.T) / 2.0
    if np.linalg.eigvalsh(Q).min() < -1e-12 * scale:
        raise NotPSDError(f"{name} has a negative eigenvalue")
    return Q


def covariance_map(A, Q, step: float) -> np.ndarray:
    """Covariance accumulated over [0, step] by the linear SDE with drift
    matrix A and diffusion covariance Q (the solution of
    dV/dt = A V + V A' + Q, V(0) = 0); symmetric PSD for PSD Q."""
    A = _as_square(A)
    Q = _check_psd(Q, "Q")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    K = kronecker_sum(A)
    norm = np.linalg.norm(step * K, 1)
    if norm >= _NORM_MIN:
        svals = np.linalg.svd(K, compute_uv=False)
        if svals[-1] > 0 and svals[0] / svals[-1] < _COND_MAX:
            vec = np.linalg.solve(K, (expm(step * K) - np.eye(K.shape[0])) @ Q.ravel())
            V = vec.reshape(A.shape)
            return (V + V.T) / 2.0
    return _covariance_ivp(A, Q, step)


def _covariance_ivp(A: np.ndarray, Q: np.ndarray, step: float) -> np.ndarray:
    n = A.shape[0]

    def rhs(_t, y):
        V = y.reshape(n, n)
        return (A @ V + V @ A.T + Q).ravel()

    sol = solve_ivp(rhs, (0.0, step), np.zeros(n * n), **_IVP_OPTS)
    if not sol.success:
        raise RuntimeError(f"covariance IVP failed: {sol.message}")
    V = sol.y[:, -1].reshape(n, n)
    return (V + V.T) / 2.0


def _transfer_matrix(A: np.ndarray, step: float) -> np.ndarray:
    """The n^2 x n^2 linear map Q -> V_step, i.e. the drift integral of the
    Kronecker sum (computed through an augmented exponential, which stays
    valid when the Kronecker sum is singular)."""
    K = kronecker_sum(A)
    m = K.shape[0]
    norm = np.linalg.norm(step * K, 1)
    if norm >= _NORM_MIN:
        svals = np.linalg.svd(K, compute_uv=False)
        if svals[-1] > 0 and svals[0] / svals[-1] < _COND_MAX:
            return np.linalg.solve(K, expm(step * K) - np.eye(m))
    block = np.zeros((2 * m, 2 * m))
    block[:m, :m] = step * K
    block[:m, m:] = step * np.eye(m)
    return expm(block)[:m, m:]


def invert_covariance_map(A, V, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Recover the diffusion covariance Q (and its symmetric PSD square
    root) from a finite-horizon covariance V of the linear SDE.

    Solves the n^2 x n^2 linear system of :func:`covariance_map`;
    eigenvalues of the recovered Q in [-1e-10, 0) are projected to zero,
    anything below -1e-10 raises (model misspecification).
    """
    A = _as_square(A)
    V = _check_psd(V, "V")
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    T = _transfer_matrix(A, step)
    svals = np.linalg.svd(T, compute_uv=False)
    if svals[-1] <= 1e-12 * svals[0]:
        raise MapSingularError("covariance map is numerically singular")
    Q = np.linalg.solve(T, V.ravel()).reshape(A.shape)
    Q = (Q + Q.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(Q)
    if eigvals.min() < -1e-10:
        raise IndefiniteResultError(
            f"recovered covariance has eigenvalue {eigvals.min():.3e} < -1e-10"
        )
    eigvals = np.clip(eigvals, 0.0, None)
    Q = (eigvecs * eigvals) @ eigvecs.T
    Q = (Q + Q.T) / 2.0
    sigma = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return Q, (sigma + sigma.T) / 2.0


def psd_sqrt(Q) -> np.ndarray:
    """Symmetric PSD square root (tiny negative eigenvalues clipped)."""
    Q = _as_square(Q)
    Q = (Q + Q.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(Q)
    eigvals = np.clip(eigvals, 0.0, None)
    S = (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    return (S + S.T) / 2.0
