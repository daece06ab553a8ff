"""Calibration of the linear SDE  d(xi) = (A xi + a) dt + Sigma dW.

Sampled at a fixed step l, the state follows the exact Gaussian transition

    xi_{t+l} = B xi_t + b + eps,   eps ~ N(0, V),

with B = exp(l A), b = (integral of exp(u A) du) a and V the accumulated
diffusion covariance.  Calibration is therefore two steps:

1. ordinary least squares of xi_{t+l} on (xi_t, 1), equation by equation,
   over within-day transition pairs (overnight gaps are never bridged);
   the residual covariance uses the N - (n+1) degrees-of-freedom
   correction;
2. inversion of the exact maps: A = logm(B)/l, a = drift_integral(A,l)^-1 b
   and Q from the finite-horizon covariance identity, with Sigma the
   symmetric PSD square root of Q.

Standard errors for the continuous-time parameters are propagated from
the OLS covariance (and the Wishart covariance of the residual covariance)
through a finite-difference Jacobian of the recovery map.

The three-factor state is (ln mid, ln beta-, ln beta+); the same machinery
at n = 2 calibrates the two-factor mean-reverting model of the liquidity
factors alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import matfun
from .errors import CollinearRegressorsError, TooFewPairsError
from .impact import ImpactObservation
from .timegrid import NS_PER_DAY, NS_PER_SEC

__all__ = [
    "StateSeries",
    "DiscreteParams",
    "SdeParams",
    "exact_discretization",
    "estimate_discrete",
    "recover_continuous",
    "calibrate",
    "calibrate_model1",
    "CalibrationResult",
    "Model1Result",
    "write_report_json",
    "read_report_json",
]

MIN_PAIRS = 20
_PSD_TOL = 1e-6  # published 4-decimal inputs can be indefinite at ~1e-7


@dataclass(frozen=True)
class SdeParams:
    """(A, a, sigma) of d(xi) = (A xi + a) dt + sigma dW.

    ``sigma`` is symmetric PSD (tolerating rounding-level violations in
    published inputs); ``step`` records the sampling step used in a
    recovery, if any.  Time units of A, a and sigma^2 are per unit of
    whatever time scale ``step`` is expressed in.
    """

    A: np.ndarray
    a: np.ndarray
    sigma: np.ndarray
    step: float | None = None

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        a = np.asarray(self.a, dtype=float).ravel()
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        n = A.shape[0]
        if A.shape != (n, n) or a.shape != (n,) or sigma.shape != (n, n):
            raise ValueError("A, a, sigma dimensions disagree")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(a)) and np.all(np.isfinite(sigma))):
            raise ValueError("parameters must be finite")
        scale = max(np.abs(sigma).max(), 1.0)
        if np.abs(sigma - sigma.T).max() > 1e-8 * scale:
            raise ValueError("sigma must be symmetric")
        if np.linalg.eigvalsh((sigma + sigma.T) / 2).min() < -_PSD_TOL * scale:
            raise ValueError("sigma must be positive semidefinite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "sigma", sigma)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def Q(self) -> np.ndarray:
        return self.sigma @ self.sigma.T


@dataclass(frozen=True)
class DiscreteParams:
    """(B, b, V) of the exact Gaussian transition at one sampling step."""

    B: np.ndarray
    b: np.ndarray
    V: np.ndarray
    step: float = 1.0

    def __post_init__(self):
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        V = np.atleast_2d(np.asarray(self.V, dtype=float))
        n = B.shape[0]
        if B.shape != (n, n) or b.shape != (n,) or V.shape != (n, n):
            raise ValueError("B, b, V dimensions disagree")
        scale = max(np.abs(V).max(), 1.0)
        if np.abs(V - V.T).max() > 1e-8 * scale:
            raise ValueError("V must be symmetric")
        if np.linalg.eigvalsh((V + V.T) / 2).min() < -_PSD_TOL * scale:
            raise ValueError("V must be positive semidefinite")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "V", V)

    @property
    def n(self) -> int:
        return self.B.shape[0]


def exact_discretization(params: SdeParams, step: float) -> DiscreteParams:
    """Forward map (A, a, Sigma) -> (B, b, V) at the given step."""
    B = matfun.expm(step * params.A)
    b = matfun.drift_integral(params.A, step) @ params.a
    V = matfun.covariance_map(params.A, params.Q, step)
    return DiscreteParams(B=B, b=b, V=V, step=step)


@dataclass(frozen=True)
class StateSeries:
    """Time-ordered state observations with a nominal sampling step.

    Transition pairs are consecutive observations within the same UTC day
    whose spacing matches the nominal step (to 1 ms); gaps simply produce
    no pair.
    """

    timestamps: np.ndarray
    values: np.ndarray
    step_seconds: float

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2 or len(ts) != values.shape[0]:
            raise ValueError("values must be (n_obs, n_factors) matching timestamps")
        if len(ts) > 1 and np.any(np.diff(ts) <= 0):
            raise ValueError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("state values must be finite")
        if self.step_seconds <= 0:
            raise ValueError("step_seconds must be positive")
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_observations(
        cls, observations: Sequence[ImpactObservation], step_seconds: float
    ) -> "StateSeries":
        """Three-factor state (ln mid, ln beta-, ln beta+)."""
        ts = np.array([o.timestamp for o in observations], dtype=np.int64)
        values = np.log(
            [[o.mid, o.beta_minus, o.beta_plus] for o in observations]
        )
        return cls(timestamps=ts, values=values, step_seconds=step_seconds)

    @property
    def n_factors(self) -> int:
        return self.values.shape[1]

    def transition_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """(X, Y) arrays of states at t and t + step, within days only."""
        ts = self.timestamps
        if len(ts) < 2:
            return self.values[:0], self.values[:0]
        step_ns = int(round(self.step_seconds * NS_PER_SEC))
        dt = np.diff(ts)
        same_day = (ts[:-1] // NS_PER_DAY) == (ts[1:] // NS_PER_DAY)
        ok = same_day & (np.abs(dt - step_ns) <= 1_000_000)
        return self.values[:-1][ok], self.values[1:][ok]


class _OlsFit:
    """Raw multivariate OLS byproducts shared by the public calibrators."""

    def __init__(self, series: StateSeries):
        X0, Y = series.transition_pairs()
        n_pairs, n = X0.shape
        if n_pairs < MIN_PAIRS:
            raise TooFewPairsError(n_pairs, MIN_PAIRS)
        X = np.hstack([X0, np.ones((n_pairs, 1))])
        k = n + 1
        svals = np.linalg.svd(X, compute_uv=False)
        if svals[-1] <= 1e-10 * svals[0]:
            raise CollinearRegressorsError(
                "design matrix is rank deficient (constant state component?)"
            )
        coef, *_ = np.linalg.lstsq(X, Y, rcond=None)
        resid = Y - X @ coef
        dof = n_pairs - k
        self.B = coef[:n].T
        self.b = coef[n]
        self.V = resid.T @ resid / dof
        self.V = (self.V + self.V.T) / 2.0
        self.G = np.linalg.inv(X.T @ X)  # coefficient covariance factor
        self.n_pairs = n_pairs
        self.dof = dof
        self.n = n

    def discrete(self, step: float) -> DiscreteParams:
        return DiscreteParams(B=self.B, b=self.b, V=self.V, step=step)

    def stderr_discrete(self) -> dict[str, np.ndarray]:
        """Elementwise OLS standard errors of B and b and Wishart standard
        errors of V."""
        n = self.n
        dV = np.sqrt(np.diag(self.V))
        se_B = np.sqrt(np.outer(dV**2, np.diag(self.G)[:n]))
        se_b = dV * np.sqrt(self.G[n, n])
        se_V = np.sqrt(
            (np.outer(np.diag(self.V), np.diag(self.V)) + self.V**2) / self.dof
        )
        return {"B": se_B, "b": se_b, "V": se_V}

    def param_cov(self) -> np.ndarray:
        """Covariance of the stacked estimate [vec_row(B), b]: for
        equations i, j, Cov(theta_i, theta_j) = V_ij * (X'X)^-1."""
        n, k = self.n, self.n + 1
        m = n * k
        cov = np.zeros((m, m))
        for i in range(n):
            for j in range(n):
                cov[i * k : (i + 1) * k, j * k : (j + 1) * k] = self.V[i, j] * self.G
        return cov


def estimate_discrete(series: StateSeries) -> DiscreteParams:
    """Multivariate OLS of the one-step transition (per-equation, with
    intercept); the residual covariance uses N - (n+1) degrees of
    freedom."""
    fit = _OlsFit(series)
    return fit.discrete(series.step_seconds)


def recover_continuous(dp: DiscreteParams, step: float | None = None) -> SdeParams:
    """Invert the exact discretization: A = logm(B)/l, a through the drift
    integral, Sigma as the PSD square root of the recovered Q."""
    l = dp.step if step is None else step
    A = matfun.logm(dp.B) / l
    a = np.linalg.solve(matfun.drift_integral(A, l), dp.b)
    _, sigma = matfun.invert_covariance_map(A, dp.V, l)
    return SdeParams(A=A, a=a, sigma=sigma, step=l)


@dataclass(frozen=True)
class CalibrationResult:
    params: SdeParams
    discrete: DiscreteParams
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    stationary: bool
    stderr: dict[str, np.ndarray]
    n_pairs: int
    step_seconds: float
    near_singular_transition: bool


def _vech_indices(n: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i, n)]


def _stderr_continuous(fit: _OlsFit, step: float) -> dict[str, np.ndarray]:
    """Delta-method standard errors of (A, a, Q) via finite-difference
    Jacobians of the recovery map around the estimates."""
    n, k = fit.n, fit.n + 1
    theta = np.concatenate([fit.B.ravel(), fit.b])
    cov_theta_full = fit.param_cov()
    # reorder [vec_row(B), b] from the per-equation stacking [B_i grad, b_i]
    order = []
    for i in range(n):
        order.extend(range(i * k, i * k + n))
    order.extend(i * k + n for i in range(n))
    cov_theta = cov_theta_full[np.ix_(order, order)]

    def recover_Aa(vec: np.ndarray) -> np.ndarray:
        B = vec[: n * n].reshape(n, n)
        b = vec[n * n :]
        A = matfun.logm(B) / step
        a = np.linalg.solve(matfun.drift_integral(A, step), b)
        return np.concatenate([A.ravel(), a])

    m = n * n + n
    J = np.zeros((m, m))
    for j in range(m):
        h = 1e-6 * max(1.0, abs(theta[j]))
        hi, lo = theta.copy(), theta.copy()
        hi[j] += h
        lo[j] -= h
        J[:, j] = (recover_Aa(hi) - recover_Aa(lo)) / (2 * h)
    cov_Aa = J @ cov_theta @ J.T
    se = np.sqrt(np.clip(np.diag(cov_Aa), 0.0, None))
    se_A = se[: n * n].reshape(n, n)
    se_a = se[n * n :]

    # Q = g(B, V): independent blocks (OLS coefficients and residual
    # covariance are independent under Gaussian errors)
    vech = _vech_indices(n)
    nv = len(vech)

    def recover_Q(bvec: np.ndarray, vvech: np.ndarray) -> np.ndarray:
        B = bvec.reshape(n, n)
        V = np.zeros((n, n))
        for idx, (i, j) in enumerate(vech):
            V[i, j] = V[j, i] = vvech[idx]
        A = matfun.logm(B) / step
        Q, _ = matfun.invert_covariance_map(A, V, step)
        return np.array([Q[i, j] for i, j in vech])

    b_hat = fit.B.ravel()
    v_hat = np.array([fit.V[i, j] for i, j in vech])
    JB = np.zeros((nv, n * n))
    for j in range(n * n):
        h = 1e-6 * max(1.0, abs(b_hat[j]))
        hi, lo = b_hat.copy(), b_hat.copy()
        hi[j] += h
        lo[j] -= h
        JB[:, j] = (recover_Q(hi, v_hat) - recover_Q(lo, v_hat)) / (2 * h)
    JV = np.zeros((nv, nv))
    vscale = max(np.abs(fit.V).max(), 1e-12)
    for j in range(nv):
        h = 1e-6 * vscale
        hi, lo = v_hat.copy(), v_hat.copy()
        hi[j] += h
        lo[j] -= h
        JV[:, j] = (recover_Q(b_hat, hi) - recover_Q(b_hat, lo)) / (2 * h)
    cov_B = cov_theta[: n * n, : n * n]
    cov_V = np.zeros((nv, nv))
    for r, (i, j) in enumerate(vech):
        for c, (p, q) in enumerate(vech):
            cov_V[r, c] = (
                fit.V[i, p] * fit.V[j, q] + fit.V[i, q] * fit.V[j, p]
            ) / fit.dof
    cov_Q = JB @ cov_B @ JB.T + JV @ cov_V @ JV.T
    se_q = np.sqrt(np.clip(np.diag(cov_Q), 0.0, None))
    se_Q = np.zeros((n, n))
    for idx, (i, j) in enumerate(vech):
        se_Q[i, j] = se_Q[j, i] = se_q[idx]
    return {"A": se_A, "a": se_a, "Q": se_Q}


def calibrate(series: StateSeries) -> CalibrationResult:
    """Full calibration: OLS transition estimates, continuous-time
    recovery, spectral diagnostics and propagated standard errors.

    The recovered A, a, Q are per second when ``series.step_seconds`` is
    in seconds.
    """
    fit = _OlsFit(series)
    step = series.step_seconds
    dp = fit.discrete(step)
    params = recover_continuous(dp)
    eigvals, eigvecs = np.linalg.eig(params.A)
    order = np.argsort(-eigvals.real)
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    stderr = fit.stderr_discrete()
    try:
        stderr.update(_stderr_continuous(fit, step))
    except Exception:  # diagnostics must not mask a usable point estimate
        pass
    # a one-step transition this contractive means the sampling interval is
    # far too coarse to identify continuous-time dynamics (white noise maps
    # to B ~ 0)
    b_eigs = np.abs(np.linalg.eigvals(fit.B))
    near_singular = bool(b_eigs.min() < 0.05)
    return CalibrationResult(
        params=params,
        discrete=dp,
        eigenvalues=eigvals,
        eigenvectors=eigvecs,
        stationary=bool(np.all(eigvals.real < 0)),
        stderr=stderr,
        n_pairs=fit.n_pairs,
        step_seconds=step,
        near_singular_transition=near_singular,
    )


@dataclass(frozen=True)
class Model1Result:
    """Two-factor mean-reverting calibration of the liquidity factors,
    reported both as (A, a, Sigma) and in the mean-reversion form
    d theta = gamma (mu - theta) dt + Sigma dW."""

    result: CalibrationResult

    @property
    def params(self) -> SdeParams:
        return self.result.params

    @property
    def gamma(self) -> np.ndarray:
        return -self.result.params.A

    @property
    def mu(self) -> np.ndarray:
        return -np.linalg.solve(self.result.params.A, self.result.params.a)


def calibrate_model1(series: StateSeries) -> Model1Result:
    """Calibrate the two-factor model on a (ln beta-, ln beta+) series."""
    if series.n_factors != 2:
        raise ValueError("two-factor calibration needs a 2-column series")
    return Model1Result(result=calibrate(series))


# --- calibration report JSON ------------------------------------------------------

def write_report_json(result: CalibrationResult, path) -> None:
    doc = {
        "A": result.params.A.tolist(),
        "a": result.params.a.tolist(),
        "Sigma": result.params.sigma.tolist(),
        "eigenvalues": [[z.real, z.imag] for z in result.eigenvalues],
        "eigenvectors": {
            "real": result.eigenvectors.real.tolist(),
            "imag": result.eigenvectors.imag.tolist(),
        },
        "stationary": result.stationary,
        "stderr": {key: np.asarray(v).tolist() for key, v in result.stderr.items()},
        "n_pairs": result.n_pairs,
        "step_seconds": result.step_seconds,
        "B": result.discrete.B.tolist(),
        "b": result.discrete.b.tolist(),
        "V": result.discrete.V.tolist(),
        "near_singular_transition": result.near_singular_transition,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_report_json(path) -> dict:
    """Raw report dict; ``params_from_report`` turns it into SdeParams."""
    with open(path) as fh:
        return json.load(fh)


def params_from_report(doc: dict) -> SdeParams:
    return SdeParams(
        A=np.asarray(doc["A"], dtype=float),
        a=np.asarray(doc["a"], dtype=float),
        sigma=np.asarray(doc["Sigma"], dtype=float),
        step=float(doc.get("step_seconds") or 0) or None,
    )
