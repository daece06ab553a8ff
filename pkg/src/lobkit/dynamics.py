"""Forward analysis of a calibrated model.

Everything here works off the exact Gaussian transition of the linear
SDE: simulation draws it directly, impulse responses and model
autocovariances are computed in closed form (means through the one-step
recursion, covariances through the accumulated-diffusion map), and bands
are the analytic 95% quantiles of the Gaussian conditional law.  A
Monte-Carlo mode exists for cross-validation of the analytic bands.

A liquidity shock is an increase of the chosen log liquidity factor by a
multiple of its stationary (marginal) standard deviation from the
equilibrium state, tracked through the mid-price drift and both log
factors as it decays back.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import matfun
from .calibrate import SdeParams, exact_discretization
from .errors import NotStableError, SingularDriftError

__all__ = [
    "ImpulseSpec",
    "ResponsePath",
    "equilibrium",
    "stationary_covariance",
    "simulate",
    "impulse_response",
    "model_autocovariance",
    "write_response_csv",
    "write_autocovariance_csv",
]

Z95 = 1.959963984540054  # two-sided 95% normal quantile

FACTOR_INDEX = {"beta_minus": 1, "beta_plus": 2}
RESPONSES = ("mid_drift", "ln_beta_minus", "ln_beta_plus")


@dataclass(frozen=True)
class ImpulseSpec:
    """Shock definition: which log liquidity factor, how many stationary
    standard deviations (zero allowed for the trivial flat response), and
    the horizon in sampling steps."""

    factor: str
    magnitude: float = 1.0
    horizon: int = 36
    responses: tuple[str, ...] = RESPONSES

    def __post_init__(self):
        if self.factor not in FACTOR_INDEX:
            raise ValueError(f"factor must be one of {sorted(FACTOR_INDEX)}")
        if self.magnitude < 0:
            raise ValueError("shock magnitude must be nonnegative")
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        unknown = set(self.responses) - set(RESPONSES)
        if unknown:
            raise ValueError(f"unknown response variables: {sorted(unknown)}")


@dataclass(frozen=True)
class ResponsePath:
    """Per-step median and 95% band for each tracked response variable."""

    steps: np.ndarray
    median: dict[str, np.ndarray]
    lower: dict[str, np.ndarray]
    upper: dict[str, np.ndarray]

    def __post_init__(self):
        for key in self.median:
            if not (
                np.all(self.lower[key] <= self.median[key] + 1e-12)
                and np.all(self.median[key] <= self.upper[key] + 1e-12)
            ):
                raise ValueError(f"band ordering violated for {key}")


def equilibrium(params: SdeParams) -> np.ndarray:
    """Long-run state solving A xi + a = 0."""
    svals = np.linalg.svd(params.A, compute_uv=False)
    if svals[-1] <= 1e-12 * max(svals[0], 1e-300):
        raise SingularDriftError("drift matrix is singular; no unique equilibrium")
    return -np.linalg.solve(params.A, params.a)


def _require_stable(params: SdeParams) -> None:
    if np.linalg.eigvals(params.A).real.max() >= 0:
        raise NotStableError("drift matrix has a nonnegative eigenvalue real part")


def stationary_covariance(params: SdeParams) -> np.ndarray:
    """Stationary covariance V solving A V + V A' + Q = 0 (Kronecker
    solve); requires all drift eigenvalues in the open left half plane."""
    _require_stable(params)
    K = matfun.kronecker_sum(params.A)
    V = np.linalg.solve(K, -params.Q.ravel()).reshape(params.A.shape)
    return (V + V.T) / 2.0


def simulate(
    params: SdeParams,
    xi0: np.ndarray,
    steps: int,
    step_l: float,
    n_paths: int = 1,
    seed: int = 0,
) -> np.ndarray:
    """Exact-transition simulation.

    Returns an array of shape (n_paths, steps + 1, n) including the
    initial state.  Paths use independent substreams spawned from the
    seed, so output is deterministic given (seed, n_paths, steps) and each
    path is reproducible in parallel settings.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if step_l <= 0:
        raise ValueError("step_l must be positive")
    n = params.n
    xi0 = np.asarray(xi0, dtype=float).ravel()
    if xi0.shape != (n,):
        raise ValueError(f"xi0 must have {n} components")
    dp = exact_discretization(params, step_l)
    noise_factor = matfun.psd_sqrt(dp.V)
    streams = np.random.SeedSequence(seed).spawn(n_paths)
    shocks = np.empty((n_paths, steps, n))
    for i, ss in enumerate(streams):
        shocks[i] = np.random.default_rng(ss).standard_normal((steps, n))
    shocks = shocks @ noise_factor.T
    paths = np.empty((n_paths, steps + 1, n))
    paths[:, 0, :] = xi0
    for k in range(steps):
        paths[:, k + 1, :] = paths[:, k, :] @ dp.B.T + dp.b + shocks[:, k, :]
    return paths


def _conditional_moments(params: SdeParams, xi0: np.ndarray, horizon: int, step_l: float):
    """Means and covariances of the state at steps 0..horizon given xi0."""
    dp = exact_discretization(params, step_l)
    n = params.n
    means = np.empty((horizon + 1, n))
    covs = np.empty((horizon + 1, n, n))
    mu = np.asarray(xi0, dtype=float).copy()
    C = np.zeros((n, n))
    means[0], covs[0] = mu, C
    for k in range(1, horizon + 1):
        mu = dp.B @ mu + dp.b
        C = dp.B @ C @ dp.B.T + dp.V
        means[k] = mu
        covs[k] = (C + C.T) / 2.0
    return means, covs


def impulse_response(
    params: SdeParams,
    spec: ImpulseSpec,
    step_l: float = 1.0,
    method: str = "analytic",
    n_paths: int = 20000,
    seed: int = 0,
) -> ResponsePath:
    """Median and 95% band of the responses to a liquidity shock.

    The initial state is the equilibrium plus ``magnitude`` stationary
    standard deviations of the shocked log factor.  In the analytic mode
    the conditional law at each step is Gaussian, so the median equals the
    mean and the band is mean +/- 1.96 standard deviations; the mid-price
    drift response is the first coordinate of A xi + a under that law.
    ``method="monte_carlo"`` estimates the same quantiles from simulated
    paths instead.
    """
    _require_stable(params)
    xi_eq = equilibrium(params)
    v_inf = stationary_covariance(params)
    idx = FACTOR_INDEX[spec.factor]
    xi0 = xi_eq.copy()
    xi0[idx] += spec.magnitude * np.sqrt(v_inf[idx, idx])
    steps = np.arange(spec.horizon + 1)

    if method == "monte_carlo":
        paths = simulate(params, xi0, spec.horizon, step_l, n_paths, seed)
        drift = paths @ params.A.T + params.a
        series = {
            "mid_drift": drift[:, :, 0],
            "ln_beta_minus": paths[:, :, 1],
            "ln_beta_plus": paths[:, :, 2],
        }
        median = {k: np.median(series[k], axis=0) for k in spec.responses}
        lower = {k: np.quantile(series[k], 0.025, axis=0) for k in spec.responses}
        upper = {k: np.quantile(series[k], 0.975, axis=0) for k in spec.responses}
        return ResponsePath(steps=steps, median=median, lower=lower, upper=upper)
    if method != "analytic":
        raise ValueError("method must be 'analytic' or 'monte_carlo'")

    means, covs = _conditional_moments(params, xi0, spec.horizon, step_l)
    drift_mean = means @ params.A.T + params.a
    drift_var = np.einsum("ij,kjl,il->ki", params.A, covs, params.A)
    median, lower, upper = {}, {}, {}
    for key in spec.responses:
        if key == "mid_drift":
            mean = drift_mean[:, 0]
            sd = np.sqrt(np.clip(drift_var[:, 0], 0.0, None))
        else:
            j = 1 if key == "ln_beta_minus" else 2
            mean = means[:, j]
            sd = np.sqrt(np.clip(covs[:, j, j], 0.0, None))
        median[key] = mean
        lower[key] = mean - Z95 * sd
        upper[key] = mean + Z95 * sd
    return ResponsePath(steps=steps, median=median, lower=lower, upper=upper)


def model_autocovariance(
    params: SdeParams, max_lag_steps: int, step_l: float = 1.0
) -> np.ndarray:
    """Stationary autocovariance matrices Gamma(k) = exp(k l A) V_inf for
    k = 0..max_lag_steps."""
    _require_stable(params)
    v_inf = stationary_covariance(params)
    B = matfun.expm(step_l * params.A)
    out = np.empty((max_lag_steps + 1, params.n, params.n))
    acc = np.eye(params.n)
    for k in range(max_lag_steps + 1):
        out[k] = acc @ v_inf
        acc = B @ acc
    return out


# --- tidy CSV emitters -----------------------------------------------------------

def write_response_csv(path_obj: ResponsePath, path) -> None:
    """Tidy CSV (step, variable, median, lo95, hi95)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "variable", "median", "lo95", "hi95"])
        for key in path_obj.median:
            for k, m, lo, hi in zip(
                path_obj.steps,
                path_obj.median[key],
                path_obj.lower[key],
                path_obj.upper[key],
            ):
                w.writerow([int(k), key, repr(float(m)), repr(float(lo)), repr(float(hi))])


def write_autocovariance_csv(gammas: np.ndarray, path) -> None:
    """Tidy CSV (lag, i, j, value)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lag", "i", "j", "value"])
        for lag, G in enumerate(gammas):
            for i in range(G.shape[0]):
                for j in range(G.shape[1]):
                    w.writerow([lag, i, j, repr(float(G[i, j]))])
