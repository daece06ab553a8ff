"""Intraday seasonality of the log liquidity factors.

A profile of per-bucket coefficients is fitted by regressing each log
factor on a full set of intraday dummies with no intercept, which is
exactly the per-bucket mean.  Deseasonalizing subtracts the bucket
coefficient and re-centers at the observation-weighted mean of the
coefficients, so the series mean is preserved exactly and a refit of the
residual series is flat.  Mid-prices are never touched.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np

from .errors import SeriesTooShortError, SparseBucketError, UncoveredHourError
from .impact import ImpactObservation
from .timegrid import NS_PER_DAY, TradingWindow, seconds_into_day

__all__ = [
    "SeasonalProfile",
    "fit_profile",
    "deseasonalize",
    "autocovariance",
    "read_profile_json",
    "write_profile_json",
]

FACTORS = ("beta_minus", "beta_plus")


@dataclass(frozen=True)
class SeasonalProfile:
    """Per-factor intraday dummy coefficients on [start, end) buckets.

    ``coefficients[factor][j]`` is the mean of the log factor in bucket j;
    ``buckets`` are (start_sec, end_sec) pairs since midnight UTC.
    """

    coefficients: dict[str, np.ndarray]
    buckets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        n = len(self.buckets)
        for factor in FACTORS:
            coefs = np.asarray(self.coefficients[factor], dtype=float)
            if coefs.shape != (n,) or not np.all(np.isfinite(coefs)):
                raise ValueError(f"profile for {factor} must be {n} finite values")
            self.coefficients[factor] = coefs

    @property
    def n_buckets(self) -> int:
        return len(self.buckets)

    def bucket_of(self, ts: int) -> int:
        """Bucket index for a timestamp; the exact window end falls into
        the last bucket."""
        sec = seconds_into_day(ts)
        for j, (lo, hi) in enumerate(self.buckets):
            if lo <= sec < hi:
                return j
        if self.buckets and sec == self.buckets[-1][1]:
            return len(self.buckets) - 1
        raise UncoveredHourError(
            f"{sec:.0f}s into day not covered by profile buckets"
        )


def _make_buckets(window: TradingWindow, bucket_sec: int) -> tuple[tuple[int, int], ...]:
    edges = list(range(window.start_sec, window.end_sec, bucket_sec))
    return tuple(
        (lo, min(lo + bucket_sec, window.end_sec)) for lo in edges
    )


def fit_profile(
    observations: Sequence[ImpactObservation],
    window: TradingWindow,
    bucket_sec: int = 3600,
) -> SeasonalProfile:
    """Dummy-regression intraday profile of ln(beta-) and ln(beta+).

    Every bucket of the window must contain at least two observations.
    """
    buckets = _make_buckets(window, bucket_sec)
    profile = SeasonalProfile(
        coefficients={f: np.zeros(len(buckets)) for f in FACTORS},
        buckets=buckets,
    )
    groups: list[list[int]] = [[] for _ in buckets]
    for i, obs in enumerate(observations):
        groups[profile.bucket_of(obs.timestamp)].append(i)
    for j, idx in enumerate(groups):
        if len(idx) < 2:
            raise SparseBucketError(j, len(idx))
    coefficients = {}
    for factor in FACTORS:
        values = np.log([getattr(o, factor) for o in observations])
        coefficients[factor] = np.array(
            [values[idx].mean() for idx in groups]
        )
    return SeasonalProfile(coefficients=coefficients, buckets=buckets)


def deseasonalize(
    observations: Sequence[ImpactObservation], profile: SeasonalProfile
) -> list[ImpactObservation]:
    """Remove the intraday pattern from the log factors.

    ln(beta) becomes ln(beta) - coefficient(bucket) + grand mean, where the
    grand mean weights each bucket coefficient by the number of input
    observations it covers (so the series mean is preserved exactly).
    """
    idx = np.array([profile.bucket_of(o.timestamp) for o in observations])
    counts = np.bincount(idx, minlength=profile.n_buckets).astype(float)
    out = list(observations)
    for factor in FACTORS:
        coefs = profile.coefficients[factor]
        grand = float(coefs @ counts) / len(observations)
        values = np.log([getattr(o, factor) for o in observations])
        adjusted = np.exp(values - coefs[idx] + grand)
        out = [replace(o, **{factor: float(v)}) for o, v in zip(out, adjusted)]
    return out


def autocovariance(
    timestamps: Sequence[int], values: Sequence[float], max_lag: int
) -> np.ndarray:
    """Biased sample autocovariance at lags 0..max_lag, pairing
    observations within (UTC) days only."""
    timestamps = np.asarray(timestamps, dtype=np.int64)
    x = np.asarray(values, dtype=float)
    n = len(x)
    if n <= max_lag:
        raise SeriesTooShortError(f"series length {n} <= max_lag {max_lag}")
    x = x - x.mean()
    days = timestamps // NS_PER_DAY
    gamma = np.zeros(max_lag + 1)
    for k in range(max_lag + 1):
        if k == 0:
            gamma[0] = float(x @ x) / n
            continue
        same_day = days[:-k] == days[k:]
        gamma[k] = float(x[:-k][same_day] @ x[k:][same_day]) / n
    return gamma


# --- profile JSON ---------------------------------------------------------------

def write_profile_json(profile: SeasonalProfile, path) -> None:
    doc = {
        "beta_minus": [float(c) for c in profile.coefficients["beta_minus"]],
        "beta_plus": [float(c) for c in profile.coefficients["beta_plus"]],
        "buckets": [[lo, hi] for lo, hi in profile.buckets],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_profile_json(path) -> SeasonalProfile:
    with open(path) as fh:
        doc = json.load(fh)
    return SeasonalProfile(
        coefficients={
            "beta_minus": np.asarray(doc["beta_minus"], dtype=float),
            "beta_plus": np.asarray(doc["beta_plus"], dtype=float),
        },
        buckets=tuple((int(lo), int(hi)) for lo, hi in doc["buckets"]),
    )
