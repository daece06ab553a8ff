"""Liquidity-factor extraction from impact curves.

The side slopes are exact least-squares projections of the step impact
curve onto a line through the origin over a cutoff window:

    slope = (integral of h * r(h) dh) / (integral of h^2 dh)

with both integrals evaluated in closed form from the step representation
(each piece contributes a quadratic/cubic term), so no quadrature
tolerance enters the pipeline.  The half-spread jump of r at the origin is
part of the first piece and therefore part of the objective.

Windows default to the mark-to-market depth of the best ``depth_levels``
merged price levels per side; books shallower than that use all available
levels (no extrapolated liquidity).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, NamedTuple

from .book import ImpactCurve, OrderBook, impact_curve, mid_price
from .errors import (
    DegenerateWindowError,
    EmptySideError,
    EmptyWindowError,
)
from .timegrid import format_iso_ns, parse_iso_ns

__all__ = [
    "FitConfig",
    "BetaFit",
    "ImpactObservation",
    "fit_beta",
    "cutoffs_from_levels",
    "extract_series",
    "SkipRecord",
    "read_observations_csv",
    "write_observations_csv",
]

log = logging.getLogger(__name__)

BETA_FLOOR = 1e-12  # clamp for zero slopes so log-factors stay defined


@dataclass(frozen=True)
class FitConfig:
    """Cutoff policy for the slope fit.

    Either ``depth_levels`` best merged prices per side (default 10) or
    explicit mark-to-market cutoffs ``(h_minus, h_plus)`` with
    h_minus < 0 < h_plus; explicit cutoffs are clamped to the book depth.
    """

    depth_levels: int = 10
    cutoffs: tuple[float, float] | None = None

    def __post_init__(self):
        if self.depth_levels < 1:
            raise ValueError("depth_levels must be >= 1")
        if self.cutoffs is not None:
            h_minus, h_plus = self.cutoffs
            if not (h_minus < 0 < h_plus):
                raise ValueError(
                    f"cutoffs must satisfy h_minus < 0 < h_plus, got {self.cutoffs}"
                )


class BetaFit(NamedTuple):
    beta: float
    beta_minus: float
    beta_plus: float


@dataclass(frozen=True)
class ImpactObservation:
    """Per-snapshot liquidity state: mid-price and the fitted slopes
    (side slopes and the whole-window slope), in 1/currency units.

    ``clamped`` flags observations whose zero slope was floored so that
    downstream log-transforms stay defined.
    """

    timestamp: int
    mid: float
    beta_minus: float
    beta_plus: float
    beta: float
    clamped: bool = False


class SkipRecord(NamedTuple):
    timestamp: int
    reason: str


def _window(curve: ImpactCurve, config: FitConfig) -> tuple[float, float]:
    if len(curve.ask_h) == 0 or len(curve.bid_h) == 0:
        raise EmptyWindowError("impact curve has an empty side")
    if config.cutoffs is not None:
        h_minus, h_plus = config.cutoffs
        h_plus = min(h_plus, curve.h_max)
        h_minus = max(h_minus, curve.h_min)
    else:
        d = config.depth_levels
        h_plus = float(curve.ask_h[min(d, len(curve.ask_h)) - 1])
        h_minus = float(curve.bid_h[min(d, len(curve.bid_h)) - 1])
    if h_plus <= 0 or h_minus >= 0:
        raise DegenerateWindowError(
            f"degenerate fit window [{h_minus}, {h_plus}]"
        )
    return h_minus, h_plus


def fit_beta(curve: ImpactCurve, config: FitConfig = FitConfig()) -> BetaFit:
    """Exact least-squares slopes of the impact curve.

    Returns ``(beta, beta_minus, beta_plus)``: the whole-window slope and
    the one-sided slopes over [h_minus, 0] and [0, h_plus].
    """
    h_minus, h_plus = _window(curve, config)
    num_plus, den_plus = curve.moment_integrals(0.0, h_plus)
    num_minus, den_minus = curve.moment_integrals(h_minus, 0.0)
    beta_plus = num_plus / den_plus
    beta_minus = num_minus / den_minus
    beta = (num_plus + num_minus) / (den_plus + den_minus)
    return BetaFit(beta=beta, beta_minus=beta_minus, beta_plus=beta_plus)


def cutoffs_from_levels(book: OrderBook, depth_levels: int) -> tuple[float, float]:
    """Mark-to-market cutoffs covering the best ``depth_levels`` merged
    prices on each side: ``h_plus = mid * cumulative ask shares`` and the
    negated analogue for bids."""
    if depth_levels < 1:
        raise ValueError("depth_levels must be >= 1")
    if not book.bids or not book.asks:
        raise EmptySideError("cutoffs need levels on both sides")
    mid = float(mid_price(book))
    ask_shares = sum(lv.quantity for lv in book.asks[:depth_levels])
    bid_shares = sum(lv.quantity for lv in book.bids[:depth_levels])
    return -mid * bid_shares, mid * ask_shares


def extract_series(
    snapshots: Iterable[tuple[int, OrderBook]],
    config: FitConfig = FitConfig(),
) -> tuple[list[ImpactObservation], list[SkipRecord]]:
    """Fit every snapshot, skipping (and recording) the ones that cannot
    be fitted instead of raising."""
    observations: list[ImpactObservation] = []
    skipped: list[SkipRecord] = []
    for ts, book in snapshots:
        try:
            curve = impact_curve(book)
            fit = fit_beta(curve, config)
        except (EmptySideError, EmptyWindowError, DegenerateWindowError) as exc:
            skipped.append(SkipRecord(ts, str(exc)))
            log.warning("skipping snapshot at %s: %s", format_iso_ns(ts), exc)
            continue
        clamped = False
        values = []
        for b in fit:
            if b <= 0.0:
                clamped = True
                b = BETA_FLOOR
            values.append(b)
        observations.append(
            ImpactObservation(
                timestamp=ts,
                mid=curve.mid,
                beta_minus=values[1],
                beta_plus=values[2],
                beta=values[0],
                clamped=clamped,
            )
        )
    return observations, skipped


# --- observations CSV ---------------------------------------------------------

_OBS_HEADER = ["ts", "mid", "beta_minus", "beta_plus", "beta"]


def write_observations_csv(
    observations: Iterable[ImpactObservation], path, deseasonalized: bool = False
) -> None:
    """Full-precision decimal text, one row per observation; deseasonalized
    series carry a marker comment above the header."""
    with open(path, "w", newline="") as fh:
        if deseasonalized:
            fh.write("# deseasonalized: true\n")
        w = csv.writer(fh)
        w.writerow(_OBS_HEADER)
        for o in observations:
            w.writerow(
                [
                    format_iso_ns(o.timestamp),
                    repr(o.mid),
                    repr(o.beta_minus),
                    repr(o.beta_plus),
                    repr(o.beta),
                ]
            )


def read_observations_csv(path) -> tuple[list[ImpactObservation], bool]:
    """Read an observations CSV; returns (observations, deseasonalized)."""
    observations = []
    deseasonalized = False
    with open(path, newline="") as fh:
        first = fh.readline()
        if first.startswith("#"):
            deseasonalized = "deseasonalized: true" in first
            header = fh.readline()
        else:
            header = first
        cols = [c.strip() for c in header.strip().split(",")]
        if cols != _OBS_HEADER:
            raise ValueError(f"{path}: expected header {','.join(_OBS_HEADER)}")
        for row in csv.reader(fh):
            if not row:
                continue
            observations.append(
                ImpactObservation(
                    timestamp=parse_iso_ns(row[0]),
                    mid=float(row[1]),
                    beta_minus=float(row[2]),
                    beta_plus=float(row[3]),
                    beta=float(row[4]),
                )
            )
    return observations, deseasonalized
