"""Synthetic order book data with known ground truth.

The generator inverts the measurement pipeline: a state path is simulated
from known SDE parameters with the exact Gaussian transition (including
overnight gaps), an intraday profile is added to the log liquidity
factors, and each state is rendered as a discrete book on a tick grid
whose step impact curve projects back onto exactly the target slopes
(up to tick rounding).

Rendering detail: level prices carry the value that makes the exact
least-squares projection of the step curve equal the target slope piece
by piece; the first bid price is the arithmetic reflection of the first
ask price around the target mid (so the measured mid is exact before
rounding) and the remaining levels of each side absorb the first level's
rounding so the aggregate projection stays on target.  Cumulative
mark-to-market breakpoints are uniform (equal shares per level).

``beta_h_unit`` rescales the state's log slopes into 1/currency units
(slope_in_currency = exp(state) / beta_h_unit), allowing states quoted
per million or billion currency units of depth to be rendered as books
with integer share quantities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterator, NamedTuple

import numpy as np

from .book import OrderBook, PriceLevel, as_decimal
from .builder import OrderEvent
from .calibrate import SdeParams, exact_discretization
from .dynamics import equilibrium, stationary_covariance
from .errors import DegenerateTicksError
from .impact import ImpactObservation
from .matfun import psd_sqrt
from .timegrid import NS_PER_SEC, TradingWindow, parse_iso_ns

__all__ = ["SynthConfig", "SynthPoint", "SynthDataset", "book_from_state", "stream", "generate"]


@dataclass(frozen=True)
class SynthConfig:
    """Ground truth and rendering parameters for the generator."""

    params: SdeParams                      # per-second units
    days: int = 1
    window: TradingWindow = TradingWindow(36000, 57600)  # 10:00-16:00
    interval_sec: float = 600.0
    seed: int = 0
    start_date: str = "2005-01-03"
    tick: Decimal = Decimal("0.001")
    levels_per_side: int = 10
    shares_per_level: int = 2000
    beta_h_unit: float = 1.0
    profile_minus: tuple[float, ...] | None = None   # hourly offsets on ln(beta-)
    profile_plus: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "tick", as_decimal(self.tick))
        if self.tick <= 0:
            raise ValueError("tick must be positive")
        if self.levels_per_side < 1 or self.shares_per_level < 1:
            raise ValueError("need at least one level and one share per level")
        if self.days < 1 or self.interval_sec <= 0 or self.beta_h_unit <= 0:
            raise ValueError("days, interval and beta_h_unit must be positive")
        if np.linalg.eigvals(self.params.A).real.max() >= 0:
            raise ValueError("truth must be stable (stationary start)")
        nb = self.n_buckets
        for name in ("profile_minus", "profile_plus"):
            prof = getattr(self, name)
            if prof is not None:
                prof = tuple(float(x) for x in prof)
                if len(prof) != nb:
                    raise ValueError(f"{name} must have {nb} hourly values")
                object.__setattr__(self, name, prof)

    @property
    def n_buckets(self) -> int:
        return math.ceil(self.window.span_sec / 3600)

    def bucket_of_sec(self, sec_into_day: float) -> int:
        j = int((sec_into_day - self.window.start_sec) // 3600)
        return min(max(j, 0), self.n_buckets - 1)


class _Renderer:
    """Per-config constants for the book construction."""

    def __init__(self, cfg: SynthConfig):
        n, q = cfg.levels_per_side, cfg.shares_per_level
        c = np.arange(n + 1, dtype=float) * q     # cumulative shares
        self.c2 = c**2
        self.c3 = c**3
        # per-piece weights of the projection integrals, in share units;
        # the mid-price factors cancel between numerator and denominator
        self.w = (self.c2[1:] - self.c2[:-1]) / 2.0
        self.m = (self.c3[1:] - self.c3[:-1]) / 3.0
        self.ratio = self.m / self.w              # ideal level value / beta*mid
        self.w_tail = self.w[1:].sum()
        self.tick_f = float(cfg.tick)
        self.tick_d = cfg.tick
        self.n = n
        self.q = q
        self.h_unit = cfg.beta_h_unit

    def _floor_idx(self, value: float) -> int:
        return int(math.floor(value / self.tick_f + 1e-9))

    def _ceil_idx(self, value: float) -> int:
        return int(math.ceil(value / self.tick_f - 1e-9))

    def _round_idx(self, value: float) -> int:
        return int(math.floor(value / self.tick_f + 0.5))

    def _side_values(self, beta_h: float, first_value: float) -> np.ndarray:
        """Level log-offsets whose exact projection equals beta_h (the
        target slope times the mid), given the already-fixed first level."""
        values = beta_h * self.ratio
        if self.n > 1:
            shortfall = beta_h * self.m[0] - first_value * self.w[0]
            values = values + shortfall / self.w_tail
        values[0] = first_value
        return values

    def render(self, xi: np.ndarray, timestamp: int) -> OrderBook:
        mid = math.exp(xi[0])
        # slope * mid, in per-share units: r(level k) ~ slope * mid * shares
        bh_minus = math.exp(xi[1]) / self.h_unit * mid
        bh_plus = math.exp(xi[2]) / self.h_unit * mid

        ask1 = max(
            self._ceil_idx(mid * math.exp(bh_plus * self.ratio[0])),
            self._floor_idx(mid) + 1,
        )
        bid1 = min(
            self._floor_idx(2.0 * mid - ask1 * self.tick_f),
            self._ceil_idx(mid) - 1,
        )
        if bid1 <= 0 or bid1 >= ask1:
            raise DegenerateTicksError(
                f"tick {self.tick_f} too coarse around mid {mid}"
            )
        ask_vals = self._side_values(bh_plus, math.log(ask1 * self.tick_f / mid))
        bid_vals = self._side_values(bh_minus, -math.log(bid1 * self.tick_f / mid))

        ask_idx = [ask1]
        for v in ask_vals[1:]:
            ask_idx.append(max(self._round_idx(mid * math.exp(v)), ask_idx[-1]))
        bid_idx = [bid1]
        for v in bid_vals[1:]:
            bid_idx.append(min(self._round_idx(mid * math.exp(-v)), bid_idx[-1]))
        if bid_idx[-1] <= 0:
            raise DegenerateTicksError(
                f"book depth reaches nonpositive prices at mid {mid}"
            )
        asks = tuple(PriceLevel(Decimal(i) * self.tick_d, self.q) for i in ask_idx)
        bids = tuple(PriceLevel(Decimal(i) * self.tick_d, self.q) for i in bid_idx)
        return OrderBook(bids=bids, asks=asks, timestamp=timestamp)


def book_from_state(xi, cfg: SynthConfig, timestamp: int = 0) -> OrderBook:
    """Render one state (ln mid, ln beta-, ln beta+) as a discrete book;
    fitting the result recovers the slopes up to tick-rounding error."""
    xi = np.asarray(xi, dtype=float).ravel()
    if xi.shape != (3,) or not np.all(np.isfinite(xi)):
        raise ValueError("state must be 3 finite components")
    return _Renderer(cfg).render(xi, timestamp)


class SynthPoint(NamedTuple):
    ts: int
    book: OrderBook
    truth: ImpactObservation
    state: np.ndarray


def stream(cfg: SynthConfig) -> Iterator[SynthPoint]:
    """Lazily generate the sampled points of every trading day.

    The state starts at a draw from the stationary law and advances with
    the exact transition at the sampling interval within days and over the
    (deterministic-length) overnight gap between them.
    """
    renderer = _Renderer(cfg)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    xi_eq = equilibrium(cfg.params)
    l_inf = psd_sqrt(stationary_covariance(cfg.params))
    xi = xi_eq + l_inf @ rng.standard_normal(3)

    dp_day = exact_discretization(cfg.params, cfg.interval_sec)
    l_day = psd_sqrt(dp_day.V)
    night_sec = 86_400.0 - cfg.window.span_sec
    dp_night = exact_discretization(cfg.params, night_sec)
    l_night = psd_sqrt(dp_night.V)

    base = parse_iso_ns(cfg.start_date + "T00:00:00")
    prof_m = cfg.profile_minus or (0.0,) * cfg.n_buckets
    prof_p = cfg.profile_plus or (0.0,) * cfg.n_buckets

    first = True
    for day in range(cfg.days):
        grid = cfg.window.grid(base + day * 86_400 * NS_PER_SEC, cfg.interval_sec)
        for k, ts in enumerate(grid):
            if not first:
                dp, l_chol = (dp_night, l_night) if k == 0 else (dp_day, l_day)
                xi = dp.B @ xi + dp.b + l_chol @ rng.standard_normal(3)
            first = False
            bucket = cfg.bucket_of_sec((ts - grid[0]) / NS_PER_SEC + cfg.window.start_sec)
            xi_obs = xi + np.array([0.0, prof_m[bucket], prof_p[bucket]])
            book = renderer.render(xi_obs, ts)
            bm = math.exp(xi_obs[1]) / cfg.beta_h_unit
            bp = math.exp(xi_obs[2]) / cfg.beta_h_unit
            truth = ImpactObservation(
                timestamp=ts,
                mid=math.exp(xi_obs[0]),
                beta_minus=bm,
                beta_plus=bp,
                beta=(bm + bp) / 2.0,  # symmetric-window whole-book slope
            )
            yield SynthPoint(ts=ts, book=book, truth=truth, state=xi_obs.copy())


@dataclass(frozen=True)
class SynthDataset:
    snapshots: list[tuple[int, OrderBook]]
    observations: list[ImpactObservation]
    events: list[OrderEvent] | None
    config: SynthConfig


def _events_for(points: list[SynthPoint], cfg: SynthConfig) -> list[OrderEvent]:
    """Cancel-all/add-all event encoding: replaying it through the book
    builder reproduces the snapshot series exactly."""
    events: list[OrderEvent] = []
    prev_ids: list[str] = []
    prev_day = None
    for point in points:
        day = point.ts // (86_400 * NS_PER_SEC)
        if day != prev_day:
            prev_ids = []
            prev_day = day
        for oid in prev_ids:
            events.append(
                OrderEvent(ts=point.ts, order_id=oid, side="bid" if oid.endswith("b") else "ask", action="cancel")
            )
        ids: list[str] = []
        book = point.book
        for i, lv in enumerate(book.bids):
            oid = f"{point.ts}-{i}b"
            events.append(
                OrderEvent(point.ts, oid, "bid", "add", price=lv.price, qty=lv.quantity)
            )
            ids.append(oid)
        for i, lv in enumerate(book.asks):
            oid = f"{point.ts}-{i}a"
            events.append(
                OrderEvent(point.ts, oid, "ask", "add", price=lv.price, qty=lv.quantity)
            )
            ids.append(oid)
        prev_ids = ids
    return events


def generate(cfg: SynthConfig, include_events: bool = True) -> SynthDataset:
    """Materialize the stream: snapshots, the true observation series and
    (optionally) an order-event encoding of the books."""
    points = list(stream(cfg))
    return SynthDataset(
        snapshots=[(p.ts, p.book) for p in points],
        observations=[p.truth for p in points],
        events=_events_for(points, cfg) if include_events else None,
        config=cfg,
    )
