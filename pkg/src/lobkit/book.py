"""Order book value types and deterministic liquidity-curve math.

Prices are exact decimals (:class:`decimal.Decimal`) so that cost
arithmetic on real tick grids is bit-exact; curve math (impact curves,
slopes, cost integrals) converts to floating point at evaluation time.

The three curves derived from a book:

* marginal price ``s(x)``: price of the next share at signed order size x
  (x < 0 sells against the bid side),
* relative price impact ``r(h) = ln s(h/mid) - ln mid`` as a function of
  the mark-to-market order value ``h = mid * x``,
* liquidity cost ``phi(h) = integral_0^h exp(r(z)) dz``, so that the cash
  cost of x shares is ``phi(mid * x)``.

All types are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Iterable, Sequence

import numpy as np

from .errors import EmptySideError, InsufficientDepthError, NegativeBetaError

__all__ = [
    "PriceLevel",
    "OrderBook",
    "MarginalPriceCurve",
    "ImpactCurve",
    "LiquidityCostFunction",
    "mid_price",
    "total_cost",
    "impact_curve",
    "phi_from_beta",
    "read_snapshot_csv",
    "write_snapshot_csv",
]


def as_decimal(value) -> Decimal:
    """Coerce to Decimal through the decimal literal (never via binary float)."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, int):
        return Decimal(value)
    return Decimal(str(value))


@dataclass(frozen=True)
class PriceLevel:
    """One price level: strictly positive price, strictly positive integer
    share quantity."""

    price: Decimal
    quantity: int

    def __post_init__(self):
        object.__setattr__(self, "price", as_decimal(self.price))
        if self.price <= 0:
            raise ValueError(f"price must be positive, got {self.price}")
        if not isinstance(self.quantity, int) or isinstance(self.quantity, bool):
            raise ValueError("quantity must be an integer share count")
        if self.quantity <= 0:
            raise ValueError(f"quantity must be positive, got {self.quantity}")


def _normalize_side(levels: Iterable[PriceLevel], descending: bool) -> tuple[PriceLevel, ...]:
    merged: dict[Decimal, int] = {}
    for lv in levels:
        if not isinstance(lv, PriceLevel):
            lv = PriceLevel(*lv)
        merged[lv.price] = merged.get(lv.price, 0) + lv.quantity
    prices = sorted(merged, reverse=descending)
    return tuple(PriceLevel(p, merged[p]) for p in prices)


@dataclass(frozen=True)
class OrderBook:
    """Snapshot of resting liquidity.

    Bids are sorted by strictly decreasing price, asks by strictly
    increasing price; equal prices on a side are merged on construction.
    The book is validated to be uncrossed (best bid < best ask).
    """

    bids: tuple[PriceLevel, ...] = ()
    asks: tuple[PriceLevel, ...] = ()
    timestamp: int = 0

    def __post_init__(self):
        object.__setattr__(self, "bids", _normalize_side(self.bids, descending=True))
        object.__setattr__(self, "asks", _normalize_side(self.asks, descending=False))
        if self.bids and self.asks and self.bids[0].price >= self.asks[0].price:
            raise ValueError(
                f"crossed book: best bid {self.bids[0].price} >= "
                f"best ask {self.asks[0].price}"
            )

    @property
    def best_bid(self) -> Decimal:
        if not self.bids:
            raise EmptySideError("book has no bid levels")
        return self.bids[0].price

    @property
    def best_ask(self) -> Decimal:
        if not self.asks:
            raise EmptySideError("book has no ask levels")
        return self.asks[0].price

    def depth(self, side: str) -> int:
        levels = self.bids if side == "bid" else self.asks
        return sum(lv.quantity for lv in levels)


def mid_price(book: OrderBook) -> Decimal:
    """Midpoint of best bid and best ask (exact decimal)."""
    return (book.best_bid + book.best_ask) / 2


def total_cost(book: OrderBook, x) -> Decimal:
    """Cash cost of a market order of ``x`` shares (negative x = sale,
    yielding a negative cost, i.e. revenue).

    The cost walks the book level by level, filling the last level
    partially; it errors rather than extrapolate beyond the resting depth.
    """
    xd = as_decimal(x)
    if xd == 0:
        return Decimal(0)
    side = "ask" if xd > 0 else "bid"
    levels = book.asks if xd > 0 else book.bids
    if not levels:
        raise EmptySideError(f"book has no {side} levels")
    remaining = abs(xd)
    cost = Decimal(0)
    for lv in levels:
        take = min(remaining, Decimal(lv.quantity))
        cost += lv.price * take
        remaining -= take
        if remaining == 0:
            break
    if remaining > 0:
        raise InsufficientDepthError(abs(xd), book.depth(side), side)
    return cost if xd > 0 else -cost


@dataclass(frozen=True)
class MarginalPriceCurve:
    """Nondecreasing step function x -> price of the marginal share.

    Steps are (cumulative shares, price) per side. Beyond the resting ask
    depth the marginal price is +inf; beyond the bid depth the marginal
    revenue is the zero sentinel (no liquidity left to sell into).
    """

    ask_steps: tuple[tuple[Decimal, Decimal], ...]
    bid_steps: tuple[tuple[Decimal, Decimal], ...]

    @classmethod
    def from_book(cls, book: OrderBook) -> "MarginalPriceCurve":
        def steps(levels):
            out, cum = [], Decimal(0)
            for lv in levels:
                cum += lv.quantity
                out.append((cum, lv.price))
            return tuple(out)

        return cls(ask_steps=steps(book.asks), bid_steps=steps(book.bids))

    def __call__(self, x: float) -> float:
        if x >= 0:
            for cum, price in self.ask_steps:
                if x <= float(cum):
                    return float(price)
            return math.inf
        depth = -x
        for cum, price in self.bid_steps:
            if depth <= float(cum):
                return float(price)
        return 0.0


def _side_arrays(levels: Sequence[PriceLevel], mid: Decimal):
    """Cumulative mark-to-market breakpoints and log-price offsets for one
    side, as float arrays."""
    log_mid = math.log(float(mid))
    h, r, cum = [], [], Decimal(0)
    for lv in levels:
        cum += lv.quantity
        h.append(float(mid * cum))
        r.append(math.log(float(lv.price)) - log_mid)
    return np.asarray(h), np.asarray(r)


@dataclass(frozen=True)
class ImpactCurve:
    """Relative price impact r as a step function of mark-to-market value h.

    ``ask_h[k]`` is the cumulative mark-to-market value through ask level
    k; r equals ``ask_r[k]`` on ``(ask_h[k-1], ask_h[k]]``.  The bid side
    mirrors this with negative h (``bid_h`` decreasing).  The half-spread
    jump at the origin is retained: r(0+) = ask_r[0] >= 0 and
    r(0-) = bid_r[0] <= 0.
    """

    mid: float
    ask_h: np.ndarray
    ask_r: np.ndarray
    bid_h: np.ndarray  # negative, decreasing (deeper levels more negative)
    bid_r: np.ndarray  # nonpositive, decreasing

    @property
    def h_max(self) -> float:
        return float(self.ask_h[-1])

    @property
    def h_min(self) -> float:
        return float(self.bid_h[-1])

    def __call__(self, h: float) -> float:
        """Evaluate r(h); +/-inf beyond the book depth, 0 at h = 0."""
        if h == 0.0:
            return 0.0
        if h > 0:
            k = int(np.searchsorted(self.ask_h, h, side="left"))
            return float(self.ask_r[k]) if k < len(self.ask_r) else math.inf
        k = int(np.searchsorted(-self.bid_h, -h, side="left"))
        return float(self.bid_r[k]) if k < len(self.bid_r) else -math.inf

    # -- exact piecewise integrals used by the fitting and cost code --------

    def moment_integrals(self, lo: float, hi: float) -> tuple[float, float]:
        """Exact (integral of h*r(h) dh, integral of h^2 dh) over [lo, hi],
        0 <= lo < hi <= h_max or h_min <= lo < hi <= 0.

        r is constant on each piece, so the first integral is a finite sum
        of quadratic terms; used by the least-squares slope fit.
        """
        if lo >= hi:
            raise ValueError("need lo < hi")
        num = 0.0
        if hi > 0:  # ask-side window [lo, hi], lo >= 0
            prev = lo
            for hk, rk in zip(self.ask_h, self.ask_r):
                if hk <= lo:
                    continue
                top = min(float(hk), hi)
                num += rk * (top * top - prev * prev) / 2.0
                prev = top
                if top >= hi:
                    break
        else:  # bid-side window [lo, hi], hi <= 0
            prev = hi
            for hk, rk in zip(self.bid_h, self.bid_r):
                if hk >= hi:
                    continue
                bot = max(float(hk), lo)
                # integral over [bot, prev] of h * rk
                num += rk * (prev * prev - bot * bot) / 2.0
                prev = bot
                if bot <= lo:
                    break
        den = (hi ** 3 - lo ** 3) / 3.0
        return num, den

    def exp_integral(self, h: float) -> float:
        """Exact integral of exp(r(z)) dz from 0 to h (the cost of a market
        order of mark-to-market value h, divided by nothing: phi(h))."""
        if h == 0.0:
            return 0.0
        total = 0.0
        if h > 0:
            prev = 0.0
            for hk, rk in zip(self.ask_h, self.ask_r):
                top = min(float(hk), h)
                total += math.exp(rk) * (top - prev)
                prev = top
                if top >= h:
                    return total
            if h <= self.h_max * (1 + 1e-12):  # full-depth h up to rounding
                return total
            return math.inf
        prev = 0.0
        for hk, rk in zip(self.bid_h, self.bid_r):
            bot = max(float(hk), h)
            total += math.exp(rk) * (bot - prev)
            prev = bot
            if bot <= h:
                return total
        # beyond bid depth marginal revenue is the zero sentinel: phi flattens
        return total


def impact_curve(book: OrderBook) -> ImpactCurve:
    """Relative price impact curve of a book around its mid-price."""
    if not book.bids or not book.asks:
        raise EmptySideError("impact curve needs both sides")
    mid = mid_price(book)
    ask_h, ask_r = _side_arrays(book.asks, mid)
    bid_h, bid_r = _side_arrays(book.bids, mid)
    return ImpactCurve(
        mid=float(mid),
        ask_h=ask_h,
        ask_r=ask_r,
        bid_h=-bid_h,  # bid depth runs into negative mark-to-market values
        bid_r=bid_r,
    )


def phi_from_beta(beta_minus: float, beta_plus: float, h: float) -> float:
    """Liquidity cost of an order of mark-to-market value h under the
    piecewise-linear impact model with side slopes ``beta_minus`` (h <= 0)
    and ``beta_plus`` (h >= 0).

    The closed form is ``(exp(beta*h) - 1) / beta`` on each side, with the
    perfectly liquid limit phi(h) = h as the relevant beta goes to zero.
    """
    if beta_minus < 0 or beta_plus < 0:
        raise NegativeBetaError(
            f"betas must be nonnegative, got ({beta_minus}, {beta_plus})"
        )
    b = beta_plus if h >= 0 else beta_minus
    t = b * h
    if t == 0.0:  # covers b == 0 and products that underflow to zero
        return h
    return float(np.expm1(t) / b)


@dataclass(frozen=True)
class LiquidityCostFunction:
    """phi: mark-to-market value -> cash cost.

    Either the exact piecewise-linear integral of a book's step impact
    curve, or the piecewise-exponential closed form for fitted side slopes.
    phi is convex, vanishes at 0 and satisfies phi(h) >= h.
    """

    curve: ImpactCurve | None = None
    beta_minus: float | None = None
    beta_plus: float | None = None

    @classmethod
    def from_curve(cls, curve: ImpactCurve) -> "LiquidityCostFunction":
        return cls(curve=curve)

    @classmethod
    def from_betas(cls, beta_minus: float, beta_plus: float) -> "LiquidityCostFunction":
        if beta_minus < 0 or beta_plus < 0:
            raise NegativeBetaError(
                f"betas must be nonnegative, got ({beta_minus}, {beta_plus})"
            )
        return cls(beta_minus=beta_minus, beta_plus=beta_plus)

    def __call__(self, h: float) -> float:
        if self.curve is not None:
            return self.curve.exp_integral(h)
        return phi_from_beta(self.beta_minus, self.beta_plus, h)


# --- snapshot CSV interchange -------------------------------------------------

_CSV_HEADER = ["side", "price", "quantity"]


def write_snapshot_csv(book: OrderBook, path) -> None:
    """Write a book as the side/price/quantity interchange CSV
    (side B or A, price as a decimal string, integer quantity)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_CSV_HEADER)
        for lv in book.bids:
            w.writerow(["B", str(lv.price), lv.quantity])
        for lv in book.asks:
            w.writerow(["A", str(lv.price), lv.quantity])


def read_snapshot_csv(path, timestamp: int = 0) -> OrderBook:
    """Read a side/price/quantity CSV back into an :class:`OrderBook`."""
    bids, asks = [], []
    with open(path, newline="") as fh:
        rows = csv.reader(fh)
        header = next(rows, None)
        if header is None or [c.strip().lower() for c in header] != _CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(_CSV_HEADER)}")
        for row in rows:
            if not row:
                continue
            side, price, qty = row[0].strip(), row[1].strip(), int(row[2])
            level = PriceLevel(Decimal(price), qty)
            if side == "B":
                bids.append(level)
            elif side == "A":
                asks.append(level)
            else:
                raise ValueError(f"{path}: side must be B or A, got {side!r}")
    return OrderBook(bids=tuple(bids), asks=tuple(asks), timestamp=timestamp)
