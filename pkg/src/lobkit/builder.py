"""Order book reconstruction from an event stream.

Events are Add/Cancel/Modify/Execute records; matching follows price/time
priority with continuous execution: an incoming order that crosses the
opposite best executes against resting orders (best price first, then
earliest arrival) until filled or no longer marketable, and any remainder
rests.  Modifying the price, or increasing the quantity, loses time
priority (the order is re-sequenced and may execute immediately);
decreasing the quantity keeps it.

Book state is single-threaded per instrument stream; replays are
deterministic, so identical event streams yield identical snapshots.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Iterator

from .book import OrderBook, PriceLevel, as_decimal, write_snapshot_csv
from .errors import (
    CrossedBookCorruptionError,
    OutOfOrderEventError,
    UnknownOrderIdError,
)
from .timegrid import TradingWindow, day_start_ns, format_iso_ns, parse_iso_ns

__all__ = [
    "OrderEvent",
    "Trade",
    "BookState",
    "apply_event",
    "snapshot",
    "sample_books",
    "read_events_ndjson",
    "write_events_ndjson",
    "write_snapshot_series",
    "read_snapshot_series",
]

log = logging.getLogger(__name__)

_ACTIONS = ("add", "cancel", "modify", "execute")
_SIDES = ("bid", "ask")


@dataclass(frozen=True)
class OrderEvent:
    """One order-flow record.

    ``price``/``qty`` are required for add, carry the new values for
    modify, and ``qty`` optionally caps how many shares an execute
    consumes (all resting shares when omitted).
    """

    ts: int
    order_id: str
    side: str
    action: str
    price: Decimal | None = None
    qty: int | None = None

    def __post_init__(self):
        if self.side not in _SIDES:
            raise ValueError(f"side must be bid or ask, got {self.side!r}")
        if self.action not in _ACTIONS:
            raise ValueError(f"unknown action {self.action!r}")
        if self.price is not None:
            object.__setattr__(self, "price", as_decimal(self.price))
        if self.action == "add":
            if self.price is None or self.price <= 0:
                raise ValueError("add needs a positive price")
            if self.qty is None or self.qty <= 0:
                raise ValueError("add needs a positive quantity")


@dataclass(frozen=True)
class Trade:
    """Execution of ``qty`` shares at ``price`` against resting order
    ``maker_id`` (taker_id is None for exchange-reported executes)."""

    ts: int
    price: Decimal
    qty: int
    maker_id: str
    taker_id: str | None
    aggressor_side: str | None


@dataclass
class _Resting:
    order_id: str
    side: str
    price: Decimal
    qty: int
    seq: int


class BookState:
    """Mutable per-instrument book: resting orders keyed by id, matched in
    (price, arrival-sequence) priority."""

    def __init__(self):
        self._orders: dict[str, _Resting] = {}
        self._seq = 0
        self.traded_qty = 0
        self.cancelled_qty = 0
        self.added_qty = 0

    def __len__(self) -> int:
        return len(self._orders)

    def resting_qty(self) -> int:
        return sum(o.qty for o in self._orders.values())

    def _next_seq(self) -> int:
        self._seq += 1
        return self._seq

    def _queue(self, side: str) -> list[_Resting]:
        """Opposite-side execution queue, best price first, then earliest."""
        orders = [o for o in self._orders.values() if o.side == side]
        if side == "ask":
            orders.sort(key=lambda o: (o.price, o.seq))
        else:
            orders.sort(key=lambda o: (-o.price, o.seq))
        return orders

    def best(self, side: str) -> Decimal | None:
        prices = [o.price for o in self._orders.values() if o.side == side]
        if not prices:
            return None
        return min(prices) if side == "ask" else max(prices)

    # -- event handlers ------------------------------------------------------

    def apply(self, ev: OrderEvent) -> list[Trade]:
        handler = {
            "add": self._apply_add,
            "cancel": self._apply_cancel,
            "modify": self._apply_modify,
            "execute": self._apply_execute,
        }[ev.action]
        trades = handler(ev)
        self._check_not_crossed()
        return trades

    def _apply_add(self, ev: OrderEvent) -> list[Trade]:
        if ev.order_id in self._orders:
            raise ValueError(f"duplicate order id {ev.order_id!r}")
        self.added_qty += ev.qty
        return self._match_and_rest(ev.ts, ev.order_id, ev.side, ev.price, ev.qty)

    def _match_and_rest(self, ts, order_id, side, price, qty) -> list[Trade]:
        trades: list[Trade] = []
        remaining = qty
        opposite = "ask" if side == "bid" else "bid"
        for resting in self._queue(opposite):
            marketable = (
                price >= resting.price if side == "bid" else price <= resting.price
            )
            if not marketable or remaining == 0:
                break
            fill = min(remaining, resting.qty)
            trades.append(
                Trade(ts, resting.price, fill, resting.order_id, order_id, side)
            )
            self.traded_qty += 2 * fill  # both sides of the trade leave the flow
            remaining -= fill
            resting.qty -= fill
            if resting.qty == 0:
                del self._orders[resting.order_id]
        if remaining > 0:
            self._orders[order_id] = _Resting(
                order_id, side, price, remaining, self._next_seq()
            )
        return trades

    def _pop(self, order_id: str) -> _Resting:
        try:
            return self._orders.pop(order_id)
        except KeyError:
            raise UnknownOrderIdError(f"unknown order id {order_id!r}") from None

    def _apply_cancel(self, ev: OrderEvent) -> list[Trade]:
        order = self._pop(ev.order_id)
        self.cancelled_qty += order.qty
        return []

    def _apply_modify(self, ev: OrderEvent) -> list[Trade]:
        order = self._pop(ev.order_id)
        price = ev.price if ev.price is not None else order.price
        qty = ev.qty if ev.qty is not None else order.qty
        if qty <= 0:
            self.cancelled_qty += order.qty
            return []
        if price == order.price and qty < order.qty:
            # quantity decrease at the same price keeps time priority
            self.cancelled_qty += order.qty - qty
            order.qty = qty
            self._orders[order.order_id] = order
            return []
        # price change or size increase: cancel + re-add semantics
        self.cancelled_qty += order.qty
        self.added_qty += qty
        return self._match_and_rest(ev.ts, order.order_id, order.side, price, qty)

    def _apply_execute(self, ev: OrderEvent) -> list[Trade]:
        order = self._orders.get(ev.order_id)
        if order is None:
            raise UnknownOrderIdError(f"unknown order id {ev.order_id!r}")
        fill = order.qty if ev.qty is None else min(ev.qty, order.qty)
        order.qty -= fill
        self.traded_qty += fill
        if order.qty == 0:
            del self._orders[order.order_id]
        return [Trade(ev.ts, order.price, fill, order.order_id, None, None)]

    def _check_not_crossed(self):
        bid, ask = self.best("bid"), self.best("ask")
        if bid is not None and ask is not None and bid >= ask:
            raise CrossedBookCorruptionError(
                f"book crossed: bid {bid} >= ask {ask}"
            )


def apply_event(state: BookState, ev: OrderEvent) -> tuple[BookState, list[Trade]]:
    """Apply one event, returning the (mutated) state and the trades it
    produced."""
    return state, state.apply(ev)


def snapshot(state: BookState, timestamp: int = 0) -> OrderBook:
    """Aggregate resting orders into a merged, sorted book snapshot."""
    bids, asks = [], []
    for o in state._orders.values():
        (bids if o.side == "bid" else asks).append(PriceLevel(o.price, o.qty))
    return OrderBook(bids=tuple(bids), asks=tuple(asks), timestamp=timestamp)


def sample_books(
    events: Iterable[OrderEvent],
    interval_sec: float,
    window: TradingWindow,
) -> list[tuple[int, OrderBook]]:
    """Prevailing book at every grid point of the daily trading window.

    The grid restarts each (UTC) day with an empty book, so no sample ever
    spans an overnight gap.  A day contributes samples only if it has at
    least one event inside the window; events earlier in the day still
    shape the books.  Events must be time-ordered.
    """
    samples: list[tuple[int, OrderBook]] = []
    state = BookState()
    day: int | None = None
    grid: list[int] = []
    gi = 0
    day_active = False
    day_samples: list[tuple[int, OrderBook]] = []
    last_ts: int | None = None

    def flush_day():
        nonlocal gi
        while gi < len(grid):
            day_samples.append((grid[gi], snapshot(state, grid[gi])))
            gi += 1
        if day_active:
            samples.extend(day_samples)

    for ev in events:
        if last_ts is not None and ev.ts < last_ts:
            raise OutOfOrderEventError(ev.ts)
        last_ts = ev.ts
        ev_day = day_start_ns(ev.ts)
        if ev_day != day:
            if day is not None:
                flush_day()
            day = ev_day
            state = BookState()
            grid = window.grid(day, interval_sec)
            gi = 0
            day_active = False
            day_samples = []
        while gi < len(grid) and grid[gi] < ev.ts:
            day_samples.append((grid[gi], snapshot(state, grid[gi])))
            gi += 1
        state.apply(ev)
        if window.contains(ev.ts):
            day_active = True
    if day is not None:
        flush_day()
    return samples


# --- NDJSON event interchange -------------------------------------------------

_SIDE_CODE = {"bid": "B", "ask": "A"}
_CODE_SIDE = {"B": "bid", "A": "ask", "bid": "bid", "ask": "ask"}
_ACTION_CODE = {"add": "Add", "cancel": "Cancel", "modify": "Modify", "execute": "Execute"}
_CODE_ACTION = {v: k for k, v in _ACTION_CODE.items()}
_CODE_ACTION.update({k: k for k in _ACTIONS})


def write_events_ndjson(events: Iterable[OrderEvent], path) -> None:
    """One JSON object per line with fields ts, id, side, action, price, qty."""
    with open(path, "w") as fh:
        for ev in events:
            rec = {
                "ts": format_iso_ns(ev.ts),
                "id": ev.order_id,
                "side": _SIDE_CODE[ev.side],
                "action": _ACTION_CODE[ev.action],
                "price": None if ev.price is None else str(ev.price),
                "qty": ev.qty,
            }
            fh.write(json.dumps(rec) + "\n")


def read_events_ndjson(path) -> Iterator[OrderEvent]:
    """Stream events back from an NDJSON file."""
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            yield OrderEvent(
                ts=parse_iso_ns(rec["ts"]),
                order_id=str(rec["id"]),
                side=_CODE_SIDE[rec["side"]],
                action=_CODE_ACTION[rec["action"]],
                price=None if rec.get("price") in (None, "") else Decimal(rec["price"]),
                qty=rec.get("qty"),
            )


# --- snapshot series on disk ----------------------------------------------------

def write_snapshot_series(samples: Iterable[tuple[int, OrderBook]], out_dir) -> Path:
    """Write one snapshot CSV per sample plus an index CSV
    (timestamp, filename); returns the index path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index_path = out / "index.csv"
    with open(index_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp", "filename"])
        for i, (ts, book) in enumerate(samples):
            name = f"book_{i:06d}.csv"
            write_snapshot_csv(book, out / name)
            w.writerow([format_iso_ns(ts), name])
    return index_path


def read_snapshot_series(in_dir) -> list[tuple[int, OrderBook]]:
    """Read a snapshot directory written by :func:`write_snapshot_series`."""
    from .book import read_snapshot_csv

    in_dir = Path(in_dir)
    index_path = in_dir / "index.csv"
    samples = []
    if not index_path.exists():
        log.warning("no index.csv under %s; treating as empty series", in_dir)
        return samples
    with open(index_path, newline="") as fh:
        rows = csv.reader(fh)
        next(rows, None)
        for row in rows:
            if not row:
                continue
            ts = parse_iso_ns(row[0])
            samples.append((ts, read_snapshot_csv(in_dir / row[1], timestamp=ts)))
    return samples
