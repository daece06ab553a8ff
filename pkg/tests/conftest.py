"""Shared fixtures: the example book, published parameter sets, and a
random book generator used by the invariant tests."""

import math
from decimal import Decimal

import numpy as np
import pytest

from lobkit import OrderBook, PriceLevel, SdeParams

# Example book: 26 visible rows of the TDC snapshot (per-order rows; the
# constructor merges equal prices).
TABLE1_BIDS = [
    ("238.75", 140), ("238.75", 600), ("238.75", 3300), ("238.75", 2000),
    ("238.5", 10000), ("238.5", 3900), ("238.5", 15000), ("238.5", 1500),
    ("238.25", 10000), ("238.25", 1000), ("238.25", 3500), ("238.25", 10000),
    ("238.25", 200),
]
TABLE1_ASKS = [
    ("239", 3700), ("239", 1000), ("239", 5000), ("239", 1000), ("239", 1000),
    ("239", 2500), ("239", 6600), ("239.25", 10000), ("239.25", 2500),
    ("239.25", 3000), ("239.5", 600), ("239.5", 5000), ("239.5", 800),
]

# Published three-factor estimates (4 decimals) for the two stocks.
TDC_A = np.array([
    [-0.0014, -0.0003, 0.0004],
    [-0.5132, -0.2466, -0.0035],
    [-0.9445, -0.0133, -0.1952],
])
TDC_a = np.array([0.0080, 2.8240, 5.1970])
TDC_SIGMA = np.array([
    [0.0000, -0.0001, 0.0000],
    [-0.0001, 0.1963, 0.0492],
    [0.0000, 0.0492, 0.1254],
])
TDC_EIGENVALUES = np.array([-0.0029, -0.2479, -0.1925])
TDC_EQUILIBRIUM = np.array([5.5069, -0.0084, -0.0229])

MM_A = np.array([
    [-0.0002, -0.0001, 0.0001],
    [0.9247, -0.6417, 0.1336],
    [-1.3643, 0.1465, -0.7363],
])
MM_a = np.array([0.0022, -9.9966, 14.7467])
MM_SIGMA = np.array([
    [0.0000, 0.0001, -0.0002],
    [0.0001, 2.0846, -0.0492],
    [-0.0002, -0.0492, 1.7570],
])
MM_EIGENVALUES = np.array([-0.0005, -0.8364, -0.5413])
MM_EQUILIBRIUM = np.array([10.9150, 0.1148, -0.1735])

# Stable synthetic truth used across the calibration tests, quoted per
# 600-second sampling step and converted to per-second units.
SYN_A_STEP = np.array([
    [-0.03, -0.002, 0.002],
    [-0.30, -0.30, -0.02],
    [-0.50, -0.01, -0.25],
])
SYN_EQ = np.array([3.0, -13.0, -12.8])
SYN_a_STEP = -SYN_A_STEP @ SYN_EQ
SYN_SIGMA_STEP = np.array([
    [0.002, 0.0001, 0.0001],
    [0.0001, 0.10, 0.03],
    [0.0001, 0.03, 0.12],
])
SYN_STEP_SEC = 600.0


@pytest.fixture(scope="session")
def table1_book() -> OrderBook:
    return OrderBook(
        bids=[PriceLevel(Decimal(p), q) for p, q in TABLE1_BIDS],
        asks=[PriceLevel(Decimal(p), q) for p, q in TABLE1_ASKS],
    )


@pytest.fixture(scope="session")
def tdc_params() -> SdeParams:
    return SdeParams(A=TDC_A, a=TDC_a, sigma=TDC_SIGMA)


@pytest.fixture(scope="session")
def mm_params() -> SdeParams:
    return SdeParams(A=MM_A, a=MM_a, sigma=MM_SIGMA)


@pytest.fixture(scope="session")
def syn_params() -> SdeParams:
    return SdeParams(
        A=SYN_A_STEP / SYN_STEP_SEC,
        a=SYN_a_STEP / SYN_STEP_SEC,
        sigma=SYN_SIGMA_STEP / math.sqrt(SYN_STEP_SEC),
    )


def random_book(rng: np.random.Generator, timestamp: int = 0) -> OrderBook:
    """Random uncrossed book on a random tick grid."""
    tick = Decimal(str(rng.choice(["0.01", "0.05", "0.25", "0.5"])))
    mid_ticks = int(rng.integers(200, 20000))
    n_bid = int(rng.integers(1, 9))
    n_ask = int(rng.integers(1, 9))
    ask_offsets = np.cumsum(rng.integers(1, 6, size=n_ask))
    bid_offsets = np.cumsum(rng.integers(1, 6, size=n_bid))
    asks = [
        PriceLevel(Decimal(mid_ticks + int(o)) * tick, int(rng.integers(1, 20000)))
        for o in ask_offsets
    ]
    bids = [
        PriceLevel(Decimal(mid_ticks - int(o)) * tick, int(rng.integers(1, 20000)))
        for o in bid_offsets
    ]
    return OrderBook(bids=bids, asks=asks, timestamp=timestamp)
