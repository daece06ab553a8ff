"""Order book value types and curve math."""

import math
from decimal import Decimal

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from lobkit import (
    LiquidityCostFunction,
    MarginalPriceCurve,
    OrderBook,
    PriceLevel,
    impact_curve,
    mid_price,
    phi_from_beta,
    total_cost,
)
from lobkit.book import read_snapshot_csv, write_snapshot_csv
from lobkit.errors import EmptySideError, InsufficientDepthError, NegativeBetaError

from conftest import random_book


def simple_book(bid="99", ask="101", qty=100):
    return OrderBook(
        bids=[PriceLevel(Decimal(bid), qty)],
        asks=[PriceLevel(Decimal(ask), qty)],
    )


class TestPriceLevel:
    def test_positive_price_required(self):
        with pytest.raises(ValueError):
            PriceLevel(Decimal("0"), 10)
        with pytest.raises(ValueError):
            PriceLevel(Decimal("-1"), 10)

    def test_positive_integer_quantity_required(self):
        with pytest.raises(ValueError):
            PriceLevel(Decimal("1"), 0)
        with pytest.raises(ValueError):
            PriceLevel(Decimal("1"), -5)


class TestOrderBook:
    def test_merges_equal_prices_preserving_quantity(self, table1_book):
        assert [(str(l.price), l.quantity) for l in table1_book.asks] == [
            ("239", 20800), ("239.25", 15500), ("239.5", 6400)
        ]
        assert [(str(l.price), l.quantity) for l in table1_book.bids] == [
            ("238.75", 6040), ("238.5", 30400), ("238.25", 24700)
        ]

    def test_rejects_crossed_book(self):
        with pytest.raises(ValueError, match="crossed"):
            simple_book(bid="101", ask="101")
        with pytest.raises(ValueError, match="crossed"):
            simple_book(bid="102", ask="101")

    def test_sorting(self):
        book = OrderBook(
            bids=[PriceLevel(Decimal("98"), 1), PriceLevel(Decimal("99"), 1)],
            asks=[PriceLevel(Decimal("103"), 1), PriceLevel(Decimal("101"), 1)],
        )
        assert [l.price for l in book.bids] == [Decimal("99"), Decimal("98")]
        assert [l.price for l in book.asks] == [Decimal("101"), Decimal("103")]


class TestMidPrice:
    def test_table1(self, table1_book):
        assert mid_price(table1_book) == Decimal("238.875")

    def test_symmetric(self):
        assert mid_price(simple_book()) == Decimal("100")

    def test_after_removing_best_ask_level(self, table1_book):
        # drop every ask at the best price; next level becomes best
        asks = [l for l in table1_book.asks if l.price != Decimal("239")]
        book = OrderBook(bids=table1_book.bids, asks=asks)
        assert mid_price(book) == Decimal("239.0")

    def test_empty_side(self, table1_book):
        with pytest.raises(EmptySideError):
            mid_price(OrderBook(bids=table1_book.bids, asks=()))


class TestTotalCost:
    def test_best_ask_exhausted_exactly(self, table1_book):
        assert total_cost(table1_book, 20800) == Decimal(20800) * Decimal(239)
        assert total_cost(table1_book, 20800) == Decimal(4971200)

    def test_zero(self, table1_book):
        assert total_cost(table1_book, 0) == Decimal(0)

    def test_partial_next_level(self, table1_book):
        assert total_cost(table1_book, 20801) == Decimal("4971439.25")

    def test_sell_side_revenue(self, table1_book):
        assert total_cost(table1_book, -6040) == -Decimal("238.75") * 6040

    def test_insufficient_depth_reports_max_fillable(self, table1_book):
        with pytest.raises(InsufficientDepthError) as err:
            total_cost(table1_book, 42701)
        assert err.value.max_fillable == 42700
        with pytest.raises(InsufficientDepthError) as err:
            total_cost(table1_book, -61141)
        assert err.value.max_fillable == 61140

    def test_convexity_on_grid(self, table1_book):
        xs = [0, 1, 100, 5000, 20800, 20801, 30000, 36300, 40000, 42700]
        costs = [total_cost(table1_book, x) for x in xs]
        slopes = [
            (costs[i + 1] - costs[i]) / (xs[i + 1] - xs[i])
            for i in range(len(xs) - 1)
        ]
        assert all(s1 <= s2 for s1, s2 in zip(slopes, slopes[1:]))

    def test_nondecreasing(self, table1_book):
        assert total_cost(table1_book, 100) <= total_cost(table1_book, 200)


class TestMarginalPriceCurve:
    def test_spread_limits(self, table1_book):
        s = MarginalPriceCurve.from_book(table1_book)
        assert s(1.0) == 239.0
        assert s(-1.0) == 238.75
        assert s(20800.0) == 239.0
        assert s(20801.0) == 239.25

    def test_exhausted_sentinels(self, table1_book):
        s = MarginalPriceCurve.from_book(table1_book)
        assert s(42701.0) == math.inf
        assert s(-61141.0) == 0.0

    def test_nondecreasing(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            book = random_book(rng)
            s = MarginalPriceCurve.from_book(book)
            xs = np.linspace(-float(book.depth("bid")), float(book.depth("ask")), 101)
            vals = [s(x) for x in xs]
            assert all(a <= b for a, b in zip(vals, vals[1:]))


class TestImpactCurve:
    def test_spread_jump_at_origin(self, table1_book):
        r = impact_curve(table1_book)
        assert r(1e-9) == pytest.approx(math.log(239 / 238.875), rel=1e-12)
        assert r(-1e-9) == pytest.approx(math.log(238.75 / 238.875), rel=1e-12)
        assert r(1e-9) > 0 > r(-1e-9)

    def test_value_beyond_best_level(self, table1_book):
        r = impact_curve(table1_book)
        h_best = float(mid_price(table1_book)) * 20800
        assert r(h_best + 1.0) == pytest.approx(math.log(239.25 / 238.875), rel=1e-12)

    def test_perfectly_liquid_limit(self):
        # books with shrinking spread and flat depth: r values vanish with
        # the spread
        sups = []
        for spread_ticks, tick in ((100, "0.01"), (10, "0.001"), (1, "0.000001")):
            t = Decimal(tick)
            book = OrderBook(
                bids=[PriceLevel(Decimal(100) - t * spread_ticks, 10**7)],
                asks=[PriceLevel(Decimal(100) + t * spread_ticks, 10**7)],
            )
            r = impact_curve(book)
            sups.append(max(abs(r.ask_r).max(), abs(r.bid_r).max()))
        assert sups[0] > sups[1] > sups[2]
        assert sups[2] < 1e-7

    def test_nondecreasing_over_full_domain(self, table1_book):
        rng = np.random.default_rng(5)
        for book in [table1_book] + [random_book(rng) for _ in range(50)]:
            r = impact_curve(book)
            full = np.concatenate([r.bid_r[::-1], r.ask_r])
            assert np.all(np.diff(full) >= 0)

    def test_empty_side(self, table1_book):
        with pytest.raises(EmptySideError):
            impact_curve(OrderBook(bids=(), asks=table1_book.asks))


class TestPhiFromBeta:
    def test_perfectly_liquid(self):
        assert phi_from_beta(0.0, 0.0, 5.0) == 5.0
        assert phi_from_beta(0.0, 0.0, -5.0) == -5.0

    def test_positive_side_against_quadrature(self):
        expected, _ = quad(lambda z: math.exp(0.2 * z), 0.0, 1.0)
        assert phi_from_beta(0.0, 0.2, 1.0) == pytest.approx(expected, rel=1e-12)
        assert phi_from_beta(0.0, 0.2, 1.0) == pytest.approx(1.107014, abs=5e-7)

    def test_negative_side_against_quadrature(self):
        expected = -quad(lambda z: math.exp(-0.3 * z), 0.0, 1.0)[0]
        assert phi_from_beta(0.3, 0.0, -1.0) == pytest.approx(expected, rel=1e-12)
        assert phi_from_beta(0.3, 0.0, -1.0) == pytest.approx(-0.863939, abs=5e-7)

    def test_negative_beta_rejected(self):
        with pytest.raises(NegativeBetaError):
            phi_from_beta(-0.1, 0.2, 1.0)

    @given(
        bm=st.floats(0, 2),
        bp=st.floats(0, 2),
        h=st.floats(-10, 10),
    )
    def test_phi_dominates_identity(self, bm, bp, h):
        assert phi_from_beta(bm, bp, h) >= h - 1e-12 * abs(h)


class TestLiquidityCostFunction:
    def test_cost_identity_table1(self, table1_book):
        # cash cost of x shares equals the curve integral at h = mid * x
        phi = LiquidityCostFunction.from_curve(impact_curve(table1_book))
        mid = float(mid_price(table1_book))
        for x in (1, 100, 20800, 20801, 36300, 42700, -140, -6040, -36440, -61140):
            exact = float(total_cost(table1_book, x))
            assert phi(mid * x) == pytest.approx(exact, rel=1e-9)

    def test_cost_identity_random_books(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            book = random_book(rng)
            phi = LiquidityCostFunction.from_curve(impact_curve(book))
            mid = float(mid_price(book))
            depth_a, depth_b = book.depth("ask"), book.depth("bid")
            for x in {1, depth_a // 2, depth_a, -1, -(depth_b // 2), -depth_b}:
                if x == 0:
                    continue
                exact = float(total_cost(book, x))
                assert phi(mid * x) == pytest.approx(exact, rel=1e-9)

    def test_phi_at_zero(self, table1_book):
        assert LiquidityCostFunction.from_curve(impact_curve(table1_book))(0.0) == 0.0

    def test_phi_dominates_identity_book(self, table1_book):
        phi = LiquidityCostFunction.from_curve(impact_curve(table1_book))
        curve = impact_curve(table1_book)
        for h in np.linspace(curve.h_min, curve.h_max, 41):
            assert phi(float(h)) >= float(h) - 1e-9 * abs(h)

    def test_convexity(self, table1_book):
        phi = LiquidityCostFunction.from_curve(impact_curve(table1_book))
        curve = impact_curve(table1_book)
        hs = np.linspace(curve.h_min, curve.h_max, 101)
        vals = np.array([phi(float(h)) for h in hs])
        slopes = np.diff(vals) / np.diff(hs)
        assert np.all(np.diff(slopes) >= -1e-12)

    def test_from_betas_matches_phi_from_beta(self):
        phi = LiquidityCostFunction.from_betas(0.3, 0.2)
        for h in (-2.0, -0.5, 0.0, 0.5, 2.0):
            assert phi(h) == phi_from_beta(0.3, 0.2, h)


class TestScalingInvariance:
    def test_split_leaves_impact_curve_invariant(self, table1_book):
        # doubling prices and halving quantities leaves the curve in
        # mark-to-market coordinates (and hence the fitted slopes) unchanged
        lam = 2
        scaled = OrderBook(
            bids=[PriceLevel(l.price * lam, l.quantity // lam) for l in table1_book.bids],
            asks=[PriceLevel(l.price * lam, l.quantity // lam) for l in table1_book.asks],
        )
        r0, r1 = impact_curve(table1_book), impact_curve(scaled)
        np.testing.assert_allclose(r1.ask_h, r0.ask_h, rtol=1e-12)
        np.testing.assert_allclose(r1.bid_h, r0.bid_h, rtol=1e-12)
        np.testing.assert_allclose(r1.ask_r, r0.ask_r, rtol=0, atol=1e-15)
        np.testing.assert_allclose(r1.bid_r, r0.bid_r, rtol=0, atol=1e-15)


class TestSnapshotCsv:
    def test_round_trip(self, table1_book, tmp_path):
        path = tmp_path / "book.csv"
        write_snapshot_csv(table1_book, path)
        assert read_snapshot_csv(path) == OrderBook(
            bids=table1_book.bids, asks=table1_book.asks
        )
        header = path.read_text().splitlines()[0]
        assert header == "side,price,quantity"

    def test_rejects_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("price,side,quantity\n")
        with pytest.raises(ValueError, match="header"):
            read_snapshot_csv(path)
