"""Liquidity-factor extraction: exact projections, cutoffs, series."""

import math
from decimal import Decimal

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from lobkit import FitConfig, OrderBook, PriceLevel, cutoffs_from_levels, fit_beta, impact_curve
from lobkit.book import ImpactCurve
from lobkit.errors import DegenerateWindowError, EmptySideError
from lobkit.impact import (
    BETA_FLOOR,
    ImpactObservation,
    extract_series,
    read_observations_csv,
    write_observations_csv,
)
from lobkit.timegrid import parse_iso_ns

from conftest import random_book

# Frozen regression values for the example book at depth 10, computed with
# an independent piecewise-trapezoid oracle (agreement <= 1e-10 relative;
# see test_matches_quadrature_oracle).
TABLE1_BETA_PLUS = 2.36789166572903496e-10
TABLE1_BETA_MINUS = 2.29761671762640057e-10
TABLE1_BETA = 2.31547306866573642e-10


def synthetic_curve(ask_vals, bid_vals, ask_h=None, bid_h=None, mid=100.0):
    ask_vals = np.asarray(ask_vals, dtype=float)
    bid_vals = np.asarray(bid_vals, dtype=float)
    n_a, n_b = len(ask_vals), len(bid_vals)
    ask_h = np.linspace(1, n_a, n_a) if ask_h is None else np.asarray(ask_h, float)
    bid_h = -np.linspace(1, n_b, n_b) if bid_h is None else np.asarray(bid_h, float)
    return ImpactCurve(mid=mid, ask_h=ask_h, ask_r=ask_vals, bid_h=bid_h, bid_r=bid_vals)


def trapezoid_oracle(curve, h_minus, h_plus):
    """Independent integration of h*r over the window: dense trapezoid
    grids inside each constant piece (exact for step functions)."""
    def side(h_breaks, r_vals, lo, hi, ascending):
        num = 0.0
        if ascending:
            prev = lo
            for hk, rk in zip(h_breaks, r_vals):
                if hk <= lo:
                    continue
                top = min(float(hk), hi)
                xs = np.linspace(prev, top, 2001)
                num += np.trapezoid(xs * rk, xs)
                prev = top
                if top >= hi:
                    break
        else:
            prev = hi
            for hk, rk in zip(h_breaks, r_vals):
                if hk >= hi:
                    continue
                bot = max(float(hk), lo)
                xs = np.linspace(bot, prev, 2001)
                num += np.trapezoid(xs * rk, xs)
                prev = bot
                if bot <= lo:
                    break
        return num

    num_p = side(curve.ask_h, curve.ask_r, 0.0, h_plus, True)
    num_m = side(curve.bid_h, curve.bid_r, h_minus, 0.0, False)
    den_p = h_plus**3 / 3.0
    den_m = -(h_minus**3) / 3.0
    return num_p / den_p, num_m / den_m, (num_p + num_m) / (den_p + den_m)


class TestFitBeta:
    def test_flat_curve_gives_zero(self):
        curve = synthetic_curve([0, 0, 0], [0, 0, 0])
        fit = fit_beta(curve, FitConfig(depth_levels=3))
        assert fit == (0.0, 0.0, 0.0)

    def test_projection_of_linear_curve_recovers_slope(self):
        # step curve sampling r(h) = 0.5 h at piece midpoints on [-1, 1]
        n = 1000
        edges = np.linspace(0, 1, n + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        curve = synthetic_curve(0.5 * mids, -0.5 * mids, ask_h=edges[1:], bid_h=-edges[1:])
        fit = fit_beta(curve, FitConfig(depth_levels=n))
        assert fit.beta == pytest.approx(0.5, abs=1e-3)
        assert fit.beta_plus == pytest.approx(0.5, abs=1e-3)
        assert fit.beta_minus == pytest.approx(0.5, abs=1e-3)

    def test_table1_frozen_regression(self, table1_book):
        fit = fit_beta(impact_curve(table1_book), FitConfig(depth_levels=10))
        assert fit.beta_plus == pytest.approx(TABLE1_BETA_PLUS, rel=1e-12)
        assert fit.beta_minus == pytest.approx(TABLE1_BETA_MINUS, rel=1e-12)
        assert fit.beta == pytest.approx(TABLE1_BETA, rel=1e-12)

    def test_matches_quadrature_oracle(self, table1_book):
        curve = impact_curve(table1_book)
        h_minus, h_plus = cutoffs_from_levels(table1_book, 10)
        bp, bm, beta = trapezoid_oracle(curve, h_minus, h_plus)
        fit = fit_beta(curve, FitConfig(depth_levels=10))
        assert fit.beta_plus == pytest.approx(bp, rel=1e-10)
        assert fit.beta_minus == pytest.approx(bm, rel=1e-10)
        assert fit.beta == pytest.approx(beta, rel=1e-10)

    def test_matches_brute_force_argmin(self):
        # golden-section minimization of the exact objective
        # integral of (r - beta h)^2 over the window
        rng = np.random.default_rng(31)
        for _ in range(10):
            n = int(rng.integers(2, 8))
            ask = np.cumsum(rng.uniform(0.001, 0.02, n))
            bid = -np.cumsum(rng.uniform(0.001, 0.02, n))
            curve = synthetic_curve(ask, bid)
            window = (-float(n), float(n))

            def objective(beta):
                total = 0.0
                for hk, rk, prev in zip(curve.ask_h, curve.ask_r,
                                        np.concatenate([[0], curve.ask_h[:-1]])):
                    xs = np.linspace(prev, hk, 800)
                    total += np.trapezoid((rk - beta * xs) ** 2, xs)
                for hk, rk, prev in zip(curve.bid_h, curve.bid_r,
                                        np.concatenate([[0], curve.bid_h[:-1]])):
                    xs = np.linspace(hk, prev, 800)
                    total += np.trapezoid((rk - beta * xs) ** 2, xs)
                return total

            brute = minimize_scalar(objective, bracket=(0.0, 0.1), method="golden",
                                    options={"xtol": 1e-12}).x
            fit = fit_beta(curve, FitConfig(cutoffs=window))
            assert fit.beta == pytest.approx(brute, abs=1e-8)

    def test_ask_steeper_implies_beta_plus_larger(self):
        rng = np.random.default_rng(77)
        for _ in range(25):
            n = int(rng.integers(2, 8))
            bid = np.cumsum(rng.uniform(0.001, 0.01, n))
            ask = bid + rng.uniform(0.0005, 0.01, n)  # pointwise steeper ask
            curve = synthetic_curve(ask, -bid)
            fit = fit_beta(curve, FitConfig(depth_levels=n))
            assert fit.beta_plus >= fit.beta_minus

    def test_explicit_cutoffs_clamped_to_depth(self):
        curve = synthetic_curve([0.01, 0.02], [-0.01, -0.02])
        wide = fit_beta(curve, FitConfig(cutoffs=(-100.0, 100.0)))
        full = fit_beta(curve, FitConfig(depth_levels=2))
        assert wide == full

    def test_degenerate_cutoffs_rejected(self):
        with pytest.raises(ValueError):
            FitConfig(cutoffs=(1.0, 2.0))
        with pytest.raises(ValueError):
            FitConfig(depth_levels=0)


class TestCutoffs:
    def test_single_level_book(self):
        book = OrderBook(
            bids=[PriceLevel(Decimal(99), 100)],
            asks=[PriceLevel(Decimal(101), 100)],
        )
        h_minus, h_plus = cutoffs_from_levels(book, 10)
        assert h_plus == pytest.approx(10_000.0)
        assert h_minus == pytest.approx(-10_000.0)

    def test_table1_depth_one(self, table1_book):
        _, h_plus = cutoffs_from_levels(table1_book, 1)
        assert h_plus == pytest.approx(238.875 * 20800)

    def test_depth_zero_rejected(self, table1_book):
        with pytest.raises(ValueError):
            cutoffs_from_levels(table1_book, 0)

    def test_empty_side(self, table1_book):
        with pytest.raises(EmptySideError):
            cutoffs_from_levels(OrderBook(asks=table1_book.asks), 10)


class TestExtractSeries:
    def test_empty_input(self):
        assert extract_series([]) == ([], [])

    def test_preserves_timestamps(self, table1_book):
        snaps = [(100 + k, table1_book) for k in range(5)]
        obs, skipped = extract_series(snaps)
        assert skipped == []
        assert [o.timestamp for o in obs] == [100, 101, 102, 103, 104]
        assert all(o.mid == pytest.approx(238.875) for o in obs)

    def test_one_sided_book_skipped_with_record(self, table1_book):
        lame = OrderBook(asks=table1_book.asks)
        snaps = [(1, table1_book), (2, lame), (3, table1_book)]
        obs, skipped = extract_series(snaps)
        assert len(obs) == 2 and len(skipped) == 1
        assert skipped[0].timestamp == 2

    def test_zero_slope_clamped_and_flagged(self, table1_book, monkeypatch):
        from lobkit import impact as impact_mod

        monkeypatch.setattr(
            impact_mod, "fit_beta", lambda curve, config: impact_mod.BetaFit(0.0, 0.0, 0.0)
        )
        obs, _ = impact_mod.extract_series([(1, table1_book)])
        assert obs[0].clamped
        assert obs[0].beta_minus == BETA_FLOOR
        assert obs[0].beta_plus == BETA_FLOOR


class TestObservationsCsv:
    def _obs(self):
        base = parse_iso_ns("2005-01-12T10:00:00")
        return [
            ImpactObservation(base, 238.875, 2.2976167176264006e-10,
                              2.367891665729035e-10, 2.3154730686657364e-10),
            ImpactObservation(base + 600_000_000_000, 239.0, 1e-10, 2e-10, 1.5e-10),
        ]

    def test_round_trip_full_precision(self, tmp_path):
        path = tmp_path / "obs.csv"
        write_observations_csv(self._obs(), path)
        back, deseasonalized = read_observations_csv(path)
        assert not deseasonalized
        assert back == self._obs()
        assert path.read_text().splitlines()[0] == "ts,mid,beta_minus,beta_plus,beta"

    def test_deseasonalized_marker(self, tmp_path):
        path = tmp_path / "obs.csv"
        write_observations_csv(self._obs(), path, deseasonalized=True)
        assert path.read_text().startswith("# deseasonalized: true\n")
        back, deseasonalized = read_observations_csv(path)
        assert deseasonalized and back == self._obs()


class TestScalingInvariance:
    def test_stock_split_leaves_betas_invariant(self):
        rng = np.random.default_rng(13)
        for _ in range(20):
            book = random_book(rng)
            # force even quantities so the split quantity stays integral
            book = OrderBook(
                bids=[PriceLevel(l.price, 2 * l.quantity) for l in book.bids],
                asks=[PriceLevel(l.price, 2 * l.quantity) for l in book.asks],
            )
            split = OrderBook(
                bids=[PriceLevel(l.price * 2, l.quantity // 2) for l in book.bids],
                asks=[PriceLevel(l.price * 2, l.quantity // 2) for l in book.asks],
            )
            f0 = fit_beta(impact_curve(book), FitConfig(depth_levels=10))
            f1 = fit_beta(impact_curve(split), FitConfig(depth_levels=10))
            assert f1.beta == pytest.approx(f0.beta, rel=1e-11)
            assert f1.beta_minus == pytest.approx(f0.beta_minus, rel=1e-11)
            assert f1.beta_plus == pytest.approx(f0.beta_plus, rel=1e-11)
