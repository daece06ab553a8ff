"""Reduced-form limit order book modeling.

Order book reconstruction and liquidity-curve math, least-squares
liquidity factors, intraday deseasonalization, exact-discretization
calibration of a three-factor linear SDE, and resiliency analysis via
impulse responses, plus a synthetic-data generator with known ground
truth.
"""

from .book import (
    ImpactCurve,
    LiquidityCostFunction,
    MarginalPriceCurve,
    OrderBook,
    PriceLevel,
    impact_curve,
    mid_price,
    phi_from_beta,
    total_cost,
)
from .builder import BookState, OrderEvent, Trade, apply_event, sample_books, snapshot
from .calibrate import (
    CalibrationResult,
    DiscreteParams,
    SdeParams,
    StateSeries,
    calibrate,
    calibrate_model1,
    estimate_discrete,
    exact_discretization,
    recover_continuous,
)
from .dynamics import (
    ImpulseSpec,
    ResponsePath,
    equilibrium,
    impulse_response,
    model_autocovariance,
    simulate,
    stationary_covariance,
)
from .impact import FitConfig, ImpactObservation, cutoffs_from_levels, extract_series, fit_beta
from .matfun import covariance_map, drift_integral, expm, invert_covariance_map, logm
from .seasonal import SeasonalProfile, autocovariance, deseasonalize, fit_profile
from .synth import SynthConfig, book_from_state, generate
from .timegrid import TradingWindow

__version__ = "0.1.0"
