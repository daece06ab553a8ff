"""Exception hierarchy shared by all lobkit modules.

Every error raised by the library derives from :class:`LobkitError`, so
callers (and the CLI) can catch one base class and map the concrete type
to a machine-readable code.
"""

from __future__ import annotations


class LobkitError(Exception):
    """Base class for all lobkit errors."""

    @property
    def code(self) -> str:
        return f"{self.__class__.__module__}.{self.__class__.__name__}"


# --- order book / curve math ------------------------------------------------

class EmptySideError(LobkitError):
    """An operation required price levels on a side that has none."""


class InsufficientDepthError(LobkitError):
    """A market order exceeds the resting depth on the relevant side."""

    def __init__(self, requested, max_fillable, side: str):
        super().__init__(
            f"order for {requested} shares exceeds {side} depth; "
            f"at most {max_fillable} fillable"
        )
        self.requested = requested
        self.max_fillable = max_fillable
        self.side = side


class NegativeBetaError(LobkitError):
    """Liquidity slope parameters must be nonnegative."""


# --- book building ----------------------------------------------------------

class UnknownOrderIdError(LobkitError):
    """Cancel/Modify/Execute referenced an order id not resting in the book."""


class CrossedBookCorruptionError(LobkitError):
    """Internal consistency failure: best bid >= best ask after an event."""


class OutOfOrderEventError(LobkitError):
    """Event stream is not time-ordered."""

    def __init__(self, timestamp_ns: int):
        super().__init__(f"event at {timestamp_ns} ns arrived out of order")
        self.timestamp_ns = timestamp_ns


# --- impact fitting ---------------------------------------------------------

class EmptyWindowError(LobkitError):
    """The fit window contains no step pieces on a required side."""


class DegenerateWindowError(LobkitError):
    """A fit cutoff collapsed to zero (no window to integrate over)."""


# --- seasonality ------------------------------------------------------------

class SparseBucketError(LobkitError):
    """An intraday bucket has fewer than two observations."""

    def __init__(self, bucket: int, count: int):
        super().__init__(f"bucket {bucket} has only {count} observation(s)")
        self.bucket = bucket
        self.count = count


class UncoveredHourError(LobkitError):
    """An observation falls outside the buckets of the supplied profile."""


class SeriesTooShortError(LobkitError):
    """Series shorter than the requested maximum lag."""


# --- matrix functions -------------------------------------------------------

class SingularInputError(LobkitError):
    """Matrix logarithm of a (numerically) singular matrix."""


class NonPrincipalBranchError(LobkitError):
    """No real principal logarithm: an eigenvalue lies on the closed
    negative real axis, so the discrete transition is incompatible with a
    real continuous-time generator."""


class NotPSDError(LobkitError):
    """A matrix required to be symmetric positive semidefinite is not."""


class MapSingularError(LobkitError):
    """The finite-horizon covariance map is not invertible."""


class IndefiniteResultError(LobkitError):
    """Recovered diffusion covariance has a materially negative eigenvalue,
    signalling model misspecification."""


# --- calibration ------------------------------------------------------------

class TooFewPairsError(LobkitError):
    """Not enough valid transition pairs for least squares."""

    def __init__(self, n_pairs: int, minimum: int):
        super().__init__(f"{n_pairs} transition pairs; need at least {minimum}")
        self.n_pairs = n_pairs
        self.minimum = minimum


class CollinearRegressorsError(LobkitError):
    """Design matrix is rank deficient (e.g. a constant state component)."""


# --- dynamics ---------------------------------------------------------------

class SingularDriftError(LobkitError):
    """Drift matrix is singular: the model has no unique equilibrium."""


class NotStableError(LobkitError):
    """An eigenvalue of the drift matrix has nonnegative real part."""


# --- synthetic data ---------------------------------------------------------

class DegenerateTicksError(LobkitError):
    """Tick grid too coarse for the requested book (spread under one tick
    or non-monotone level prices after rounding)."""


# --- CLI --------------------------------------------------------------------

class ConfigError(LobkitError):
    """Invalid pipeline configuration."""


class IoError(LobkitError):
    """File could not be read or written."""
