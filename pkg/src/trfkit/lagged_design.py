"""Time-lagged design matrices for deconvolution-style regression.

A lag window [tmin_s, tmax_s] maps to the contiguous integer lag range
round(tmin*fs) .. round(tmax*fs) inclusive. Column i*L + l of the design
matrix holds feature i delayed by lag_samples[l]: entry [t, i*L + l] is
x[t - lag_samples[l], i], with zeros where the shift runs off either end
of the series. Columns are feature-major so each feature owns one
contiguous block of L lag columns.
"""

from dataclasses import dataclass

import numpy as np

from ._util import round_half_up
from .errors import PreconditionError
from .preprocess import FeatureSeries

__all__ = ["LagSpec", "DesignMatrix", "lag_range_to_samples", "build_lagged_matrix"]


@dataclass
class LagSpec:
    """Contiguous integer lag range tied to a sampling rate."""

    tmin_s: float
    tmax_s: float
    fs_hz: float
    lag_samples: list[int]

    def __post_init__(self):
        if not (self.fs_hz > 0):
            raise PreconditionError(f"fs_hz must be positive, got {self.fs_hz}")
        if not (self.tmin_s < self.tmax_s):
            raise PreconditionError(
                f"tmin_s must be below tmax_s, got [{self.tmin_s}, {self.tmax_s}]"
            )
        lags = list(self.lag_samples)
        if not lags:
            raise PreconditionError("lag_samples is empty")
        if lags != list(range(lags[0], lags[-1] + 1)):
            raise PreconditionError("lag_samples must be contiguous and increasing")
        self.lag_samples = lags

    @property
    def n_lags(self) -> int:
        return len(self.lag_samples)

    def lag_times_s(self) -> list[float]:
        return [lag / self.fs_hz for lag in self.lag_samples]


@dataclass
class DesignMatrix:
    """Lagged expansion of a feature series; columns are feature-major."""

    data: np.ndarray
    lag_spec: LagSpec
    n_features: int

    def __post_init__(self):
        expected = self.lag_spec.n_lags * self.n_features
        if self.data.ndim != 2 or self.data.shape[1] != expected:
            raise PreconditionError(
                f"design matrix must have {expected} columns "
                f"({self.n_features} features x {self.lag_spec.n_lags} lags), "
                f"got shape {self.data.shape}"
            )


def lag_range_to_samples(tmin_s: float, tmax_s: float, fs_hz: float) -> LagSpec:
    """Convert a lag window in seconds to an inclusive integer sample range."""
    if not (fs_hz > 0):
        raise PreconditionError(f"fs_hz must be positive, got {fs_hz}")
    if not (tmin_s < tmax_s):
        raise PreconditionError(f"tmin_s must be below tmax_s, got [{tmin_s}, {tmax_s}]")
    first = round_half_up(tmin_s * fs_hz)
    last = round_half_up(tmax_s * fs_hz)
    if last < first:  # cannot happen with tmin < tmax, kept as a guard
        raise PreconditionError(f"empty lag range [{first}, {last}]")
    return LagSpec(
        tmin_s=tmin_s,
        tmax_s=tmax_s,
        fs_hz=fs_hz,
        lag_samples=list(range(first, last + 1)),
    )


def build_lagged_matrix(x: FeatureSeries, spec: LagSpec) -> DesignMatrix:
    """Expand a feature series into its lagged design matrix.

    Zero padding at the edges: a positive lag looks into the past, so the
    first `lag` rows of that column are zero; a negative lag looks into
    the future and zeros the tail.
    """
    if x.fs_hz != spec.fs_hz:
        raise PreconditionError(
            f"sampling rates differ: series {x.fs_hz} vs lag spec {spec.fs_hz}"
        )
    T, D = x.data.shape
    L = spec.n_lags
    out = np.zeros((T, D * L))
    cols = np.arange(D) * L
    for li, lag in enumerate(spec.lag_samples):
        if lag >= T or lag <= -T:
            continue  # shift leaves nothing inside the window
        if lag >= 0:
            out[lag:, cols + li] = x.data[: T - lag]
        else:
            out[: T + lag, cols + li] = x.data[-lag:]
    return DesignMatrix(data=out, lag_spec=spec, n_features=D)
