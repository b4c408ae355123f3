"""Time-series containers, summary statistics, and preprocessing transforms.

Time steps are indexed t = 1..T throughout the toolkit; arrays are 0-based,
so ``values[i]`` holds the observation at t = i + 1. A change point at
location c means the mean jumps between steps c and c + 1, which is why
containers insist on T >= 3: at least one interior location must exist.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import NegativeCountError, NoVarianceError, ValidationError

ArrayLike = Union[Sequence[float], np.ndarray]


def _frozen_array(values, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.ndim != ndim:
        raise ValidationError(f"expected a {ndim}-d array of values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = np.argwhere(~np.isfinite(arr))[0]
        raise ValidationError(f"non-finite value at index {tuple(int(i) for i in bad)}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A univariate series of T real observations, immutable once built."""

    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values, ndim=1)
        if arr.size < 3:
            raise ValidationError(f"series length {arr.size} < 3; no interior point exists")
        object.__setattr__(self, "values", arr)

    @property
    def T(self) -> int:
        return self.values.size

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True, eq=False)
class MultiSeries:
    """N covariate series of common length T, stored as a (T, N) array."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr[:, None]
        arr = _frozen_array(arr, ndim=2)
        if arr.shape[0] < 3:
            raise ValidationError(f"series length {arr.shape[0]} < 3; no interior point exists")
        if arr.shape[1] < 1:
            raise ValidationError("at least one covariate is required")
        object.__setattr__(self, "values", arr)

    @classmethod
    def from_columns(cls, columns: Iterable[TimeSeries]) -> "MultiSeries":
        cols = [c.values if isinstance(c, TimeSeries) else np.asarray(c, dtype=float) for c in columns]
        lengths = {len(c) for c in cols}
        if len(lengths) > 1:
            raise ValidationError(f"columns differ in length: {sorted(lengths)}")
        return cls(np.column_stack(cols))

    @property
    def T(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def column(self, n: int) -> TimeSeries:
        return TimeSeries(self.values[:, n])

    @property
    def columns(self) -> tuple[TimeSeries, ...]:
        return tuple(self.column(n) for n in range(self.N))


def _values_1d(series) -> np.ndarray:
    """Coerce a TimeSeries or array-like into a validated 1-d float array."""
    if isinstance(series, TimeSeries):
        return series.values
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValidationError(f"expected a 1-d non-empty series, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("series contains non-finite values")
    return arr


def arithmetic_mean(series) -> float:
    """Mean (1/T) * sum of the observations."""
    return float(np.mean(_values_1d(series)))


def autocorrelation(series, lag: int) -> float:
    """Sample autocorrelation at the given lag.

    Uses the biased estimator (both autocovariances divided by T, which
    cancels), with deviations taken from the series mean; lag 0 would equal
    1 by construction. Requires 1 <= lag <= T - 2.

    Raises NoVarianceError on a constant series so callers can tell "no
    dependence" apart from "no information".
    """
    x = _values_1d(series)
    T = x.size
    lag = int(lag)
    if not 1 <= lag <= T - 2:
        raise ValidationError(f"lag must satisfy 1 <= lag <= T-2 = {T - 2}, got {lag}")
    dev = x - np.mean(x)
    denom = float(np.dot(dev, dev))
    if denom == 0.0:
        raise NoVarianceError("no variance: series is constant")
    num = float(np.dot(dev[:-lag], dev[lag:]))
    return num / denom


def sqrt_transform(series):
    """Element-wise square root of non-negative (count) data.

    Accepts a MultiSeries, TimeSeries, or array-like and returns the same
    kind. Any negative entry raises NegativeCountError naming the offending
    position (t is 1-based).
    """
    if isinstance(series, MultiSeries):
        arr = series.values
    elif isinstance(series, TimeSeries):
        arr = series.values
    else:
        arr = np.asarray(series, dtype=np.float64)
    neg = np.argwhere(arr < 0)
    if neg.size:
        first = neg[0]
        t = int(first[0]) + 1
        if arr.ndim == 2:
            raise NegativeCountError(
                f"negative count {arr[tuple(first)]} at t={t}, covariate {int(first[1]) + 1}"
            )
        raise NegativeCountError(f"negative count {arr[tuple(first)]} at t={t}")
    out = np.sqrt(arr)
    if isinstance(series, MultiSeries):
        return MultiSeries(out)
    if isinstance(series, TimeSeries):
        return TimeSeries(out)
    return out
