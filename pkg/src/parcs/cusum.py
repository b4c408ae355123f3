"""CUSUM transformation, locator statistic, and the segmentation baseline.

The CUSUM curve y_t = sum_{tau<=t} (x_tau - <x>) turns a step in the mean
into a slope change, so a single change point shows up as the extremum of
|y|. ``locate`` implements the gamma-weighted locator (gamma = 0 is the
plain cumulative-sum maximum, gamma = 0.5 the ML variant), ``amoc_detect``
wraps it in a block-permutation significance test, and
``binary_segmentation`` extends it to multiple change points by recursive
partitioning.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ValidationError
from .series import TimeSeries, _values_1d


@dataclass(frozen=True, eq=False)
class CusumCurve:
    """Cumulative sum of differences to the mean, plus that mean for inversion.

    Curves produced by ``cusum_transform`` end at (numerically) zero; fitted
    or residual curves passed to ``invert_cusum`` need not.
    """

    y: np.ndarray
    source_mean: float

    def __post_init__(self):
        arr = np.asarray(self.y, dtype=np.float64)
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError(f"curve must be a 1-d sequence, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("curve contains non-finite values")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "y", arr)
        object.__setattr__(self, "source_mean", float(self.source_mean))

    @property
    def T(self) -> int:
        return self.y.size


@dataclass(frozen=True)
class LocatorConfig:
    """gamma in [0, 0.5] controls down-weighting of central locations."""

    gamma: float = 0.0

    def __post_init__(self):
        g = float(self.gamma)
        if not 0.0 <= g <= 0.5:
            raise ValidationError(f"gamma must lie in [0, 0.5], got {g}")
        object.__setattr__(self, "gamma", g)


def cusum_transform(series) -> CusumCurve:
    """y_t = sum_{tau=1}^{t} (x_tau - <x>); the last element vanishes up to rounding."""
    x = _values_1d(series)
    mean = float(np.mean(x))
    return CusumCurve(np.cumsum(x - mean), mean)


def invert_cusum(curve: CusumCurve) -> TimeSeries:
    """Recover x_t = y_t - y_{t-1} + <x>, with y_0 defined as 0."""
    y = curve.y
    x = np.empty_like(y)
    x[0] = y[0]
    x[1:] = np.diff(y)
    return TimeSeries(x + curve.source_mean)


def _location_weights(T: int, gamma: float) -> np.ndarray:
    """(T/(t(T-t)))^gamma for t = 1..T-1."""
    t = np.arange(1.0, T)
    if gamma == 0.0:
        return np.ones(T - 1)
    return (T / (t * (T - t))) ** gamma


def _cusum_rows(rows: np.ndarray) -> np.ndarray:
    dev = rows - rows.mean(axis=1, keepdims=True)
    return np.cumsum(dev, axis=1)


def _max_weighted_stat_rows(curves: np.ndarray, gamma: float) -> np.ndarray:
    """Row-wise maximum of the gamma-weighted |y_t| over interior t."""
    T = curves.shape[1]
    stats = np.abs(curves[:, : T - 1]) * _location_weights(T, gamma)
    return stats.max(axis=1)


def locate(series, config: LocatorConfig = LocatorConfig()) -> tuple[int, float]:
    """Locate the candidate change point.

    Returns (c_hat, S): the 1-based location maximising the gamma-weighted
    absolute CUSUM over 0 < t < T (ties broken by smallest t), and the
    maximised statistic.
    """
    curve = cusum_transform(series)
    T = curve.T
    stats = np.abs(curve.y[: T - 1]) * _location_weights(T, config.gamma)
    i = int(np.argmax(stats))
    return i + 1, float(stats[i])


def estimate_step(series, c_hat: int) -> tuple[float, float]:
    """Baseline and step weight from the means before and after c_hat."""
    x = _values_1d(series)
    c = int(c_hat)
    if not 1 <= c <= x.size - 1:
        raise ValidationError(f"c_hat must satisfy 1 <= c_hat <= T-1 = {x.size - 1}, got {c}")
    b_hat = float(np.mean(x[:c]))
    w_hat = float(np.mean(x[c:])) - b_hat
    return b_hat, w_hat


def step_mean_estimate(series, cps) -> np.ndarray:
    """Piecewise-constant mean built from segment means between sorted CPs."""
    x = _values_1d(series)
    bounds = [0] + sorted(int(c) for c in cps) + [x.size]
    out = np.empty_like(x)
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        if hi > lo:
            out[lo:hi] = np.mean(x[lo:hi])
    return out


def amoc_detect(series, config, boot, rng):
    """At-most-one-change detection with a block-permutation bootstrap test.

    Locates c_hat and its statistic S, strips the estimated step to get an
    H0-conform series, and accepts c_hat iff S reaches the empirical
    (1 - alpha) quantile of the statistic over block-permuted surrogates.
    The same gamma weighs both the observed and the bootstrap statistics.
    """
    from . import inference

    x = _values_1d(series)
    T = x.size
    c_hat, S = locate(x, config)
    b_hat, w_hat = estimate_step(x, c_hat)
    x0 = x.copy()
    x0[c_hat:] -= w_hat

    diagnostics = []
    k, q = inference.resolve_block_size(x0[:, None], boot, diagnostics)
    inference.check_block_feasibility(T, k)

    gen = rng.generator(0)
    idx = inference.block_permutation_indices(T, k, boot.B, gen)
    samples = _max_weighted_stat_rows(_cusum_rows(x0[idx]), config.gamma)

    edf = inference.Edf(samples)
    threshold = inference.edf_inverse(edf, boot.alpha)
    p = inference.edf_p_value(edf, S)
    floor = inference.statistic_floor(x) * T
    significant = S >= threshold and S > floor
    if S >= threshold and not significant:
        diagnostics.append(f"statistic {S} at or below numerical floor {floor}; not significant")

    cp = inference.CpTest(location=c_hat, rank=1, statistic=S, p_value=p, step_weights=(w_hat,))
    return inference.SignificanceResult(
        accepted=(cp,) if significant else (),
        rejected=() if significant else (cp,),
        estimated_q=q,
        reconstructed_model=None,
        diagnostics=tuple(diagnostics),
    )


def binary_segmentation(series, config, boot, max_depth, rng):
    """Recursive AMOC detection: partition at each accepted CP, re-test segments.

    max_depth counts partitioning rounds, so max_depth = 1 tests the full
    series plus the two segments around a first detection (at most three
    CPs). Segments too short for the block configuration are skipped and
    flagged rather than tested. Detected locations are reported in
    original-series coordinates, ranked by discovery order.
    """
    from . import inference

    if int(max_depth) < 1:
        raise ValidationError(f"max_depth must be >= 1, got {max_depth}")
    x = _values_1d(series)
    T = x.size

    accepted: list = []
    rejected: list = []
    diagnostics: list[str] = []
    root_q: Optional[int] = None

    queue: list[tuple[int, int, int]] = [(0, T, 0)]
    while queue:
        lo, hi, depth = queue.pop(0)
        seg = x[lo:hi]
        seg_len = hi - lo
        k_min = boot.block_size if isinstance(boot.block_size, int) else 1
        if seg_len < max(3, 2 * k_min, inference.min_length_for_blocks(k_min)):
            diagnostics.append(f"segment [{lo + 1},{hi}] skipped: length {seg_len} too short to test")
            continue
        try:
            res = amoc_detect(seg, config, boot, rng.substream(lo, hi))
        except inference.InfeasibleBlocksError as exc:
            diagnostics.append(f"segment [{lo + 1},{hi}] skipped: {exc}")
            continue
        if lo == 0 and hi == T:
            root_q = res.estimated_q
        diagnostics.extend(f"segment [{lo + 1},{hi}]: {d}" for d in res.diagnostics)
        if res.accepted:
            cp = res.accepted[0]
            c_global = lo + cp.location
            accepted.append(
                inference.CpTest(
                    location=c_global,
                    rank=len(accepted) + 1,
                    statistic=cp.statistic,
                    p_value=cp.p_value,
                    step_weights=cp.step_weights,
                )
            )
            if depth < max_depth:
                queue.append((lo, c_global, depth + 1))
                queue.append((c_global, hi, depth + 1))
        else:
            cp = res.rejected[0]
            rejected.append(
                inference.CpTest(
                    location=lo + cp.location,
                    rank=0,
                    statistic=cp.statistic,
                    p_value=cp.p_value,
                    step_weights=cp.step_weights,
                )
            )

    return inference.SignificanceResult(
        accepted=tuple(accepted),
        rejected=tuple(rejected),
        estimated_q=root_q,
        reconstructed_model=None,
        diagnostics=tuple(diagnostics),
    )
