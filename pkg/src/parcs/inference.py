"""Significance machinery: MA order estimation, block permutation, bootstrap tests.

The null distribution of a change-point statistic is estimated by removing
all modelled steps from the series, splitting the residual series into
consecutive blocks of size k, and re-evaluating the statistic on randomly
re-ordered blocks. Blocks of size k = q + 1 preserve the temporal
dependence of an MA(q) noise process; q itself is read off the residual
series' autocorrelation function against its asymptotic normal law with
mean -1/(T - tau) and variance 1/(T - tau).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import norm

from .cusum import CusumCurve
from .errors import InfeasibleBlocksError, NoVarianceError, ValidationError
from .model import (
    ParcsModel,
    RANK_RCOND,
    curves_of,
    design_matrix,
    fit_coefficients,
    _as_multiseries,
    _solve_min_norm,
)
from .series import TimeSeries, autocorrelation, _values_1d
from .synth import RngSpec

MIN_BLOCKS = 5

AUTO = "auto"


@dataclass(frozen=True)
class BootstrapConfig:
    """Permutation-test configuration.

    B: number of block permutations (>= 100 so the EDF can resolve usual
    quantiles); alpha: significance level with alpha * B >= 1; block_size:
    an explicit block length k, or "auto" to derive k = q + 1 from the
    estimated MA order; Q: upper bound on that order (default 9, capping
    blocks at size 10); shared_blocks: permute all covariates with one
    shared block order instead of independent orders.
    """

    B: int = 10000
    alpha: float = 0.05
    block_size: Union[int, str] = AUTO
    Q: int = 9
    shared_blocks: bool = False

    def __post_init__(self):
        B = int(self.B)
        if B < 100:
            raise ValidationError(f"B must be >= 100, got {B}")
        object.__setattr__(self, "B", B)
        alpha = float(self.alpha)
        if not 0.0 < alpha < 1.0:
            raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
        if alpha * B < 1.0:
            raise ValidationError(f"alpha*B must be >= 1 to resolve the quantile (alpha={alpha}, B={B})")
        object.__setattr__(self, "alpha", alpha)
        if self.block_size != AUTO:
            k = int(self.block_size)
            if k < 1:
                raise ValidationError(f"block_size must be >= 1 or 'auto', got {self.block_size}")
            object.__setattr__(self, "block_size", k)
        Q = int(self.Q)
        if Q < 1:
            raise ValidationError(f"Q must be >= 1, got {Q}")
        object.__setattr__(self, "Q", Q)


@dataclass(frozen=True, eq=False)
class Edf:
    """Empirical distribution of bootstrap statistics, sorted ascending."""

    samples: np.ndarray

    def __post_init__(self):
        arr = np.sort(np.asarray(self.samples, dtype=np.float64))
        if arr.ndim != 1 or arr.size < 1:
            raise ValidationError("EDF needs a non-empty 1-d sample array")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def B(self) -> int:
        return self.samples.size


def edf_inverse(edf: Edf, alpha: float) -> float:
    """The empirical (1 - alpha) quantile: ascending order statistic ceil((1-alpha)*B)."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha must lie in (0, 1), got {alpha}")
    B = edf.B
    if alpha * B < 1.0:
        raise ValidationError(f"alpha*B must be >= 1 (alpha={alpha}, B={B})")
    rank = max(1, math.ceil((1.0 - alpha) * B - 1e-9))
    return float(edf.samples[rank - 1])


def edf_p_value(edf: Edf, statistic: float) -> float:
    """Add-one permutation p-value (1 + #{S_i >= S}) / (B + 1)."""
    count = edf.B - int(np.searchsorted(edf.samples, statistic, side="left"))
    return (1 + count) / (edf.B + 1)


def statistic_floor(values) -> float:
    """Numerical resolution floor below which a statistic is treated as zero.

    Exact fits on noiseless data leave float dust in both the observed and
    the bootstrapped statistics; a statistic at that scale is never evidence
    of a change point.
    """
    arr = np.asarray(values, dtype=float)
    return 1e-9 * max(1.0, float(np.abs(arr).max()))


@dataclass(frozen=True)
class CpTest:
    """Outcome of one change-point significance test."""

    location: int
    rank: int
    statistic: float
    p_value: float
    step_weights: tuple[float, ...]

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValidationError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class SignificanceResult:
    """Accepted and rejected change points with test details.

    accepted is ordered by rank; estimated_q is the MA order used to size
    blocks when block_size was auto (None otherwise); reconstructed_model,
    when present, is refitted on the accepted knots only.
    """

    accepted: tuple[CpTest, ...]
    rejected: tuple[CpTest, ...]
    estimated_q: Optional[int] = None
    reconstructed_model: Optional[ParcsModel] = None
    diagnostics: tuple[str, ...] = ()

    @property
    def accepted_locations(self) -> tuple[int, ...]:
        return tuple(cp.location for cp in self.accepted)


def min_length_for_blocks(k: int) -> int:
    """Shortest series length giving MIN_BLOCKS blocks of size k."""
    return (MIN_BLOCKS - 1) * k + 1


def check_block_feasibility(T: int, k: int) -> int:
    k = int(k)
    if not 1 <= k <= T:
        raise ValidationError(f"block size must satisfy 1 <= k <= T = {T}, got {k}")
    n_blocks = math.ceil(T / k)
    if n_blocks < MIN_BLOCKS:
        raise InfeasibleBlocksError(
            f"only {n_blocks} blocks of size {k} fit in T={T}; "
            f"need at least {MIN_BLOCKS} (series length >= {min_length_for_blocks(k)})"
        )
    return n_blocks


def block_permutation_indices(T: int, k: int, B: int, gen: np.random.Generator) -> np.ndarray:
    """(B, T) gather indices for B independent block permutations.

    The series splits into consecutive blocks of length k; a final short
    block keeps the remainder and is permuted along with the full blocks.
    """
    k = int(k)
    if not 1 <= k <= T:
        raise ValidationError(f"block size must satisfy 1 <= k <= T = {T}, got {k}")
    n = math.ceil(T / k)
    sizes = np.full(n, k, dtype=np.int64)
    sizes[-1] = T - k * (n - 1)
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))

    orders = np.argsort(gen.random((B, n)), axis=1)
    lens = sizes[orders].ravel()
    rep_starts = np.repeat(starts[orders].ravel(), lens)
    out_starts = np.concatenate(([0], np.cumsum(lens)[:-1]))
    within = np.arange(B * T, dtype=np.int64) - np.repeat(out_starts, lens)
    return (rep_starts + within).reshape(B, T)


def block_permute(x0, k: int, rng: RngSpec) -> TimeSeries:
    """One uniform random re-ordering of the consecutive size-k blocks of x0."""
    x = _values_1d(x0)
    idx = block_permutation_indices(x.size, k, 1, rng.generator())
    return TimeSeries(x[idx[0]])


def acorr_acceptance_interval(T: int, lag: int, alpha: float) -> tuple[float, float]:
    """Central (1 - alpha) interval of the asymptotic autocorrelation law."""
    mean = -1.0 / (T - lag)
    sd = math.sqrt(1.0 / (T - lag))
    z = norm.ppf(1.0 - alpha / 2.0)
    return mean - z * sd, mean + z * sd


def estimate_ma_order(x0, Q: int, alpha: float) -> int:
    """Scan lags 1..Q; the first lag whose sample autocorrelation falls inside
    the asymptotic acceptance interval ends the scan with order lag - 1. If
    every lag rejects, the upper bound is returned.
    """
    x = _values_1d(x0)
    T = x.size
    Q = int(Q)
    if Q < 1:
        raise ValidationError(f"Q must be >= 1, got {Q}")
    Q_eff = min(Q, T - 2)
    if Q_eff < 1:
        raise ValidationError(f"series too short (T={T}) to inspect any autocorrelation lag")
    for lag in range(1, Q_eff + 1):
        lo, hi = acorr_acceptance_interval(T, lag, alpha)
        r = autocorrelation(x, lag)
        if lo <= r <= hi:
            return lag - 1
    return Q_eff


def h0_series(curve: CusumCurve, model: ParcsModel, response: int = 0) -> TimeSeries:
    """Remove the fitted model from a curve and invert back to the series domain."""
    fitted = model.fitted_curves()[:, response]
    y0 = curve.y - fitted
    x0 = np.empty_like(y0)
    x0[0] = y0[0]
    x0[1:] = np.diff(y0)
    return TimeSeries(x0 + curve.source_mean)


def _h0_matrix(curves: Sequence[CusumCurve], model: ParcsModel) -> np.ndarray:
    cols = [h0_series(c, model, n).values for n, c in enumerate(curves)]
    return np.column_stack(cols)


def resolve_block_size(x0_matrix: np.ndarray, boot: BootstrapConfig, diagnostics: list) -> tuple[int, Optional[int]]:
    """Pick the block size: explicit k, or q+1 with q the largest per-covariate
    MA order estimate (constant residuals count as order 0)."""
    if boot.block_size != AUTO:
        return int(boot.block_size), None
    q_max = 0
    for n in range(x0_matrix.shape[1]):
        try:
            q_n = estimate_ma_order(x0_matrix[:, n], boot.Q, boot.alpha)
        except NoVarianceError:
            diagnostics.append(f"covariate {n + 1}: constant null series; treating MA order as 0")
            q_n = 0
        q_max = max(q_max, q_n)
    return q_max + 1, q_max


def _bootstrap_bending_samples(
    x0_matrix: np.ndarray,
    remaining_knots: Sequence[int],
    k: int,
    boot: BootstrapConfig,
    rng: RngSpec,
    rank_index: int,
) -> np.ndarray:
    """B response-averaged bending statistics at the first remaining knot.

    The permuted series are CUSUM-transformed and fitted with the fixed
    remaining-knot design, so the coefficient pair of the tested knot is a
    fixed linear functional of each curve: one matrix product evaluates all
    B permutations of all covariates.
    """
    T, N = x0_matrix.shape
    X = design_matrix(remaining_knots, T)
    pinv = np.linalg.pinv(X, rcond=RANK_RCOND)
    bend_functional = pinv[1] + pinv[2]  # beta+ + beta- of the tested knot

    total = np.zeros(boot.B)
    shared_idx = None
    if boot.shared_blocks:
        shared_idx = block_permutation_indices(T, k, boot.B, rng.generator(rank_index))
    for n in range(N):
        if shared_idx is None:
            idx = block_permutation_indices(T, k, boot.B, rng.generator(rank_index, n))
        else:
            idx = shared_idx
        rows = x0_matrix[:, n][idx]
        dev = rows - rows.mean(axis=1, keepdims=True)
        curves = np.cumsum(dev, axis=1)
        total += np.abs(curves @ bend_functional)
    return total / N


def _observed_bending(
    Y: np.ndarray, accepted_knots: Sequence[int], remaining_knots: Sequence[int], T: int
) -> tuple[float, np.ndarray]:
    """Regress accepted splines out of Y, fit the remaining-knot model, and
    return (response-averaged |bend|, signed per-response bend) at the first
    remaining knot."""
    r = Y
    if accepted_knots:
        X_acc = design_matrix(accepted_knots, T)
        coef_acc, _ = _solve_min_norm(X_acc, Y)
        r = Y - X_acc @ coef_acc
    X_rem = design_matrix(remaining_knots, T)
    coef, _ = _solve_min_norm(X_rem, r)
    bend = coef[1] + coef[2]
    return float(np.mean(np.abs(bend))), bend


def _significance_results(
    series,
    model: ParcsModel,
    boot: BootstrapConfig,
    rng: RngSpec,
    alphas: Sequence[float],
    limit_ranks: Optional[int] = None,
) -> dict[float, SignificanceResult]:
    """Run the rank-ordered bootstrap test once, deciding at several alphas.

    The null series, block size, and per-rank EDFs do not depend on alpha,
    so they are computed once and shared; the sequential accept/regress-out
    loop runs per alpha.
    """
    ms = _as_multiseries(series)
    if ms.T != model.T or ms.N != model.N:
        raise ValidationError(
            f"model shape (T={model.T}, N={model.N}) does not match series (T={ms.T}, N={ms.N})"
        )
    curves = curves_of(ms)
    Y = np.column_stack([c.y for c in curves])
    T = ms.T
    M = model.M
    ranks = range(1, M + 1) if limit_ranks is None else range(1, min(limit_ranks, M) + 1)

    shared_diags: list[str] = []
    x0 = _h0_matrix(curves, model)
    k, q = resolve_block_size(x0, boot, shared_diags)
    check_block_feasibility(T, k)
    floor = statistic_floor(ms.values)

    edfs = {
        m: Edf(_bootstrap_bending_samples(x0, model.ranked_knots[m - 1 :], k, boot, rng, m))
        for m in ranks
    }

    results: dict[float, SignificanceResult] = {}
    for alpha in alphas:
        accepted: list[CpTest] = []
        rejected: list[CpTest] = []
        diags = list(shared_diags)
        for m in ranks:
            c_m = model.ranked_knots[m - 1]
            remaining = model.ranked_knots[m - 1 :]
            accepted_knots = [cp.location for cp in accepted]
            S, bend = _observed_bending(Y, accepted_knots, remaining, T)
            edf = edfs[m]
            threshold = edf_inverse(edf, alpha)
            p = edf_p_value(edf, S)
            significant = S >= threshold and S > floor
            if S >= threshold and not significant:
                diags.append(f"knot {c_m}: statistic {S} at or below numerical floor {floor}")
            cp = CpTest(
                location=c_m,
                rank=m,
                statistic=S,
                p_value=p,
                step_weights=tuple(float(b) for b in bend),
            )
            (accepted if significant else rejected).append(cp)
        reconstructed = fit_coefficients(curves, [cp.location for cp in accepted])
        # reported step weights come from the accepted-knot refit, so they are
        # the reconstructed step parameters rather than the test-fit bends
        final_weights = reconstructed.step_weights()
        accepted = [
            CpTest(
                location=cp.location,
                rank=cp.rank,
                statistic=cp.statistic,
                p_value=cp.p_value,
                step_weights=tuple(float(b) for b in final_weights[i]),
            )
            for i, cp in enumerate(accepted)
        ]
        results[alpha] = SignificanceResult(
            accepted=tuple(accepted),
            rejected=tuple(rejected),
            estimated_q=q,
            reconstructed_model=reconstructed,
            diagnostics=tuple(diags),
        )
    return results


def parcs_significance_test(series, model: ParcsModel, boot: BootstrapConfig, rng: RngSpec) -> SignificanceResult:
    """Rank-ordered block-permutation test of every knot of a fitted model.

    Change points are tested from rank 1 down: splines of already-accepted
    CPs are regressed out, the remaining-knot model is refitted, and the
    bending statistic at the tested knot is compared against the empirical
    (1 - alpha) quantile of its distribution over B block permutations of
    the null series (the series with the full fitted model removed).
    """
    return _significance_results(series, model, boot, rng, alphas=(boot.alpha,))[boot.alpha]
