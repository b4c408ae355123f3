"""Paired-spline fitting of CUSUM curves with greedy knot selection.

A mean step at c becomes a slope change of the CUSUM curve at c, so the
curve is fitted by a continuous piecewise-linear model: an intercept plus,
per knot, the pair of one-sided ramps h+ (rising after the knot) and h-
(falling before it). Knots are chosen greedily: a forward sweep adds the
pair that lowers mean-square error most, a pruning sweep removes the pair
whose absence hurts least until the target order is reached, and a ranking
sweep orders the survivors by explained variance.

Because h+ - h- is affine in t, any design with two or more knots plus an
intercept is exactly rank-deficient: with M knots the 2M+1 columns span
only an (M+2)-dimensional space. The fitted curve, the mean-square error,
and the per-knot slope changes (beta+ + beta-) are still unique; individual
coefficients are reported as the minimum-norm least-squares solution, so
every solve here goes through an orthogonal decomposition (never normal
equations).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np
import scipy.linalg

from .cusum import CusumCurve, cusum_transform
from .errors import ValidationError
from .series import MultiSeries, TimeSeries

# Relative rank tolerance for the orthogonal-decomposition solver; singular
# directions below this are treated as exact (the paired basis always has
# M - 1 of them for M >= 2).
RANK_RCOND = 1e-10


@dataclass(frozen=True)
class KnotSet:
    """Distinct interior knot locations, in insertion order."""

    knots: tuple[int, ...] = ()

    def __post_init__(self):
        ks = tuple(int(k) for k in self.knots)
        if len(set(ks)) != len(ks):
            raise ValidationError(f"duplicate knots in {ks}")
        object.__setattr__(self, "knots", ks)

    def validate_for_length(self, T: int) -> "KnotSet":
        for k in self.knots:
            if not 2 <= k <= T - 1:
                raise ValidationError(f"knot {k} outside the interior range 2..{T - 1}")
        return self

    def add(self, knot: int) -> "KnotSet":
        return KnotSet(self.knots + (int(knot),))

    def remove(self, knot: int) -> "KnotSet":
        return KnotSet(tuple(k for k in self.knots if k != int(knot)))

    def __iter__(self):
        return iter(self.knots)

    def __len__(self):
        return len(self.knots)

    def __contains__(self, knot):
        return int(knot) in self.knots


@dataclass(frozen=True, eq=False)
class ParcsModel:
    """A fitted paired-spline model over N response curves.

    ranked_knots orders the knots; after ``fit_parcs`` rank 1 explains the
    most variance. coef_plus/coef_minus are (M, N) arrays of the
    minimum-norm pair coefficients; the identifiable slope change at knot m
    for response n is coef_plus[m, n] + coef_minus[m, n]. mse is the
    residual mean-square error averaged over responses; source_means holds
    each response's original series mean for inverting fitted curves.
    """

    ranked_knots: tuple[int, ...]
    intercepts: np.ndarray
    coef_plus: np.ndarray
    coef_minus: np.ndarray
    mse: float
    T: int
    N: int
    source_means: np.ndarray
    diagnostics: tuple[str, ...] = ()

    @property
    def M(self) -> int:
        return len(self.ranked_knots)

    def fitted_curves(self) -> np.ndarray:
        """Evaluate the model on t = 1..T; shape (T, N)."""
        X = design_matrix(self.ranked_knots, self.T)
        coef = coefficient_matrix(self)
        return X @ coef

    def step_weights(self) -> np.ndarray:
        """Signed slope change per knot and response, shape (M, N)."""
        return self.coef_plus + self.coef_minus


def coefficient_matrix(model: ParcsModel) -> np.ndarray:
    """Stack intercept and pair coefficients to match ``design_matrix`` columns."""
    coef = np.empty((1 + 2 * model.M, model.N))
    coef[0] = model.intercepts
    coef[1::2] = model.coef_plus
    coef[2::2] = model.coef_minus
    return coef


def spline_pair(c: int, T: int) -> tuple[np.ndarray, np.ndarray]:
    """The ramp pair at knot c over t = 1..T: h+ = max(t-c, 0), h- = max(c-t, 0)."""
    c = int(c)
    if not 2 <= c <= T - 1:
        raise ValidationError(f"knot must satisfy 2 <= c <= T-1 = {T - 1}, got {c}")
    t = np.arange(1, T + 1, dtype=np.float64)
    return np.maximum(t - c, 0.0), np.maximum(c - t, 0.0)


def design_matrix(knots: Iterable[int], T: int) -> np.ndarray:
    """Intercept column followed by (h+, h-) pairs, one per knot in order."""
    knots = tuple(knots)
    X = np.empty((T, 1 + 2 * len(knots)))
    X[:, 0] = 1.0
    for j, c in enumerate(knots):
        hp, hm = spline_pair(c, T)
        X[:, 1 + 2 * j] = hp
        X[:, 2 + 2 * j] = hm
    return X


def structural_rank(n_knots: int) -> int:
    """Expected rank of the paired design: min(2M+1, M+2)."""
    return min(2 * n_knots + 1, n_knots + 2)


def _solve_min_norm(X: np.ndarray, Y: np.ndarray) -> tuple[np.ndarray, int]:
    """Minimum-norm least squares via complete orthogonal decomposition."""
    coef, _, rank, _ = scipy.linalg.lstsq(X, Y, cond=RANK_RCOND, lapack_driver="gelsy")
    return coef, int(rank)


def _as_curves(curves) -> list[CusumCurve]:
    if isinstance(curves, CusumCurve):
        return [curves]
    out = list(curves)
    if not out or not all(isinstance(c, CusumCurve) for c in out):
        raise ValidationError("expected a CusumCurve or a non-empty sequence of CusumCurve")
    if len({c.T for c in out}) > 1:
        raise ValidationError("response curves differ in length")
    return out


def _response_matrix(curves: list[CusumCurve]) -> np.ndarray:
    return np.column_stack([c.y for c in curves])


def _mse_for_knots(Y: np.ndarray, knots: Sequence[int], T: int) -> float:
    X = design_matrix(knots, T)
    coef, _ = _solve_min_norm(X, Y)
    resid = Y - X @ coef
    return float(np.mean(resid * resid))


def fit_coefficients(curves, knots: Union[KnotSet, Sequence[int]]) -> ParcsModel:
    """Least-squares fit of the paired-spline model with the given knots.

    Accepts one curve per response; the model's mse is the residual
    mean-square error averaged over responses. A design whose rank falls
    below even the structural rank of the paired basis is solved in the
    minimum-norm sense and flagged in diagnostics rather than rejected.
    """
    curve_list = _as_curves(curves)
    T = curve_list[0].T
    if not isinstance(knots, KnotSet):
        knots = KnotSet(tuple(knots))
    knots.validate_for_length(T)
    M = len(knots)
    if T <= 2 * M + 1:
        raise ValidationError(f"need T > 2*|knots|+1 rows, got T={T} with {M} knots")

    Y = _response_matrix(curve_list)
    X = design_matrix(knots.knots, T)
    coef, rank = _solve_min_norm(X, Y)
    resid = Y - X @ coef
    mse = float(np.mean(resid * resid))

    diagnostics = ()
    if rank < structural_rank(M):
        diagnostics = (f"rank-deficient design beyond pairing redundancy (rank {rank} < {structural_rank(M)}); minimum-norm solution",)

    return ParcsModel(
        ranked_knots=knots.knots,
        intercepts=coef[0].copy(),
        coef_plus=coef[1::2].copy(),
        coef_minus=coef[2::2].copy(),
        mse=mse,
        T=T,
        N=Y.shape[1],
        source_means=np.array([c.source_mean for c in curve_list]),
        diagnostics=diagnostics,
    )


def forward_stage(curves, L: int) -> KnotSet:
    """Greedily add L knot pairs, each minimising the refitted mse.

    Every interior location not yet selected is a candidate at each step;
    ties go to the smallest location.
    """
    curve_list = _as_curves(curves)
    T = curve_list[0].T
    L = int(L)
    if L < 1:
        raise ValidationError(f"L must be >= 1, got {L}")
    if L > T - 2 or T <= 2 * L + 1:
        raise ValidationError(f"L={L} knots do not fit a series of length T={T}")
    Y = _response_matrix(curve_list)

    selected: list[int] = []
    for _ in range(L):
        best_c, best_mse = -1, math.inf
        for c in range(2, T):
            if c in selected:
                continue
            mse = _mse_for_knots(Y, selected + [c], T)
            if mse < best_mse:
                best_c, best_mse = c, mse
        selected.append(best_c)
    return KnotSet(tuple(selected))


def pruning_stage(curves, knots: Union[KnotSet, Sequence[int]], M: int) -> KnotSet:
    """Greedily drop pairs (refitting each time) until M knots remain."""
    curve_list = _as_curves(curves)
    T = curve_list[0].T
    if not isinstance(knots, KnotSet):
        knots = KnotSet(tuple(knots))
    knots.validate_for_length(T)
    M = int(M)
    if M < 0 or M > len(knots):
        raise ValidationError(f"M must satisfy 0 <= M <= |knots| = {len(knots)}, got {M}")
    Y = _response_matrix(curve_list)

    current = list(knots.knots)
    while len(current) > M:
        best_c, best_mse = None, math.inf
        for c in sorted(current):
            rest = [k for k in current if k != c]
            mse = _mse_for_knots(Y, rest, T)
            if mse < best_mse:
                best_c, best_mse = c, mse
        current.remove(best_c)
    return KnotSet(tuple(current))


def ranking_stage(curves, knots: Union[KnotSet, Sequence[int]]) -> tuple[int, ...]:
    """Order knots by explained variance (rank 1 = most).

    Repeatedly removes the knot whose removal raises mse least; the first
    removed ranks last.
    """
    curve_list = _as_curves(curves)
    T = curve_list[0].T
    if not isinstance(knots, KnotSet):
        knots = KnotSet(tuple(knots))
    knots.validate_for_length(T)
    Y = _response_matrix(curve_list)

    current = list(knots.knots)
    ranked_reversed: list[int] = []
    while current:
        best_c, best_mse = None, math.inf
        for c in sorted(current):
            rest = [k for k in current if k != c]
            mse = _mse_for_knots(Y, rest, T)
            if mse < best_mse:
                best_c, best_mse = c, mse
        ranked_reversed.append(best_c)
        current.remove(best_c)
    return tuple(reversed(ranked_reversed))


def _as_multiseries(series) -> MultiSeries:
    if isinstance(series, MultiSeries):
        return series
    if isinstance(series, TimeSeries):
        return MultiSeries(series.values[:, None])
    return MultiSeries(np.asarray(series, dtype=float))


def curves_of(series) -> list[CusumCurve]:
    """CUSUM-transform every covariate of a (multi)series."""
    ms = _as_multiseries(series)
    return [cusum_transform(ms.values[:, n]) for n in range(ms.N)]


def default_forward_bound(M: int) -> int:
    """Forward stage upper bound: 2.5x the target order, rounded up."""
    return math.ceil(2.5 * M)


def fit_parcs(series, M: int, L: Optional[int] = None) -> ParcsModel:
    """Fit the order-M paired-spline model to the CUSUM curves of a series.

    Runs forward selection up to L knots (default ceil(2.5 * M)), prunes
    back to M, ranks the survivors by explained variance, and refits the
    final coefficients. Multivariate input shares one knot set across
    covariates, selected on response-averaged mse.
    """
    M = int(M)
    if M < 1:
        raise ValidationError(f"M must be >= 1, got {M}")
    L = default_forward_bound(M) if L is None else int(L)
    if L < M:
        raise ValidationError(f"forward bound L={L} must be >= M={M}")
    curves = curves_of(series)
    knots = forward_stage(curves, L)
    knots = pruning_stage(curves, knots, M)
    ranked = ranking_stage(curves, knots)
    return fit_coefficients(curves, ranked)


def bending_statistic(model: ParcsModel, knot_rank: int) -> float:
    """|beta+ + beta-| at the knot of the given rank, averaged over responses."""
    r = int(knot_rank)
    if not 1 <= r <= model.M:
        raise ValidationError(f"knot_rank must satisfy 1 <= rank <= M = {model.M}, got {r}")
    return float(np.mean(np.abs(model.coef_plus[r - 1] + model.coef_minus[r - 1])))


def reconstruct_step_estimate(model: ParcsModel) -> MultiSeries:
    """Invert each fitted curve back to a piecewise-constant mean estimate.

    Each segment's value is the fitted curve's slope there plus the source
    mean. Differencing starts from the model evaluated at t = 0 (the basis
    extends naturally: h+ vanishes, h- equals the knot), so the intercept
    never leaks into the first sample and an intercept-only model inverts
    to a constant series at the mean.
    """
    fitted = model.fitted_curves()
    knots = np.asarray(model.ranked_knots, dtype=float)
    at_zero = model.intercepts + knots @ model.coef_minus if model.M else model.intercepts
    out = np.diff(np.vstack([at_zero, fitted]), axis=0)
    out += model.source_means
    return MultiSeries(out)
