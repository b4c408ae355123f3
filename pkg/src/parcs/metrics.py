"""Evaluation measures for simulation studies: centre bias, error rates,
accuracy scores, and ROC / P-P curve data.

Detections are assigned to true change points one-to-one, nearest first,
with no distance cap. A true CP left without a detection is a miss (type
II); a detection left without a true CP is a false discovery (type I,
booked per realisation). Location precision is judged separately by the
accuracy score: the rate of realisations with an accepted detection within
+-round(0.05 * T) steps of the true CP, penalised by the false-discovery
rate divided by the CP count. Centre-bias samples come from the assigned
pairs, so strongly biased detections stay in the distribution instead of
being reclassified as misses. Type II is reported per true CP, averaged
over CPs and realisations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ValidationError
from .synth import StepModelSpec


def matching_window(T: int) -> int:
    return int(round(0.05 * T))


@dataclass(frozen=True, eq=False)
class DetectionOutcome:
    """Accepted CP locations from one realisation, tied to its generating truth."""

    truth: StepModelSpec
    detected: tuple[int, ...]

    def __post_init__(self):
        det = tuple(int(d) for d in self.detected)
        for d in det:
            if not 1 <= d <= self.truth.T - 1:
                raise ValidationError(f"detected location {d} outside 1..T-1 = {self.truth.T - 1}")
        object.__setattr__(self, "detected", det)

    @property
    def any_detection(self) -> bool:
        return bool(self.detected)

    @property
    def count(self) -> int:
        return len(self.detected)


class RocPoint(NamedTuple):
    alpha: float
    type_I: float
    power: float


class PpPoint(NamedTuple):
    alpha: float
    nominal: float  # 1 - alpha
    empirical: float  # 1 - factual type I rate


@dataclass(frozen=True)
class MetricReport:
    """Plot-ready summary of one experimental condition."""

    condition: str
    method: str
    alpha_nominal: float
    type_I: float
    type_II: float
    accuracy: tuple[float, ...]
    centre_bias_samples: tuple[float, ...] = ()
    roc: tuple[RocPoint, ...] = ()
    pp: tuple[PpPoint, ...] = ()

    @property
    def cb_mean(self) -> float:
        return float(np.mean(self.centre_bias_samples)) if self.centre_bias_samples else math.nan

    @property
    def cb_median(self) -> float:
        return float(np.median(self.centre_bias_samples)) if self.centre_bias_samples else math.nan


def centre_bias(c: int, c_hat: int, T: int) -> float:
    """Signed displacement of a detection toward the series midpoint.

    Positive when c_hat falls on the centre side of the true c, negative on
    the peripheral side.
    """
    if not (1 <= c <= T and 1 <= c_hat <= T):
        raise ValidationError(f"locations must lie in 1..T = {T}, got c={c}, c_hat={c_hat}")
    indicator = 1.0 if c - T / 2 > 0 else 0.0
    return (2.0 * indicator - 1.0) * (c - c_hat)


def _match_one(
    truth_cps: Sequence[int], detected: Sequence[int], window: Optional[int]
) -> dict[int, int]:
    """One-to-one nearest-first matching of detections to true CPs.

    window = None matches without a distance cap (used for false-discovery
    accounting); an integer window restricts matches to +-window steps.
    """
    pairs = sorted(
        (abs(d - c), c, d)
        for c in truth_cps
        for d in detected
        if window is None or abs(d - c) <= window
    )
    matched: dict[int, int] = {}
    used_detections: set[int] = set()
    for _, c, d in pairs:
        if c not in matched and d not in used_detections:
            matched[c] = d
            used_detections.add(d)
    return matched


def _spec_key(spec: StepModelSpec) -> tuple:
    return (
        spec.T,
        tuple(spec.baseline),
        spec.cps,
        tuple(map(tuple, spec.weights)),
        spec.ma_coeffs,
        spec.sigma,
        spec.noise_kind,
    )


def _common_truth(outcomes: Sequence[DetectionOutcome]) -> StepModelSpec:
    if not outcomes:
        raise ValidationError("no outcomes to score")
    truth = outcomes[0].truth
    key = _spec_key(truth)
    if any(o.truth is not truth and _spec_key(o.truth) != key for o in outcomes[1:]):
        raise ValidationError("outcomes stem from different truth specs")
    return truth


def effective_cps(truth: StepModelSpec) -> tuple[int, ...]:
    """True CPs that actually shift the mean: nonzero weight in some covariate."""
    return tuple(c for c, row in zip(truth.cps, truth.weights) if np.any(row != 0.0))


def error_rates(outcomes: Sequence[DetectionOutcome]) -> tuple[float, float]:
    """(type I, type II) rates over a collection of outcomes.

    After one-to-one nearest assignment of detections to true CPs, type I
    is the fraction of realisations with a leftover detection and type II
    the fraction of true CPs left undetected (averaged over CPs and
    realisations). An inaccurately located detection of a real CP is
    neither error; the accuracy score charges for it instead.
    """
    truth = _common_truth(outcomes)
    cps = effective_cps(truth)
    n = len(outcomes)
    false_realisations = 0
    misses = 0
    for o in outcomes:
        assigned = _match_one(cps, o.detected, None)
        misses += len(cps) - len(assigned)
        if len(o.detected) > len(assigned):
            false_realisations += 1
    type_I = false_realisations / n
    type_II = misses / (n * len(cps)) if cps else 0.0
    return type_I, type_II


def centre_bias_samples(outcomes: Sequence[DetectionOutcome]) -> tuple[float, ...]:
    """Centre-bias values of every assigned (true CP, detection) pair."""
    truth = _common_truth(outcomes)
    out = []
    for o in outcomes:
        for c, d in _match_one(effective_cps(truth), o.detected, None).items():
            out.append(centre_bias(c, d, truth.T))
    return tuple(out)


def accuracy_score(
    outcomes: Sequence[DetectionOutcome], c: int, T: int, M: int, window: Optional[int] = None
) -> float:
    """Detection rate within the window of c, penalised by type I rate / M."""
    if not outcomes:
        raise ValidationError("no outcomes to score")
    w = matching_window(T) if window is None else int(window)
    hits = sum(1 for o in outcomes if any(abs(d - c) <= w for d in o.detected))
    type_I, _ = error_rates(outcomes)
    return hits / len(outcomes) - type_I / M


def roc_curve(
    per_alpha: Mapping[float, tuple[Sequence[DetectionOutcome], Sequence[DetectionOutcome]]],
) -> tuple[RocPoint, ...]:
    """One (type I, power) point per nominal alpha, sorted by alpha.

    Each entry maps alpha -> (noise outcomes, signal outcomes): the type I
    rate comes from the noise ensemble, the power = 1 - type II from the
    signal ensemble.
    """
    points = []
    for alpha in sorted(per_alpha):
        noise, signal = per_alpha[alpha]
        type_I, _ = error_rates(noise)
        _, type_II = error_rates(signal)
        points.append(RocPoint(alpha=float(alpha), type_I=type_I, power=1.0 - type_II))
    return tuple(points)


def pp_curve(per_alpha: Mapping[float, Sequence[DetectionOutcome]]) -> tuple[PpPoint, ...]:
    """Nominal vs factual H0 acceptance, one point per alpha, sorted by alpha."""
    points = []
    for alpha in sorted(per_alpha):
        type_I, _ = error_rates(per_alpha[alpha])
        points.append(PpPoint(alpha=float(alpha), nominal=1.0 - float(alpha), empirical=1.0 - type_I))
    return tuple(points)


CSV_COLUMNS = (
    "condition",
    "method",
    "alpha_nominal",
    "type1",
    "type2",
    "acc_c1",
    "acc_c2",
    "cb_mean",
    "cb_median",
)


def report_row(report: MetricReport) -> dict[str, object]:
    """Flatten a report into the fixed benchmark CSV columns."""
    acc = list(report.accuracy) + [math.nan, math.nan]
    return {
        "condition": report.condition,
        "method": report.method,
        "alpha_nominal": report.alpha_nominal,
        "type1": report.type_I,
        "type2": report.type_II,
        "acc_c1": acc[0],
        "acc_c2": acc[1],
        "cb_mean": report.cb_mean,
        "cb_median": report.cb_median,
    }
