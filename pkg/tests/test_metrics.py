import math

import numpy as np
import pytest

from parcs import (
    DetectionOutcome,
    StepModelSpec,
    ValidationError,
    accuracy_score,
    centre_bias,
    centre_bias_samples,
    error_rates,
    pp_curve,
    roc_curve,
)
from parcs.metrics import CSV_COLUMNS, MetricReport, matching_window, report_row


def truth(T=100, cps=(20, 60), weights=None):
    if weights is None:
        weights = [[1.0]] * len(cps)
    return StepModelSpec(T=T, baseline=0.0, cps=cps, weights=np.asarray(weights, dtype=float))


NOISE = StepModelSpec(T=100, baseline=0.0, cps=(), sigma=1.0)


class TestCentreBias:
    def test_left_of_centre(self):
        assert centre_bias(20, 25, 100) == 5.0

    def test_right_of_centre(self):
        assert centre_bias(80, 75, 100) == 5.0

    def test_exact_detection(self):
        assert centre_bias(37, 37, 100) == 0.0

    def test_peripheral_shift_is_negative(self):
        assert centre_bias(20, 15, 100) == -5.0
        assert centre_bias(80, 85, 100) == -5.0

    def test_mirror_symmetry(self):
        # holds everywhere except the exact-centre cell of odd-T series,
        # where the sign indicator's midpoint T/2 and the mirror axis
        # (T+1)/2 disagree by half a step
        rng = np.random.default_rng(0)
        done = 0
        while done < 200:
            T = int(rng.integers(10, 200))
            c = int(rng.integers(1, T + 1))
            c_hat = int(rng.integers(1, T + 1))
            if T % 2 == 1 and 2 * c == T + 1:
                continue
            assert centre_bias(c, c_hat, T) == centre_bias(T + 1 - c, T + 1 - c_hat, T)
            done += 1

    def test_bounds(self):
        with pytest.raises(ValidationError):
            centre_bias(0, 5, 10)


class TestErrorRates:
    def test_noiseless_perfect(self):
        t = truth()
        outs = [DetectionOutcome(t, (20, 60)) for _ in range(10)]
        assert error_rates(outs) == (0.0, 0.0)

    def test_any_detection_on_noise_is_false(self):
        outs = [DetectionOutcome(NOISE, (50,)), DetectionOutcome(NOISE, ())]
        type_I, type_II = error_rates(outs)
        assert type_I == 0.5
        assert type_II == 0.0

    def test_missed_cp_counts_per_cp(self):
        t = truth()
        outs = [DetectionOutcome(t, (60,))]  # 20 missed
        type_I, type_II = error_rates(outs)
        assert type_II == 0.5
        # the single detection is assigned to a truth, so no false discovery
        assert type_I == 0.0

    def test_inaccurate_detection_is_neither_error(self):
        # an imprecise detection of a real CP is charged to accuracy, not to
        # the error rates
        t = truth()
        outs = [DetectionOutcome(t, (40, 60))]  # 40 is 20 steps from c=20
        assert error_rates(outs) == (0.0, 0.0)
        assert accuracy_score(outs, 20, 100, 2) == 0.0
        assert accuracy_score(outs, 60, 100, 2) == 1.0

    def test_extra_detection_is_false(self):
        t = truth()
        outs = [DetectionOutcome(t, (20, 40, 60))]
        type_I, type_II = error_rates(outs)
        assert type_I == 1.0
        assert type_II == 0.0

    def test_matching_is_one_to_one(self):
        t = truth(cps=(20,), weights=[[1.0]])
        outs = [DetectionOutcome(t, (19, 21))]  # both near the single truth
        type_I, type_II = error_rates(outs)
        assert type_II == 0.0
        assert type_I == 1.0  # second detection cannot match the same CP

    def test_order_invariance(self):
        t = truth()
        rng = np.random.default_rng(1)
        outs = [DetectionOutcome(t, (20, 60)), DetectionOutcome(t, ()), DetectionOutcome(t, (50,))]
        base = error_rates(outs)
        for _ in range(5):
            perm = list(rng.permutation(len(outs)))
            assert error_rates([outs[i] for i in perm]) == base

    def test_zero_weight_cps_are_not_truths(self):
        t = truth(cps=(20, 60), weights=[[0.0], [1.0]])
        outs = [DetectionOutcome(t, (60,))]
        type_I, type_II = error_rates(outs)
        assert (type_I, type_II) == (0.0, 0.0)

    def test_empty_collection_raises(self):
        with pytest.raises(ValidationError):
            error_rates([])


class TestAccuracyScore:
    def test_perfect(self):
        t = truth()
        outs = [DetectionOutcome(t, (20, 60)) for _ in range(20)]
        assert accuracy_score(outs, 20, 100, 2) == 1.0

    def test_hand_crafted_085_minus_penalty(self):
        t = truth()
        outs = []
        outs += [DetectionOutcome(t, (20, 60, 40)) for _ in range(4)]  # hits + one false
        outs += [DetectionOutcome(t, (20, 60)) for _ in range(81)]
        outs += [DetectionOutcome(t, (60,)) for _ in range(15)]  # miss c=20
        score = accuracy_score(outs, 20, 100, 2)
        assert score == pytest.approx(0.85 - 0.04 / 2)

    def test_never_exceeds_detection_rate(self):
        t = truth()
        rng = np.random.default_rng(2)
        outs = []
        for _ in range(50):
            dets = tuple(int(d) for d in rng.choice(np.arange(5, 95), size=rng.integers(0, 4)))
            outs.append(DetectionOutcome(t, tuple(sorted(set(dets)))))
        rate = np.mean([any(abs(d - 20) <= 5 for d in o.detected) for o in outs])
        assert accuracy_score(outs, 20, 100, 2) <= rate + 1e-12

    def test_window_is_five_percent(self):
        assert matching_window(100) == 5
        assert matching_window(26) == 1
        t = truth()
        hit = DetectionOutcome(t, (25,))
        miss = DetectionOutcome(t, (26,))
        assert accuracy_score([hit], 20, 100, 2) == 1.0
        assert accuracy_score([miss], 20, 100, 2) == 0.0


class TestCurves:
    def test_roc_shape_and_order(self):
        t = truth(cps=(50,), weights=[[1.0]])
        detected = [DetectionOutcome(t, (50,))]
        missed = [DetectionOutcome(t, ())]
        noise_hit = [DetectionOutcome(NOISE, (30,))]
        noise_none = [DetectionOutcome(NOISE, ())]
        points = roc_curve({
            0.5: (noise_hit, detected),
            0.01: (noise_none, missed),
        })
        assert [p.alpha for p in points] == [0.01, 0.5]
        assert points[0] == (0.01, 0.0, 0.0)  # no rejections limit
        assert points[1] == (0.5, 1.0, 1.0)  # everything accepted limit

    def test_pp_diagonal_and_extremes(self):
        all_detect = [DetectionOutcome(NOISE, (40,)) for _ in range(10)]
        none_detect = [DetectionOutcome(NOISE, ()) for _ in range(10)]
        points = pp_curve({1.0 - 1e-9: all_detect, 1e-9: none_detect})
        assert points[0].nominal == pytest.approx(1.0, abs=1e-6)
        assert points[0].empirical == 1.0
        assert points[1].nominal == pytest.approx(0.0, abs=1e-6)
        assert points[1].empirical == 0.0


class TestReportRow:
    def test_fixed_columns(self):
        report = MetricReport(
            condition="two-cp-1", method="parcs", alpha_nominal=0.05,
            type_I=0.02, type_II=0.04, accuracy=(0.8, 0.96),
            centre_bias_samples=(1.0, 2.0, 3.0),
        )
        row = report_row(report)
        assert tuple(row) == CSV_COLUMNS
        assert row["acc_c1"] == 0.8 and row["acc_c2"] == 0.96
        assert row["cb_mean"] == 2.0 and row["cb_median"] == 2.0

    def test_single_cp_pads_with_nan(self):
        report = MetricReport(
            condition="amoc-grid", method="cusum", alpha_nominal=0.05,
            type_I=0.05, type_II=0.01, accuracy=(0.9,),
        )
        row = report_row(report)
        assert math.isnan(row["acc_c2"])
        assert math.isnan(row["cb_mean"])

    def test_cb_samples_from_outcomes(self):
        t = truth()
        outs = [DetectionOutcome(t, (22, 59))]
        samples = centre_bias_samples(outs)
        assert sorted(samples) == [1.0, 2.0]  # cb(20,22)=2 (toward centre), cb(60,59)=1
