"""Baseline predictors and the prediction file adapter."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from maupscope.flows import FlowTensor, write_tensor
from maupscope.predict import (
    WEEK_SLOTS,
    PredictionError,
    inject_noise,
    load_predictions,
    seasonal_naive,
    slotwise_mean,
)


def tensor(n_slots, n_cells=2, w=None, h=1, t_first=0, kind="observed", fill=None, seed=0):
    w = w if w is not None else n_cells
    if fill is None:
        values = np.random.default_rng(seed).uniform(0, 10, size=(n_slots, w * h))
    else:
        values = np.full((n_slots, w * h), float(fill))
    return FlowTensor(w, h, t_first, t_first + n_slots - 1, kind, values)


class TestSeasonalNaive:
    def test_copies_lagged_train_values(self):
        train = tensor(WEEK_SLOTS, n_cells=3, seed=1)
        pred = seasonal_naive(train, 336)
        np.testing.assert_array_equal(pred.values, train.values)
        assert pred.kind == "predicted"
        assert pred.t_first == WEEK_SLOTS

    def test_week_periodic_input_zero_error(self):
        week = np.random.default_rng(2).uniform(0, 5, size=(WEEK_SLOTS, 4))
        train = FlowTensor(4, 1, 0, 2 * WEEK_SLOTS - 1, "observed", np.vstack([week, week]))
        test = FlowTensor(4, 1, 2 * WEEK_SLOTS, 3 * WEEK_SLOTS - 1, "observed", week.copy())
        pred = seasonal_naive(train, WEEK_SLOTS)
        np.testing.assert_array_equal(pred.values, test.values)

    def test_constant_tensor(self):
        pred = seasonal_naive(tensor(WEEK_SLOTS, fill=7.0), 100)
        assert np.all(pred.values == 7.0)

    def test_deep_horizon_reads_observed_test(self):
        train = tensor(WEEK_SLOTS, seed=3)
        observed = tensor(WEEK_SLOTS + 48, t_first=WEEK_SLOTS, seed=4)
        pred = seasonal_naive(train, WEEK_SLOTS + 48, observed_test=observed)
        # first week comes from train, the extra day from observed test
        np.testing.assert_array_equal(pred.values[:WEEK_SLOTS], train.values)
        np.testing.assert_array_equal(pred.values[WEEK_SLOTS:], observed.values[:48])

    def test_deep_horizon_without_observed_rejected(self):
        with pytest.raises(PredictionError):
            seasonal_naive(tensor(WEEK_SLOTS), WEEK_SLOTS + 1)

    def test_short_train_rejected(self):
        with pytest.raises(PredictionError):
            seasonal_naive(tensor(WEEK_SLOTS - 1), 10)

    def test_nonnegative(self):
        pred = seasonal_naive(tensor(WEEK_SLOTS, seed=5), 200)
        assert pred.values.min() >= 0.0


class TestSlotwiseMean:
    def test_two_weeks_mean(self):
        week1 = np.full((WEEK_SLOTS, 2), 2.0)
        week2 = np.full((WEEK_SLOTS, 2), 4.0)
        train = FlowTensor(2, 1, 0, 2 * WEEK_SLOTS - 1, "observed", np.vstack([week1, week2]))
        pred = slotwise_mean(train, 10)
        assert np.all(pred.values == 3.0)

    def test_single_week_equals_seasonal_naive(self):
        train = tensor(WEEK_SLOTS, seed=6)
        a = slotwise_mean(train, WEEK_SLOTS)
        b = seasonal_naive(train, WEEK_SLOTS)
        np.testing.assert_allclose(a.values, b.values, atol=0)

    def test_all_zero_train(self):
        pred = slotwise_mean(tensor(WEEK_SLOTS, fill=0.0), 50)
        assert np.all(pred.values == 0.0)

    def test_partial_trailing_week(self):
        # 10 days of train: slots-of-week 0..143 sampled twice, rest once
        n = 10 * 48
        values = np.arange(n, dtype=float)[:, None]
        train = FlowTensor(1, 1, 0, n - 1, "observed", values)
        pred = slotwise_mean(train, 1)
        # prediction slot is ordinal 480, slot-of-week 144: sampled once (value 144)
        assert pred.values[0, 0] == 144.0

    def test_short_train_rejected(self):
        with pytest.raises(PredictionError):
            slotwise_mean(tensor(100), 5)

    @given(seed=st.integers(min_value=0, max_value=1000))
    @settings(max_examples=10)
    def test_nonnegative_property(self, seed):
        pred = slotwise_mean(tensor(WEEK_SLOTS + 60, seed=seed), 30)
        assert pred.values.min() >= 0.0


class TestLoadPredictions:
    def expected(self):
        return tensor(336, n_cells=6, w=3, h=2, t_first=2496)

    def test_matching_file_accepted(self, tmp_path):
        exp = self.expected()
        pred = FlowTensor(3, 2, 2496, 2831, "predicted", np.ones((336, 6)))
        p = tmp_path / "pred.bin"
        write_tensor(pred, p)
        got = load_predictions(p, exp)
        np.testing.assert_array_equal(got.values, pred.values)

    def test_dimension_mismatch_rejected(self, tmp_path):
        pred = FlowTensor(2, 2, 2496, 2831, "predicted", np.ones((336, 4)))
        p = tmp_path / "pred.bin"
        write_tensor(pred, p)
        with pytest.raises(PredictionError, match="dimension mismatch"):
            load_predictions(p, self.expected())

    def test_wrong_kind_rejected(self, tmp_path):
        pred = FlowTensor(3, 2, 2496, 2831, "observed", np.ones((336, 6)))
        p = tmp_path / "pred.bin"
        write_tensor(pred, p)
        with pytest.raises(PredictionError, match="kind"):
            load_predictions(p, self.expected())

    def test_slot_range_mismatch_rejected(self, tmp_path):
        pred = FlowTensor(3, 2, 0, 335, "predicted", np.ones((336, 6)))
        p = tmp_path / "pred.bin"
        write_tensor(pred, p)
        with pytest.raises(PredictionError, match="slot range"):
            load_predictions(p, self.expected())

    def test_negative_values_rejected(self, tmp_path):
        # corrupt the payload directly; the format layer refuses it
        pred = FlowTensor(3, 2, 2496, 2831, "predicted", np.ones((336, 6)))
        p = tmp_path / "pred.bin"
        write_tensor(pred, p)
        raw = bytearray(p.read_bytes())
        nl = raw.index(b"\n")
        raw[nl + 1 : nl + 9] = np.asarray([-1.0], dtype="<f8").tobytes()
        p.write_bytes(bytes(raw))
        with pytest.raises(ValueError, match="negative"):
            load_predictions(p, self.expected())


class TestInjectNoise:
    def test_deterministic(self):
        t = tensor(20, seed=7)
        a = inject_noise(t, 0.3, seed=9)
        b = inject_noise(t, 0.3, seed=9)
        np.testing.assert_array_equal(a.values, b.values)

    def test_zero_sigma_identity(self):
        t = tensor(20, seed=8)
        np.testing.assert_array_equal(inject_noise(t, 0.0, seed=1).values, t.values)

    def test_nonnegative_and_scales_with_volume(self):
        t = tensor(500, fill=100.0)
        noisy = inject_noise(t, 0.2, seed=2)
        assert noisy.values.min() >= 0.0
        resid = np.abs(noisy.values - t.values)
        assert resid.mean() == pytest.approx(100.0 * 0.2 * np.sqrt(2 / np.pi), rel=0.05)

    def test_zeros_stay_zero(self):
        noisy = inject_noise(tensor(10, fill=0.0), 0.5, seed=3)
        assert np.all(noisy.values == 0.0)
