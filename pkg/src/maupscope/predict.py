"""Prediction tensors: file adapter plus naive baselines.

Baselines exist so the full diagnostics pipeline runs with no learned
model in the loop; outputs of any external model arrive through
load_predictions in the shared tensor file format.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .flows import FlowTensor, read_tensor
from .ingest import SLOTS_PER_DAY

WEEK_SLOTS = 7 * SLOTS_PER_DAY  # seasonal lag: one week of 30-minute slots


class PredictionError(ValueError):
    pass


def load_predictions(path: str | Path, expected: FlowTensor) -> FlowTensor:
    """Read a predicted tensor and check it against the observed test window.

    Rejects dimension or slot-range mismatches, wrong kind, and negative
    values (negativity is already a format error at read time).
    """
    tensor = read_tensor(path)
    if tensor.kind != "predicted":
        raise PredictionError(f"{path}: tensor kind is {tensor.kind!r}, expected 'predicted'")
    if (tensor.w, tensor.h) != (expected.w, expected.h):
        raise PredictionError(
            f"{path}: dimension mismatch, file is {tensor.w}x{tensor.h}, expected {expected.w}x{expected.h}"
        )
    if (tensor.t_first, tensor.t_last) != (expected.t_first, expected.t_last):
        raise PredictionError(
            f"{path}: slot range [{tensor.t_first},{tensor.t_last}] does not match "
            f"[{expected.t_first},{expected.t_last}]"
        )
    return tensor


def seasonal_naive(train: FlowTensor, test_slots: int, observed_test: FlowTensor | None = None) -> FlowTensor:
    """Repeat the value observed one week earlier.

    The lag-336 source is always an observation: for test slots in the
    first week it lies in train; deeper test slots read earlier
    *observed* test values (never earlier predictions), which requires
    observed_test when test_slots > 336.
    """
    if train.n_slots < WEEK_SLOTS:
        raise PredictionError(f"need at least {WEEK_SLOTS} training slots, got {train.n_slots}")
    if test_slots < 1:
        raise PredictionError("test_slots must be positive")
    if test_slots > WEEK_SLOTS and observed_test is None:
        raise PredictionError(
            f"{test_slots} test slots reach lag sources inside the test window; pass observed_test"
        )
    if observed_test is not None and observed_test.n_slots < test_slots - WEEK_SLOTS:
        raise PredictionError("observed_test too short for the requested horizon")
    t0 = train.t_last + 1
    values = np.empty((test_slots, train.n_cells), dtype=np.float64)
    for i in range(test_slots):
        src = t0 + i - WEEK_SLOTS
        if src <= train.t_last:
            values[i] = train.slot(src)
        else:
            values[i] = observed_test.slot(src)
    return FlowTensor(train.w, train.h, t0, t0 + test_slots - 1, "predicted", values)


def slotwise_mean(train: FlowTensor, test_slots: int) -> FlowTensor:
    """Mean training value at the same slot-of-week.

    Slot-of-week is the absolute ordinal mod 336, so partial trailing
    weeks simply contribute fewer samples to some slots.
    """
    if train.n_slots < WEEK_SLOTS:
        raise PredictionError(f"need at least {WEEK_SLOTS} training slots, got {train.n_slots}")
    if test_slots < 1:
        raise PredictionError("test_slots must be positive")
    sums = np.zeros((WEEK_SLOTS, train.n_cells), dtype=np.float64)
    counts = np.zeros(WEEK_SLOTS, dtype=np.int64)
    for i in range(train.n_slots):
        sow = (train.t_first + i) % WEEK_SLOTS
        sums[sow] += train.values[i]
        counts[sow] += 1
    means = sums / counts[:, None]
    t0 = train.t_last + 1
    values = np.empty((test_slots, train.n_cells), dtype=np.float64)
    for i in range(test_slots):
        values[i] = means[(t0 + i) % WEEK_SLOTS]
    return FlowTensor(train.w, train.h, t0, t0 + test_slots - 1, "predicted", values)


def inject_noise(tensor: FlowTensor, sigma: float, seed: int) -> FlowTensor:
    """Proportional perturbation y = max(0, x * (1 + sigma * xi)), xi ~ N(0,1).

    Turns any observed tensor into an imperfect "model" whose absolute
    error scales with local volume, which is the regime the volume-vs-
    error diagnostics are built to expose.
    """
    if sigma < 0:
        raise PredictionError("sigma must be non-negative")
    rng = np.random.default_rng(seed)
    noisy = np.maximum(0.0, tensor.values * (1.0 + sigma * rng.standard_normal(tensor.values.shape)))
    return FlowTensor(tensor.w, tensor.h, tensor.t_first, tensor.t_last, "predicted", noisy)
