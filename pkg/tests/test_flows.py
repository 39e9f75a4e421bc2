"""Aggregation, rasterization conservation, splits, tensor file format."""

import json
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from maupscope.flows import (
    AggregateResult,
    FlowTensor,
    TensorFormatError,
    ZoneFlow,
    aggregate,
    grid_cells_as_zones,
    rasterize,
    read_tensor,
    split,
    write_tensor,
)
from maupscope.ingest import TZ, MovementRecord
from maupscope.partition import BBox, ZoneScheme, build_grid, intersection_fractions

UNIT = BBox(0.0, 1.0, 0.0, 1.0)
START = "2024-01-01"


def rec(lon, lat, minutes):
    on = datetime(2024, 1, 1, tzinfo=TZ) + timedelta(minutes=minutes)
    return MovementRecord("T0", on, lon, lat, on + timedelta(minutes=10), lon, lat, 10.0, 2.0)


def rect_ring(x0, y0, x1, y1):
    return [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]


class TestFlowTensor:
    def test_shape_enforced(self):
        with pytest.raises(TensorFormatError):
            FlowTensor(2, 2, 0, 3, "observed", np.zeros((4, 5)))

    def test_negative_rejected(self):
        v = np.zeros((2, 4))
        v[1, 2] = -0.5
        with pytest.raises(TensorFormatError):
            FlowTensor(2, 2, 0, 1, "observed", v)

    def test_bad_kind_rejected(self):
        with pytest.raises(TensorFormatError):
            FlowTensor(2, 2, 0, 0, "guessed", np.zeros((1, 4)))

    def test_slot_accessor_absolute(self):
        t = FlowTensor(2, 1, 10, 12, "observed", np.arange(6, dtype=float).reshape(3, 2))
        np.testing.assert_array_equal(t.slot(11), [2.0, 3.0])
        with pytest.raises(IndexError):
            t.slot(9)

    def test_integer_input_promoted(self):
        t = FlowTensor(1, 1, 0, 0, "observed", np.asarray([[3]], dtype=np.int64))
        assert t.values.dtype == np.float64


class TestAggregate:
    def test_empty_records_zero_tensor(self):
        g = build_grid(UNIT, 3, 2)
        out = aggregate([], g, START, 4)
        assert isinstance(out.flow, FlowTensor)
        assert out.flow.values.sum() == 0.0
        assert out.assigned == 0 and out.discarded == 0

    def test_single_record_lands_in_cell_and_slot(self):
        g = build_grid(UNIT, 4, 3)
        # cell 7 = (ix=3, iy=1): lon in [0.75, 1], lat in [1/3, 2/3); slot 3
        out = aggregate([rec(0.8, 0.4, minutes=95)], g, START, 6)
        v = out.flow.values
        assert v[3, 7] == 1.0
        assert v.sum() == 1.0

    def test_conservation(self):
        g = build_grid(UNIT, 5, 5)
        rng = np.random.default_rng(0)
        records = [
            rec(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), minutes=int(rng.integers(0, 120)))
            for _ in range(300)
        ]
        out = aggregate(records, g, START, 4)
        assert out.flow.values.sum() == out.assigned == 300
        assert out.discarded == 0

    def test_unassigned_records_tallied(self):
        g = build_grid(BBox(0.4, 0.6, 0.4, 0.6), 2, 2)
        records = [rec(0.5, 0.5, 0), rec(0.9, 0.9, 0)]
        out = aggregate(records, g, START, 1)
        assert out.assigned == 1 and out.discarded == 1

    def test_zone_scheme_returns_zoneflow(self):
        zs = ZoneScheme([(0, [(rect_ring(0, 0, 1, 1), [])])])
        out = aggregate([rec(0.5, 0.5, 40)], zs, START, 2)
        assert isinstance(out.flow, ZoneFlow)
        assert out.flow.counts[1, 0] == 1


class TestRasterize:
    def test_two_cell_fractions(self):
        # zone volume 8 split 0.25/0.75
        grid = build_grid(UNIT, 2, 1)
        zs = ZoneScheme([(0, [(rect_ring(0.25, 0.0, 1.0, 1.0), [])])])
        fr = intersection_fractions(zs, grid)
        zf = ZoneFlow(1, 0, 0, np.asarray([[8]]))
        out = rasterize(zf, fr, grid)
        # zone spans [0.25,1]: 1/3 of its area in cell 0, 2/3 in cell 1
        np.testing.assert_allclose(out.values[0], [8 / 3, 16 / 3], atol=1e-12)

    def test_quarter_three_quarter_example(self):
        grid = build_grid(UNIT, 2, 1)
        zs = ZoneScheme([(0, [(rect_ring(0.125, 0.0, 0.625, 1.0), [])])])
        fr = intersection_fractions(zs, grid)
        d = fr.as_dict()
        assert d[(0, 0)] == pytest.approx(0.75, abs=1e-12)
        assert d[(0, 1)] == pytest.approx(0.25, abs=1e-12)
        out = rasterize(ZoneFlow(1, 0, 0, np.asarray([[8]])), fr, grid)
        np.testing.assert_allclose(out.values[0], [6.0, 2.0], atol=1e-12)

    def test_zone_identical_to_cell(self):
        grid = build_grid(UNIT, 2, 2)
        x0, x1, y0, y1 = grid.cell_bounds(3)
        zs = ZoneScheme([(0, [(rect_ring(x0, y0, x1, y1), [])])])
        fr = intersection_fractions(zs, grid)
        out = rasterize(ZoneFlow(1, 0, 0, np.asarray([[17]])), fr, grid)
        assert out.values[0, 3] == pytest.approx(17.0, abs=1e-12)
        assert out.values.sum() == pytest.approx(17.0, abs=1e-12)

    def test_conservation_random_instance(self):
        # [DERIVED] conservation from the partition-of-unity property
        rng = np.random.default_rng(5)
        grid = build_grid(UNIT, 4, 4)
        zones = []
        for zid in range(5):
            x0 = float(rng.uniform(0.0, 0.7))
            y0 = float(rng.uniform(0.0, 0.7))
            zones.append((zid, [(rect_ring(x0, y0, x0 + 0.3, y0 + 0.3), [])]))
        zs = ZoneScheme(zones)
        fr = intersection_fractions(zs, grid)
        counts = rng.integers(0, 50, size=(6, 5))
        zf = ZoneFlow(5, 0, 5, counts)
        out = rasterize(zf, fr, grid)
        for t in range(6):
            assert out.values[t].sum() == pytest.approx(counts[t].sum(), rel=1e-9)

    def test_linearity(self):
        grid = build_grid(UNIT, 3, 3)
        zs = ZoneScheme(
            [
                (0, [(rect_ring(0.1, 0.1, 0.5, 0.6), [])]),
                (1, [(rect_ring(0.4, 0.3, 0.9, 0.9), [])]),
            ]
        )
        fr = intersection_fractions(zs, grid)
        rng = np.random.default_rng(2)
        c1 = rng.integers(0, 9, size=(3, 2))
        c2 = rng.integers(0, 9, size=(3, 2))
        r1 = rasterize(ZoneFlow(2, 0, 2, c1), fr, grid)
        r2 = rasterize(ZoneFlow(2, 0, 2, c2), fr, grid)
        r12 = rasterize(ZoneFlow(2, 0, 2, 2 * c1 + 3 * c2), fr, grid)
        np.testing.assert_allclose(r12.values, 2 * r1.values + 3 * r2.values, atol=1e-9)

    def test_grid_as_zones_identity(self):
        # rasterizing cell-shaped zones reproduces plain grid aggregation
        grid = build_grid(UNIT, 3, 2)
        zs = grid_cells_as_zones(grid)
        rng = np.random.default_rng(9)
        records = [
            rec(float(rng.uniform(0, 1)), float(rng.uniform(0, 1)), minutes=int(rng.integers(0, 60)))
            for _ in range(200)
        ]
        direct = aggregate(records, grid, START, 2).flow
        zf = aggregate(records, zs, START, 2).flow
        fr = intersection_fractions(zs, grid)
        indirect = rasterize(zf, fr, grid)
        np.testing.assert_allclose(indirect.values, direct.values, atol=1e-9)

    def test_dimension_mismatch_rejected(self):
        zs = ZoneScheme([(0, [(rect_ring(0, 0, 1, 1), [])])])
        fr = intersection_fractions(zs, build_grid(UNIT, 2, 2))
        with pytest.raises(ValueError):
            rasterize(ZoneFlow(1, 0, 0, np.asarray([[1]])), fr, build_grid(UNIT, 3, 3))


class TestSplit:
    def make(self, days):
        n = days * 48
        return FlowTensor(2, 1, 0, n - 1, "observed", np.arange(n * 2, dtype=float).reshape(n, 2))

    def test_59_day_split(self):
        t = self.make(59)
        train, test = split(t, 52, 7)
        assert train.n_slots == 2496 and test.n_slots == 336
        assert test.t_first == 2496 and test.t_last == 2831

    def test_14_day_split(self):
        train, test = split(self.make(14), 7, 7)
        assert train.n_slots == 336 and test.n_slots == 336

    def test_zero_test_days_rejected(self):
        with pytest.raises(ValueError):
            split(self.make(14), 14, 0)

    def test_budget_mismatch_rejected(self):
        with pytest.raises(ValueError):
            split(self.make(14), 10, 5)

    def test_values_partitioned(self):
        t = self.make(10)
        train, test = split(t, 8, 2)
        np.testing.assert_array_equal(np.vstack([train.values, test.values]), t.values)


class TestTensorFile:
    def test_roundtrip(self, tmp_path):
        rng = np.random.default_rng(4)
        t = FlowTensor(5, 3, 7, 12, "predicted", rng.uniform(0, 9, size=(6, 15)))
        p = tmp_path / "t.bin"
        write_tensor(t, p)
        back = read_tensor(p)
        assert (back.w, back.h, back.t_first, back.t_last, back.kind) == (5, 3, 7, 12, "predicted")
        np.testing.assert_array_equal(back.values, t.values)

    def test_header_layout(self, tmp_path):
        t = FlowTensor(2, 1, 0, 0, "observed", np.asarray([[1.5, 2.5]]))
        p = tmp_path / "t.bin"
        write_tensor(t, p)
        raw = p.read_bytes()
        nl = raw.index(b"\n")
        header = json.loads(raw[:nl])
        assert header == {"w": 2, "h": 1, "t_first": 0, "t_last": 0, "kind": "observed", "dtype": "f64le"}
        assert raw[nl + 1 :] == np.asarray([1.5, 2.5], dtype="<f8").tobytes()

    def test_byte_identical_rewrite(self, tmp_path):
        t = FlowTensor(3, 2, 0, 4, "observed", np.random.default_rng(1).uniform(0, 5, (5, 6)))
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        write_tensor(t, p1)
        write_tensor(read_tensor(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_truncated_payload_rejected(self, tmp_path):
        t = FlowTensor(2, 2, 0, 1, "observed", np.ones((2, 4)))
        p = tmp_path / "t.bin"
        write_tensor(t, p)
        p.write_bytes(p.read_bytes()[:-8])
        with pytest.raises(TensorFormatError):
            read_tensor(p)

    def test_bad_dtype_rejected(self, tmp_path):
        p = tmp_path / "t.bin"
        p.write_bytes(b'{"w":1,"h":1,"t_first":0,"t_last":0,"kind":"observed","dtype":"f32le"}\n' + b"\x00" * 8)
        with pytest.raises(TensorFormatError):
            read_tensor(p)

    def test_missing_header_key_rejected(self, tmp_path):
        p = tmp_path / "t.bin"
        p.write_bytes(b'{"w":1,"h":1,"t_first":0,"t_last":0,"kind":"observed"}\n' + b"\x00" * 8)
        with pytest.raises(TensorFormatError):
            read_tensor(p)

    @given(
        vals=arrays(
            dtype=np.float64,
            shape=(3, 4),
            elements=st.floats(min_value=0, max_value=1e6, allow_nan=False),
        )
    )
    @settings(max_examples=30)
    def test_roundtrip_property(self, vals, tmp_path_factory):
        t = FlowTensor(4, 1, 0, 2, "observed", vals)
        p = tmp_path_factory.mktemp("rt") / "t.bin"
        write_tensor(t, p)
        np.testing.assert_array_equal(read_tensor(p).values, vals)
