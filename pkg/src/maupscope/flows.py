"""Flow tensors: per-region-per-slot counts, rasterization, train/test split.

The on-disk tensor format is bit-exact: one UTF-8 JSON header line
{"w":..,"h":..,"t_first":..,"t_last":..,"kind":..,"dtype":"f64le"}
terminated by '\\n', then raw little-endian IEEE-754 doubles, slot-major
then row-major over cells.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ingest import SLOTS_PER_DAY, MovementRecord, bin_time
from .partition import FractionMap, GridScheme, ZoneScheme

TENSOR_KINDS = ("observed", "predicted")


class TensorFormatError(ValueError):
    pass


@dataclass
class FlowTensor:
    """Dense (n_slots, w*h) array of 64-bit reals over a slot window.

    Slot ordinals [t_first, t_last] are absolute within the dataset
    span.  Values are reals throughout; integer counts promote on
    construction.  A 32-bit in-memory mode exists for large runs, but
    files are always written as 64-bit.
    """

    w: int
    h: int
    t_first: int
    t_last: int
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in TENSOR_KINDS:
            raise TensorFormatError(f"unknown tensor kind {self.kind!r}")
        if self.t_last < self.t_first:
            raise TensorFormatError(f"slot range [{self.t_first}, {self.t_last}] is empty")
        expected = (self.n_slots, self.w * self.h)
        self.values = np.asarray(self.values)
        if self.values.dtype not in (np.float64, np.float32):
            self.values = self.values.astype(np.float64)
        if self.values.shape != expected:
            raise TensorFormatError(f"values shape {self.values.shape} != {expected}")
        if self.values.size and float(self.values.min()) < 0.0:
            raise TensorFormatError("negative values in flow tensor")

    @property
    def n_slots(self) -> int:
        return self.t_last - self.t_first + 1

    @property
    def n_cells(self) -> int:
        return self.w * self.h

    def slot(self, t: int) -> np.ndarray:
        """Cell vector at absolute slot ordinal t."""
        if not (self.t_first <= t <= self.t_last):
            raise IndexError(f"slot {t} outside [{self.t_first}, {self.t_last}]")
        return self.values[t - self.t_first]

    def astype32(self) -> "FlowTensor":
        return FlowTensor(self.w, self.h, self.t_first, self.t_last, self.kind, self.values.astype(np.float32))


def write_tensor(tensor: FlowTensor, path: str | Path) -> None:
    header = {
        "w": tensor.w,
        "h": tensor.h,
        "t_first": tensor.t_first,
        "t_last": tensor.t_last,
        "kind": tensor.kind,
        "dtype": "f64le",
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, separators=(",", ":")).encode("utf-8"))
        fh.write(b"\n")
        fh.write(np.ascontiguousarray(tensor.values, dtype="<f8").tobytes())


def read_tensor(path: str | Path) -> FlowTensor:
    with open(path, "rb") as fh:
        header_bytes = bytearray()
        while True:
            b = fh.read(1)
            if not b:
                raise TensorFormatError(f"{path}: no header line")
            if b == b"\n":
                break
            header_bytes.extend(b)
            if len(header_bytes) > 4096:
                raise TensorFormatError(f"{path}: header line too long")
        try:
            header = json.loads(header_bytes.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise TensorFormatError(f"{path}: bad header: {e}") from None
        for key in ("w", "h", "t_first", "t_last", "kind", "dtype"):
            if key not in header:
                raise TensorFormatError(f"{path}: header missing {key!r}")
        if header["dtype"] != "f64le":
            raise TensorFormatError(f"{path}: unsupported dtype {header['dtype']!r}")
        w, h = int(header["w"]), int(header["h"])
        t_first, t_last = int(header["t_first"]), int(header["t_last"])
        n = (t_last - t_first + 1) * w * h
        raw = fh.read()
        if len(raw) != 8 * n:
            raise TensorFormatError(f"{path}: payload is {len(raw)} bytes, expected {8 * n}")
        values = np.frombuffer(raw, dtype="<f8").reshape(t_last - t_first + 1, w * h)
    return FlowTensor(w=w, h=h, t_first=t_first, t_last=t_last, kind=header["kind"], values=values.copy())


@dataclass
class ZoneFlow:
    """Per-zone per-slot integer counts; ordinals follow the ZoneScheme."""

    n_zones: int
    t_first: int
    t_last: int
    counts: np.ndarray  # (n_slots, n_zones) int64

    def __post_init__(self):
        expected = (self.t_last - self.t_first + 1, self.n_zones)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.shape != expected:
            raise ValueError(f"counts shape {self.counts.shape} != {expected}")
        if self.counts.size and int(self.counts.min()) < 0:
            raise ValueError("negative zone counts")

    @property
    def n_slots(self) -> int:
        return self.t_last - self.t_first + 1


@dataclass
class AggregateResult:
    flow: "FlowTensor | ZoneFlow"
    assigned: int
    discarded: int  # records resolving to no region


def aggregate(
    records: list[MovementRecord],
    scheme: GridScheme | ZoneScheme,
    span_start,
    slot_count: int,
) -> AggregateResult:
    """Count get-on events per (region, slot).

    Grid schemes yield a FlowTensor directly; zone schemes a ZoneFlow.
    Records outside every region land in the discard tally instead of
    vanishing.
    """
    lons = np.asarray([r.on_lon for r in records], dtype=np.float64)
    lats = np.asarray([r.on_lat for r in records], dtype=np.float64)
    slots = np.asarray([bin_time(r, span_start) for r in records], dtype=np.int64)
    if np.any(slots >= slot_count):
        raise ValueError("record binned past the declared slot count")
    regions = scheme.assign_many(lons, lats) if len(records) else np.zeros(0, dtype=np.int64)
    ok = regions >= 0
    discarded = int(np.sum(~ok))
    if isinstance(scheme, GridScheme):
        values = np.zeros((slot_count, scheme.n_cells), dtype=np.float64)
        np.add.at(values, (slots[ok], regions[ok]), 1.0)
        flow = FlowTensor(scheme.w, scheme.h, 0, slot_count - 1, "observed", values)
    else:
        counts = np.zeros((slot_count, len(scheme)), dtype=np.int64)
        np.add.at(counts, (slots[ok], regions[ok]), 1)
        flow = ZoneFlow(len(scheme), 0, slot_count - 1, counts)
    return AggregateResult(flow=flow, assigned=int(np.sum(ok)), discarded=discarded)


def rasterize(zflow: ZoneFlow, fractions: FractionMap, grid: GridScheme) -> FlowTensor:
    """Spread zone volumes onto grid cells by area share.

    Cell value at slot t is the fraction-weighted sum of zone volumes:
    each zone donates volume * (intersection area / zone area) to each
    cell it overlaps, so per-slot totals are conserved whenever every
    zone lies inside the grid bbox.
    """
    if fractions.w != grid.w or fractions.h != grid.h:
        raise ValueError(
            f"fraction map built for {fractions.w}x{fractions.h}, grid is {grid.w}x{grid.h}"
        )
    if fractions.n_zones != zflow.n_zones:
        raise ValueError(f"fraction map has {fractions.n_zones} zones, flow has {zflow.n_zones}")
    m = fractions.matrix()  # (n_zones, n_cells)
    values = zflow.counts.astype(np.float64) @ m.toarray()
    return FlowTensor(grid.w, grid.h, zflow.t_first, zflow.t_last, "observed", values)


def split(tensor: FlowTensor, train_days: int, test_days: int) -> tuple[FlowTensor, FlowTensor]:
    """Contiguous prefix/suffix split on the slot axis, by whole days."""
    if train_days < 1 or test_days < 1:
        raise ValueError(f"train_days and test_days must be positive, got {train_days}/{test_days}")
    total_slots = (train_days + test_days) * SLOTS_PER_DAY
    if total_slots != tensor.n_slots:
        raise ValueError(
            f"{train_days}+{test_days} days is {total_slots} slots, tensor has {tensor.n_slots}"
        )
    cut = train_days * SLOTS_PER_DAY
    train = FlowTensor(
        tensor.w, tensor.h, tensor.t_first, tensor.t_first + cut - 1, tensor.kind, tensor.values[:cut].copy()
    )
    test = FlowTensor(
        tensor.w, tensor.h, tensor.t_first + cut, tensor.t_last, tensor.kind, tensor.values[cut:].copy()
    )
    return train, test


def grid_cells_as_zones(grid: GridScheme) -> ZoneScheme:
    """Degenerate ZoneScheme whose zones are exactly the grid cells."""
    zones = []
    for idx in range(grid.n_cells):
        x0, x1, y0, y1 = grid.cell_bounds(idx)
        zones.append((idx, [([(x0, y0), (x1, y0), (x1, y1), (x0, y1)], [])]))
    return ZoneScheme(zones)
