"""Per-region prediction quality metrics and bivariate palette binning.

All metrics compare an observed test tensor x against a prediction
tensor y, per grid cell over the n test slots:

    rmse   = sqrt(mean((y - x)^2))
    prmse  = rmse / mean(x)                    scale-free; undefined at mean 0
    u      = rmse / (rms(y) + rms(x))          in [0, 1]; undefined when both
                                               series are identically zero
    corr   = Pearson correlation of x and y    undefined when either series
                                               is constant
    mae    = mean(|y - x|)

Undefined values are carried as None plus a reason code, never NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .flows import FlowTensor

REASON_ZERO_MEAN = "zero_mean_volume"
REASON_ALL_ZERO = "all_zero_series"
REASON_CONSTANT = "constant_series"

DIAG_CSV_COLUMNS = "region_id,mean_volume,mean_abs_error,prmse,u,corr,n_slots,undefined_reason"


@dataclass(frozen=True)
class RegionDiagnostics:
    region: int
    mean_volume: float
    mean_abs_error: float
    prmse: float | None
    u: float | None
    corr: float | None
    n_slots: int
    undefined_reason: str  # "" when every metric is defined

    def to_json(self) -> dict:
        return {
            "region_id": self.region,
            "mean_volume": self.mean_volume,
            "mean_abs_error": self.mean_abs_error,
            "prmse": self.prmse,
            "u": self.u,
            "corr": self.corr,
            "n_slots": self.n_slots,
            "undefined_reason": self.undefined_reason,
        }


def _check_aligned(obs: FlowTensor, pred: FlowTensor) -> None:
    if (obs.w, obs.h) != (pred.w, pred.h):
        raise ValueError(f"dimension mismatch: {obs.w}x{obs.h} vs {pred.w}x{pred.h}")
    if (obs.t_first, obs.t_last) != (pred.t_first, pred.t_last):
        raise ValueError(
            f"slot range mismatch: [{obs.t_first},{obs.t_last}] vs [{pred.t_first},{pred.t_last}]"
        )


def series_metrics(x: np.ndarray, y: np.ndarray) -> RegionDiagnostics:
    """Metrics for one region's series pair (region id left at -1)."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = len(x)
    if n == 0 or len(y) != n:
        raise ValueError(f"series lengths {len(x)} and {len(y)} must match and be positive")
    diff = y - x
    mean_x = float(np.mean(x))
    mae = float(np.mean(np.abs(diff)))
    sq_err = float(np.dot(diff, diff))
    rmse = math.sqrt(sq_err / n)
    reasons = []

    if mean_x > 0.0:
        prmse = rmse / mean_x
    else:
        prmse = None
        reasons.append(f"prmse:{REASON_ZERO_MEAN}")

    # 1/sqrt(n) cancels between numerator and denominator
    norm_x = math.sqrt(float(np.dot(x, x)))
    norm_y = math.sqrt(float(np.dot(y, y)))
    if norm_x == 0.0 and norm_y == 0.0:
        u = None
        reasons.append(f"u:{REASON_ALL_ZERO}")
    else:
        u = math.sqrt(sq_err) / (norm_y + norm_x)

    dx = x - mean_x
    dy = y - float(np.mean(y))
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        corr = None
        reasons.append(f"corr:{REASON_CONSTANT}")
    else:
        # single sqrt of the product keeps perfectly linear pairs at exactly 1
        corr = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
        corr = min(1.0, max(-1.0, corr))

    return RegionDiagnostics(
        region=-1,
        mean_volume=mean_x,
        mean_abs_error=mae,
        prmse=prmse,
        u=u,
        corr=corr,
        n_slots=n,
        undefined_reason=";".join(reasons),
    )


def region_metrics(obs: FlowTensor, pred: FlowTensor) -> list[RegionDiagnostics]:
    """Diagnostics for every grid cell of an aligned tensor pair."""
    _check_aligned(obs, pred)
    out = []
    for g in range(obs.n_cells):
        d = series_metrics(obs.values[:, g], pred.values[:, g])
        out.append(
            RegionDiagnostics(
                region=g,
                mean_volume=d.mean_volume,
                mean_abs_error=d.mean_abs_error,
                prmse=d.prmse,
                u=d.u,
                corr=d.corr,
                n_slots=d.n_slots,
                undefined_reason=d.undefined_reason,
            )
        )
    return out


def global_rmse(obs: FlowTensor, pred: FlowTensor) -> float:
    """Root mean squared error pooled over every (cell, slot) pair."""
    _check_aligned(obs, pred)
    diff = pred.values - obs.values
    return math.sqrt(float(np.mean(diff * diff)))


def global_mae(obs: FlowTensor, pred: FlowTensor) -> float:
    _check_aligned(obs, pred)
    return float(np.mean(np.abs(pred.values - obs.values)))


def diagnostics_to_csv(diags: list[RegionDiagnostics]) -> str:
    """CSV export; undefined metrics are empty fields."""

    def fmt(v: float | None) -> str:
        return "" if v is None else repr(float(v))

    lines = [DIAG_CSV_COLUMNS]
    for d in diags:
        lines.append(
            ",".join(
                [
                    str(d.region),
                    repr(float(d.mean_volume)),
                    repr(float(d.mean_abs_error)),
                    fmt(d.prmse),
                    fmt(d.u),
                    fmt(d.corr),
                    str(d.n_slots),
                    d.undefined_reason,
                ]
            )
        )
    return "\n".join(lines) + "\n"


def diagnostics_from_csv(text: str) -> list[RegionDiagnostics]:
    """Inverse of diagnostics_to_csv; floats round-trip exactly via repr."""
    lines = text.strip("\n").split("\n")
    if not lines or lines[0] != DIAG_CSV_COLUMNS:
        raise ValueError(f"bad diagnostics header: {lines[0] if lines else '<empty>'!r}")
    out = []
    for line in lines[1:]:
        f = line.split(",")
        if len(f) != 8:
            raise ValueError(f"bad diagnostics row: {line!r}")
        out.append(
            RegionDiagnostics(
                region=int(f[0]),
                mean_volume=float(f[1]),
                mean_abs_error=float(f[2]),
                prmse=float(f[3]) if f[3] else None,
                u=float(f[4]) if f[4] else None,
                corr=float(f[5]) if f[5] else None,
                n_slots=int(f[6]),
                undefined_reason=f[7],
            )
        )
    return out


# ---------------------------------------------------------------------------
# Bivariate value/error palette binning

VSUP_VALUE_BINS = 8
VSUP_ERROR_LEVELS = 4


@dataclass(frozen=True)
class VsupCell:
    """Palette position: error level 0..3, value bin within that level.

    Higher error levels suppress value resolution: the 8 base value
    bins merge pairwise to 8, 4, 2, then 1 bin at levels 0..3.
    """

    error_level: int
    value_bin: int

    def __post_init__(self):
        if not (0 <= self.error_level < VSUP_ERROR_LEVELS):
            raise ValueError(f"error_level {self.error_level} out of range")
        if not (0 <= self.value_bin < self.bins_at_level):
            raise ValueError(f"value_bin {self.value_bin} out of range at level {self.error_level}")

    @property
    def bins_at_level(self) -> int:
        return VSUP_VALUE_BINS >> self.error_level


@dataclass(frozen=True)
class VsupScale:
    """Global bin edges: equal-width, anchored at 0."""

    value_max: float
    error_max: float

    def assign(self, value: float, error: float) -> VsupCell:
        """Bin one (value, error) pair; inputs past max clamp into the top bin."""
        if self.value_max > 0.0:
            b8 = min(VSUP_VALUE_BINS - 1, max(0, int(value / self.value_max * VSUP_VALUE_BINS)))
        else:
            b8 = 0
        if self.error_max > 0.0:
            level = min(VSUP_ERROR_LEVELS - 1, max(0, int(error / self.error_max * VSUP_ERROR_LEVELS)))
        else:
            level = 0
        return VsupCell(error_level=level, value_bin=b8 >> level)


def vsup_scale(diags: list[RegionDiagnostics]) -> VsupScale:
    if not diags:
        raise ValueError("no diagnostics to scale")
    return VsupScale(
        value_max=max(d.mean_volume for d in diags),
        error_max=max(d.mean_abs_error for d in diags),
    )


def vsup_assign(diags: list[RegionDiagnostics]) -> dict[int, VsupCell]:
    """Palette cell per region from mean volume and mean absolute error."""
    scale = vsup_scale(diags)
    return {d.region: scale.assign(d.mean_volume, d.mean_abs_error) for d in diags}


def temporal_cells(
    obs: FlowTensor,
    pred: FlowTensor,
    region: int,
    test_days: int,
    scale: VsupScale | None = None,
) -> list[list[VsupCell]]:
    """Day-by-slot palette matrix for one region.

    Uses the same global edges as vsup_assign (pass the scale from that
    call); per-slot values and errors beyond the regional maxima clamp
    into the top bin.  Without a scale, one is derived from the full
    diagnostics of the tensor pair.
    """
    _check_aligned(obs, pred)
    if not (0 <= region < obs.n_cells):
        raise ValueError(f"region {region} out of range for {obs.n_cells} cells")
    if test_days * 48 != obs.n_slots:
        raise ValueError(f"{test_days} days is {test_days * 48} slots, tensors carry {obs.n_slots}")
    if scale is None:
        scale = vsup_scale(region_metrics(obs, pred))
    x = obs.values[:, region]
    y = pred.values[:, region]
    rows = []
    for day in range(test_days):
        row = []
        for s in range(48):
            t = day * 48 + s
            row.append(scale.assign(float(x[t]), float(abs(y[t] - x[t]))))
        rows.append(row)
    return rows
