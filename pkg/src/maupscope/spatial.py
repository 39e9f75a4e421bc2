"""Queen-contiguity weights, global Moran's I, and its LISA decomposition.

Weights connect each grid cell to the other cells of its 3x3 block
(first-order queen).  The scatter decomposition standardizes values to
mean 0 and unit variance and uses row-standardized weights, which makes
the OLS slope of the lag on the value equal the global statistic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy import stats as sstats

SCATTER_CSV_COLUMNS = "region_id,z_value,z_lag,lisa,z_error"


class ZeroVarianceError(ValueError):
    """Spatial association is undefined on a constant field."""

    reason = "zero variance"

    def __init__(self, message: str = "zero variance: field is constant"):
        super().__init__(message)


@dataclass
class SpatialWeights:
    w: int
    h: int
    mode: str  # "binary" | "row_standardized"
    matrix: sparse.csr_matrix = field(repr=False)

    @property
    def n(self) -> int:
        return self.w * self.h

    @property
    def s0(self) -> float:
        """Sum of all weights."""
        return float(self.matrix.sum())

    def neighbor_counts(self) -> np.ndarray:
        return np.diff(self.matrix.indptr)

    def neighbors(self, cell: int) -> np.ndarray:
        return self.matrix.indices[self.matrix.indptr[cell] : self.matrix.indptr[cell + 1]]


def build_weights(w: int, h: int, mode: str = "binary") -> SpatialWeights:
    """First-order queen contiguity on a w x h grid.

    Interior cells get 8 neighbors, edge cells 5, corner cells 3; no
    self-loops.  row_standardized divides each row by its neighbor
    count, binary leaves unit weights (symmetric).
    """
    if w < 1 or h < 1:
        raise ValueError(f"grid dimensions must be positive, got {w}x{h}")
    if mode not in ("binary", "row_standardized"):
        raise ValueError(f"unknown mode {mode!r}")
    rows: list[int] = []
    cols: list[int] = []
    for iy in range(h):
        for ix in range(w):
            cell = iy * w + ix
            for dy in (-1, 0, 1):
                for dx in (-1, 0, 1):
                    if dx == 0 and dy == 0:
                        continue
                    jx, jy = ix + dx, iy + dy
                    if 0 <= jx < w and 0 <= jy < h:
                        rows.append(cell)
                        cols.append(jy * w + jx)
    data = np.ones(len(rows), dtype=np.float64)
    m = sparse.csr_matrix((data, (rows, cols)), shape=(w * h, w * h))
    if mode == "row_standardized":
        counts = np.diff(m.indptr).astype(np.float64)
        scale = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
        m = sparse.diags(scale) @ m
        m = m.tocsr()
    return SpatialWeights(w=w, h=h, mode=mode, matrix=m)


def _require_variation(values: np.ndarray) -> None:
    if len(values) < 2:
        raise ValueError("need at least 2 cells")
    if np.ptp(values) == 0.0:
        raise ZeroVarianceError()


def moran_global(values: np.ndarray, wts: SpatialWeights) -> float:
    """Global spatial autocorrelation, deviations from the global mean:

        I = (n / sum(w)) * (sum_ij w_ij z_i z_j / sum_i z_i^2)
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) != wts.n:
        raise ValueError(f"{len(values)} values for {wts.n} cells")
    _require_variation(values)
    z = values - values.mean()
    num = float(z @ (wts.matrix @ z))
    den = float(z @ z)
    return (wts.n / wts.s0) * (num / den)


def standardize(values: np.ndarray) -> np.ndarray:
    """Mean 0, unit variance (population denominator)."""
    values = np.asarray(values, dtype=np.float64)
    _require_variation(values)
    z = values - values.mean()
    return z / np.sqrt(np.mean(z * z))


@dataclass(frozen=True)
class LisaPoint:
    region: int
    z_value: float
    z_lag: float
    lisa: float
    z_error: float | None

    def to_json(self) -> dict:
        return {
            "region_id": self.region,
            "z_value": self.z_value,
            "z_lag": self.z_lag,
            "lisa": self.lisa,
            "z_error": self.z_error,
        }


@dataclass(frozen=True)
class MoranSummary:
    global_i: float
    regression_slope: float
    intercept: float
    pearson_r: float
    p_value: float

    def to_json(self) -> dict:
        return {
            "global_i": self.global_i,
            "regression_slope": self.regression_slope,
            "intercept": self.intercept,
            "pearson_r": self.pearson_r,
            "p_value": self.p_value,
        }


def lisa(
    values: np.ndarray,
    wts: SpatialWeights,
    errors: np.ndarray | None = None,
) -> tuple[list[LisaPoint], MoranSummary]:
    """Per-cell association decomposition plus the scatter regression.

    lisa_i = z_i * lag_i with z unit-variance standardized and lag taken
    over row-standardized weights, so mean(lisa) equals the global
    statistic.  errors (optional, same length, NaN = undefined) are
    standardized over their finite entries and ride along for coloring.
    """
    values = np.asarray(values, dtype=np.float64)
    if len(values) != wts.n:
        raise ValueError(f"{len(values)} values for {wts.n} cells")
    m = wts.matrix
    if wts.mode != "row_standardized":
        counts = np.diff(m.indptr).astype(np.float64)
        scale = np.divide(1.0, counts, out=np.zeros_like(counts), where=counts > 0)
        m = (sparse.diags(scale) @ m).tocsr()
    z = standardize(values)
    z_lag = m @ z
    lisa_vals = z * z_lag

    z_err: np.ndarray | None = None
    if errors is not None:
        errors = np.asarray(errors, dtype=np.float64)
        if len(errors) != wts.n:
            raise ValueError(f"{len(errors)} errors for {wts.n} cells")
        finite = np.isfinite(errors)
        if finite.sum() >= 2 and np.ptp(errors[finite]) > 0.0:
            mu = errors[finite].mean()
            sd = np.sqrt(np.mean((errors[finite] - mu) ** 2))
            z_err = np.where(finite, (errors - mu) / sd, np.nan)
        else:
            z_err = np.full(wts.n, np.nan)

    dv = z - z.mean()
    dl = z_lag - z_lag.mean()
    svv = float(dv @ dv)
    slope = float(dv @ dl) / svv
    intercept = float(z_lag.mean() - slope * z.mean())
    sll = float(dl @ dl)
    if sll == 0.0:
        r = 0.0
        p = 1.0
    else:
        r = float(dv @ dl) / np.sqrt(svv * sll)
        r = min(1.0, max(-1.0, r))
        n = wts.n
        if abs(r) == 1.0:
            p = 0.0
        else:
            t = r * np.sqrt((n - 2) / (1.0 - r * r))
            p = float(2.0 * sstats.t.sf(abs(t), df=n - 2))

    global_i = moran_global(values, wts)
    points = [
        LisaPoint(
            region=g,
            z_value=float(z[g]),
            z_lag=float(z_lag[g]),
            lisa=float(lisa_vals[g]),
            z_error=(float(z_err[g]) if z_err is not None and np.isfinite(z_err[g]) else None),
        )
        for g in range(wts.n)
    ]
    summary = MoranSummary(
        global_i=global_i,
        regression_slope=slope,
        intercept=intercept,
        pearson_r=r,
        p_value=p,
    )
    return points, summary


def moran_permutation(
    values: np.ndarray,
    wts: SpatialWeights,
    n_perm: int = 999,
    seed: int = 0,
) -> tuple[float, np.ndarray, float]:
    """Seeded permutation null for the global statistic.

    Returns (observed I, permuted I values, two-sided rank p-value
    (1 + #{|I_perm| >= |I_obs|}) / (n_perm + 1)).
    """
    values = np.asarray(values, dtype=np.float64)
    i_obs = moran_global(values, wts)
    rng = np.random.default_rng(seed)
    z = values - values.mean()
    den = float(z @ z)
    perms = np.empty(n_perm)
    for k in range(n_perm):
        zp = rng.permutation(z)
        perms[k] = (wts.n / wts.s0) * float(zp @ (wts.matrix @ zp)) / den
    p = (1.0 + float(np.sum(np.abs(perms) >= abs(i_obs)))) / (n_perm + 1.0)
    return i_obs, perms, p


def scatter_to_csv(points: list[LisaPoint]) -> str:
    lines = [SCATTER_CSV_COLUMNS]
    for p in points:
        err = "" if p.z_error is None else repr(p.z_error)
        lines.append(f"{p.region},{p.z_value!r},{p.z_lag!r},{p.lisa!r},{err}")
    return "\n".join(lines) + "\n"


def scatter_from_csv(text: str) -> list[LisaPoint]:
    """Inverse of scatter_to_csv; floats round-trip exactly via repr."""
    lines = text.strip("\n").split("\n")
    if not lines or lines[0] != SCATTER_CSV_COLUMNS:
        raise ValueError(f"bad scatter header: {lines[0] if lines else '<empty>'!r}")
    out = []
    for line in lines[1:]:
        f = line.split(",")
        if len(f) != 5:
            raise ValueError(f"bad scatter row: {line!r}")
        out.append(
            LisaPoint(
                region=int(f[0]),
                z_value=float(f[1]),
                z_lag=float(f[2]),
                lisa=float(f[3]),
                z_error=float(f[4]) if f[4] else None,
            )
        )
    return out
