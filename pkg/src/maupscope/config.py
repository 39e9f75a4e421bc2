"""Run configuration: one JSON file (plus flag overrides) drives a run.

The configuration is the reproducibility unit: the run id is a hash of
the canonical config JSON, so two runs with identical settings land in
the same directory name and must produce byte-identical stores.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

from .dotplot import CANONICAL_SCALES, SCALE_DIMS
from .ingest import DEFAULT_BBOX, SynthSpec, default_synth_spec
from .partition import BBox

SHAPES = ("grid", "taz")
PREDICTORS = ("seasonal_naive", "slotwise_mean", "file")
SOURCES = ("synth", "csv")


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class RunConfig:
    days: int
    train_days: int
    test_days: int
    seed: int
    out_dir: str
    shapes: tuple[str, ...] = ("grid",)
    scales: tuple[str, ...] = ("50x25", "100x50")
    bbox: BBox = DEFAULT_BBOX
    span_start: str = "2024-01-01"
    slot_minutes: int = 30
    source: str = "synth"
    synth: SynthSpec | None = None
    movements_csv: str | None = None
    taz_file: str | None = None
    predictor: str = "seasonal_naive"
    predictions: dict[str, str] = field(default_factory=dict)  # combo key -> tensor path
    noise_sigma: float = 0.0
    permutations: int = 0
    run_id: str | None = None

    def __post_init__(self):
        if self.days < 2:
            raise ConfigError(f"need at least 2 days, got {self.days}")
        if self.train_days < 1 or self.test_days < 1:
            raise ConfigError("train_days and test_days must be positive")
        if self.train_days + self.test_days != self.days:
            raise ConfigError(
                f"train_days + test_days must equal days: {self.train_days}+{self.test_days} != {self.days}"
            )
        if self.slot_minutes != 30:
            raise ConfigError(f"only 30-minute slots are supported, got {self.slot_minutes}")
        if not self.shapes:
            raise ConfigError("at least one shape required")
        for s in self.shapes:
            if s not in SHAPES:
                raise ConfigError(f"unknown shape {s!r}; choose from {SHAPES}")
        if len(set(self.shapes)) != len(self.shapes):
            raise ConfigError("duplicate shapes")
        if not self.scales:
            raise ConfigError("at least one scale required")
        for s in self.scales:
            if s not in CANONICAL_SCALES:
                raise ConfigError(f"unknown scale {s!r}; choose from {CANONICAL_SCALES}")
        # attribution hierarchies need every ancestor scale, so scales
        # must be a contiguous ladder prefix starting at the coarsest
        if tuple(self.scales) != CANONICAL_SCALES[: len(self.scales)]:
            raise ConfigError(
                f"scales must be a contiguous prefix of {CANONICAL_SCALES}, got {self.scales}"
            )
        if self.source not in SOURCES:
            raise ConfigError(f"unknown source {self.source!r}; choose from {SOURCES}")
        if self.source == "csv" and not self.movements_csv:
            raise ConfigError("source 'csv' requires movements_csv")
        if "taz" in self.shapes and not self.taz_file:
            raise ConfigError("shape 'taz' requires taz_file")
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"unknown predictor {self.predictor!r}; choose from {PREDICTORS}")
        if self.predictor == "file":
            missing = [k for k in self.combos() if k not in self.predictions]
            if missing:
                raise ConfigError(f"predictor 'file' lacks prediction paths for {missing}")
        if self.synth is not None and self.synth.days != self.days:
            raise ConfigError(f"synth spec covers {self.synth.days} days, config says {self.days}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be nonnegative")
        if self.permutations < 0:
            raise ConfigError("permutations must be nonnegative")

    def combos(self) -> list[str]:
        return [f"{shape}_{scale}" for shape in self.shapes for scale in self.scales]

    def effective_synth(self) -> SynthSpec:
        if self.synth is not None:
            return self.synth
        return default_synth_spec(seed=self.seed, days=self.days)

    def span(self) -> tuple[str, str]:
        from datetime import date, timedelta

        start = date.fromisoformat(self.span_start)
        end = start + timedelta(days=self.days - 1)
        return (start.isoformat(), end.isoformat())

    def canonical_json(self) -> dict:
        """Everything that affects store content; excludes out_dir and run_id.

        The store must not embed its own location, or moving a run would
        break byte-for-byte comparability.
        """
        obj = {
            "days": self.days,
            "train_days": self.train_days,
            "test_days": self.test_days,
            "seed": self.seed,
            "shapes": list(self.shapes),
            "scales": list(self.scales),
            "bbox": self.bbox.to_json(),
            "span_start": self.span_start,
            "slot_minutes": self.slot_minutes,
            "source": self.source,
            "synth": self.effective_synth().to_json() if self.source == "synth" else None,
            "movements_csv": self.movements_csv,
            "taz_file": self.taz_file,
            "predictor": self.predictor,
            "predictions": dict(sorted(self.predictions.items())),
            "noise_sigma": self.noise_sigma,
            "permutations": self.permutations,
        }
        return obj

    def resolved_run_id(self) -> str:
        if self.run_id:
            return self.run_id
        digest = hashlib.sha256(
            json.dumps(self.canonical_json(), sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()
        return f"run-{digest[:12]}"


def config_from_json(obj: dict, out_dir: str | None = None) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    known = {
        "days",
        "train_days",
        "test_days",
        "seed",
        "out_dir",
        "shapes",
        "scales",
        "bbox",
        "span_start",
        "slot_minutes",
        "source",
        "synth",
        "movements_csv",
        "taz_file",
        "predictor",
        "predictions",
        "noise_sigma",
        "permutations",
        "run_id",
    }
    unknown = set(obj) - known
    if unknown:
        raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
    kwargs = dict(obj)
    if out_dir is not None:
        kwargs["out_dir"] = out_dir
    if "out_dir" not in kwargs:
        raise ConfigError("out_dir missing (config field, --out flag, or MAUP_OUT)")
    if "bbox" in kwargs and kwargs["bbox"] is not None:
        kwargs["bbox"] = BBox.from_json(kwargs["bbox"])
    else:
        kwargs.pop("bbox", None)
    if kwargs.get("synth") is not None:
        kwargs["synth"] = SynthSpec.from_json(kwargs["synth"])
    else:
        kwargs.pop("synth", None)
    for key in ("shapes", "scales"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return RunConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(path: str | Path, out_dir: str | None = None) -> RunConfig:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return config_from_json(obj, out_dir=out_dir)


def quick_config(out_dir: str, seed: int = 42) -> RunConfig:
    """CI profile: 14 synthetic days, grid shape, two coarsest scales."""
    return RunConfig(
        days=14,
        train_days=7,
        test_days=7,
        seed=seed,
        out_dir=out_dir,
        shapes=("grid",),
        scales=("50x25", "100x50"),
        source="synth",
        predictor="seasonal_naive",
        noise_sigma=0.2,
    )


def override(config: RunConfig, **kwargs) -> RunConfig:
    """Replace fields, re-running validation."""
    clean = {k: v for k, v in kwargs.items() if v is not None}
    if not clean:
        return config
    return replace(config, **clean)


__all__ = [
    "SHAPES",
    "PREDICTORS",
    "SOURCES",
    "CANONICAL_SCALES",
    "SCALE_DIMS",
    "ConfigError",
    "RunConfig",
    "config_from_json",
    "load_config",
    "quick_config",
    "override",
]
