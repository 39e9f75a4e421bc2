"""Pipeline stages: config in, sealed run directory out.

Each stage reads its inputs from the run directory and (re)writes its
own outputs.  All writes are deterministic functions of the config, so
re-running a stage with unchanged inputs rewrites identical bytes, and
two full runs with the same config produce byte-identical stores.
"""

from __future__ import annotations

from datetime import date
from pathlib import Path

import numpy as np

from .config import RunConfig
from .dotplot import SCALE_DIMS, arrange_hierarchy, hierarchy_store_json
from .flows import FlowTensor, aggregate, rasterize, split
from .ingest import (
    SLOTS_PER_DAY,
    CleaningReport,
    movements_csv_text,
    parse_and_clean,
    synth_generate,
)
from .metrics import (
    VSUP_ERROR_LEVELS,
    VSUP_VALUE_BINS,
    diagnostics_from_csv,
    diagnostics_to_csv,
    global_mae,
    global_rmse,
    region_metrics,
    vsup_scale,
)
from .partition import build_grid, intersection_fractions, load_zones_geojson
from .predict import WEEK_SLOTS, inject_noise, load_predictions, seasonal_naive, slotwise_mean
from .spatial import ZeroVarianceError, build_weights, lisa, moran_permutation, scatter_to_csv
from .store import CLEANING_FILE, MANIFEST_FILE, MOVEMENTS_FILE, RunStore, combo_key

STAGES = ("source", "aggregate", "predict", "evaluate", "assoc", "layout", "seal")


class StageError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage!r} failed: {message}")
        self.stage = stage


def open_store(config: RunConfig, create: bool = False) -> RunStore:
    """Open the run directory this config addresses, creating on request.

    An existing directory must carry the same canonical config; pointing
    a different config at the same run id is an error, not an overwrite.
    """
    run_id = config.resolved_run_id()
    root = Path(config.out_dir) / run_id
    if (root / MANIFEST_FILE).is_file():
        store = RunStore.open(root)
        if store.config_json != config.canonical_json():
            raise StageError("open", f"run {run_id} at {root} was built from a different config")
        return store
    if not create:
        raise StageError("open", f"no run at {root}; run 'synth' or 'ingest' first")
    return RunStore.create(config.out_dir, run_id, config.canonical_json())


def _grid_for(config: RunConfig, scale: str):
    w, h = SCALE_DIMS[scale]
    return build_grid(config.bbox, w, h)


def _read_movements(config: RunConfig, store: RunStore):
    path = store.path(MOVEMENTS_FILE)
    if not path.is_file():
        raise StageError("aggregate", "missing movements; run 'synth' or 'ingest' first")
    records, report = parse_and_clean(path, config.bbox, config.span())
    if report.rows_read != report.retained:
        raise StageError("aggregate", f"stored movements re-clean dropped rows: {report.to_json()}")
    return records


def stage_source(config: RunConfig, store: RunStore) -> CleaningReport:
    """synth or ingest: write the cleaned movement CSV and its report."""
    try:
        if config.source == "synth":
            records = synth_generate(
                config.effective_synth(),
                bbox=config.bbox,
                span_start=date.fromisoformat(config.span_start),
            )
            report = CleaningReport(rows_read=len(records), retained=len(records))
        else:
            records, report = parse_and_clean(config.movements_csv, config.bbox, config.span())
    except (OSError, ValueError) as e:
        raise StageError("source", str(e)) from e
    store.write_text(MOVEMENTS_FILE, movements_csv_text(records))
    store.write_json(CLEANING_FILE, report.to_json())
    return report


def stage_aggregate(config: RunConfig, store: RunStore) -> None:
    """Per (shape, scale): bin movements, split, write observed tensors."""
    records = _read_movements(config, store)
    slot_count = config.days * SLOTS_PER_DAY
    zones = None
    if "taz" in config.shapes:
        try:
            zones = load_zones_geojson(config.taz_file)
        except (OSError, ValueError) as e:
            raise StageError("aggregate", f"cannot load taz file {config.taz_file}: {e}") from e
    for shape in config.shapes:
        zone_result = None
        if shape == "taz":
            zone_result = aggregate(records, zones, config.span_start, slot_count)
        for scale in config.scales:
            grid = _grid_for(config, scale)
            if shape == "grid":
                result = aggregate(records, grid, config.span_start, slot_count)
                tensor = result.flow
                assigned, discarded = result.assigned, result.discarded
            else:
                fractions = intersection_fractions(zones, grid)
                tensor = rasterize(zone_result.flow, fractions, grid)
                assigned, discarded = zone_result.assigned, zone_result.discarded
            train, test = split(tensor, config.train_days, config.test_days)
            store.register_combo(shape, scale)
            store.write_combo_tensor(shape, scale, "observed_train", train)
            store.write_combo_tensor(shape, scale, "observed_test", test)
            store.write_json(
                f"{combo_key(shape, scale)}/discards.json",
                {"assigned": assigned, "discarded": discarded},
            )


def _noise_seed(config: RunConfig, shape: str, scale: str) -> int:
    # distinct stream per combo, stable under combo reordering
    return config.seed + 1000003 * (1 + config.combos().index(combo_key(shape, scale)))


def stage_predict(config: RunConfig, store: RunStore) -> None:
    test_slots = config.test_days * SLOTS_PER_DAY
    for shape in config.shapes:
        for scale in config.scales:
            try:
                train = store.read_combo_tensor(shape, scale, "observed_train")
                test = store.read_combo_tensor(shape, scale, "observed_test")
            except Exception as e:
                raise StageError("predict", f"missing observations for {combo_key(shape, scale)}: {e}") from e
            try:
                if config.predictor == "file":
                    pred = load_predictions(config.predictions[combo_key(shape, scale)], expected=test)
                elif config.predictor == "seasonal_naive":
                    observed = test if test_slots > WEEK_SLOTS else None
                    pred = seasonal_naive(train, test_slots, observed_test=observed)
                else:
                    pred = slotwise_mean(train, test_slots)
                if config.noise_sigma > 0 and config.predictor != "file":
                    pred = inject_noise(pred, config.noise_sigma, _noise_seed(config, shape, scale))
            except (OSError, ValueError) as e:
                raise StageError("predict", str(e)) from e
            store.write_combo_tensor(shape, scale, "predicted_test", pred)


def stage_evaluate(config: RunConfig, store: RunStore) -> None:
    for shape in config.shapes:
        for scale in config.scales:
            key = combo_key(shape, scale)
            try:
                obs = store.read_combo_tensor(shape, scale, "observed_test")
                pred = store.read_combo_tensor(shape, scale, "predicted_test")
            except Exception as e:
                raise StageError("evaluate", f"missing predictions for {key}: {e}") from e
            diags = region_metrics(obs, pred)
            scale_edges = vsup_scale(diags)
            store.write_text(f"{key}/diagnostics.csv", diagnostics_to_csv(diags))
            store.write_json(
                f"{key}/vsup.json",
                {
                    "value_max": scale_edges.value_max,
                    "error_max": scale_edges.error_max,
                    "value_bins": VSUP_VALUE_BINS,
                    "error_levels": VSUP_ERROR_LEVELS,
                },
            )
            store.write_json(
                f"{key}/global.json",
                {"rmse": global_rmse(obs, pred), "mae": global_mae(obs, pred)},
            )


def _read_diagnostics(store: RunStore, stage: str, shape: str, scale: str):
    rel = f"{combo_key(shape, scale)}/diagnostics.csv"
    if not store.has_file(rel):
        raise StageError(stage, f"missing diagnostics for {combo_key(shape, scale)}; run 'evaluate' first")
    return diagnostics_from_csv(store.read_text(rel))


def stage_assoc(config: RunConfig, store: RunStore) -> None:
    """Moran scatter of mean volume, error standardized alongside."""
    for shape in config.shapes:
        for scale in config.scales:
            key = combo_key(shape, scale)
            diags = _read_diagnostics(store, "assoc", shape, scale)
            w, h = SCALE_DIMS[scale]
            values = np.array([d.mean_volume for d in diags])
            errors = np.array([d.mean_abs_error for d in diags])
            wts = build_weights(w, h, "row_standardized")
            try:
                points, summary = lisa(values, wts, errors=errors)
            except ZeroVarianceError as e:
                raise StageError("assoc", f"{key}: {e}") from e
            perm = None
            if config.permutations > 0:
                _, _, p_perm = moran_permutation(values, wts, n_perm=config.permutations, seed=config.seed)
                perm = {"n_perm": config.permutations, "p_value": p_perm}
            store.write_text(f"{key}/scatter.csv", scatter_to_csv(points))
            store.write_json(
                f"{key}/assoc.json",
                {**summary.to_json(), "n": w * h, "mode": "row_standardized", "permutation": perm},
            )


def stage_layout(config: RunConfig, store: RunStore) -> None:
    for shape in config.shapes:
        diags_by_scale = {
            scale: _read_diagnostics(store, "layout", shape, scale) for scale in config.scales
        }
        arr = arrange_hierarchy(diags_by_scale, shape)
        store.write_json(f"hierarchy_{shape}.json", hierarchy_store_json(arr, diags_by_scale))


def stage_seal(config: RunConfig, store: RunStore) -> dict:
    try:
        return store.seal()
    except Exception as e:
        raise StageError("seal", str(e)) from e


def global_table(store: RunStore) -> str:
    """Fixed-width RMSE/MAE summary across built combinations."""
    lines = [f"{'combo':<16}{'rmse':>14}{'mae':>14}"]
    for key in store.combos():
        g = store.read_json(f"{key}/global.json")
        lines.append(f"{key:<16}{g['rmse']:>14.6f}{g['mae']:>14.6f}")
    return "\n".join(lines)


def run_pipeline(config: RunConfig) -> RunStore:
    """All stages in order; a failed run is removed, not left half-built."""
    store = open_store(config, create=True)
    try:
        stage_source(config, store)
        stage_aggregate(config, store)
        stage_predict(config, store)
        stage_evaluate(config, store)
        stage_assoc(config, store)
        stage_layout(config, store)
        stage_seal(config, store)
    except StageError:
        if not store.sealed:
            store.destroy()
        raise
    except Exception as e:
        if not store.sealed:
            store.destroy()
        raise StageError("run", str(e)) from e
    return store
