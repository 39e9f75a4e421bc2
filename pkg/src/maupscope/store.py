"""Write-once run directories: tensor files plus JSON/CSV sidecars.

A run directory is the unit of reproducibility.  Stages write into it
freely until it is sealed; sealing records a checksum of every file and
freezes the directory.  Nothing here keeps timestamps, so two runs of
the same config are byte-identical trees.
"""

from __future__ import annotations

import hashlib
import json
import shutil
from pathlib import Path

from .config import SHAPES
from .dotplot import CANONICAL_SCALES
from .flows import FlowTensor, read_tensor, write_tensor

MANIFEST_FILE = "manifest.json"
SEAL_FILE = "sealed.json"
MOVEMENTS_FILE = "movements.csv"
CLEANING_FILE = "cleaning.json"

TENSOR_NAMES = ("observed_train", "observed_test", "predicted_test")

# every combo directory must hold these before the run can seal
REQUIRED_COMBO_FILES = (
    "observed_train.bin",
    "observed_test.bin",
    "predicted_test.bin",
    "diagnostics.csv",
    "scatter.csv",
    "assoc.json",
    "vsup.json",
    "global.json",
    "discards.json",
)


class StoreError(RuntimeError):
    pass


class StoreSealedError(StoreError):
    pass


def combo_key(shape: str, scale: str) -> str:
    if shape not in SHAPES:
        raise StoreError(f"unknown shape {shape!r}")
    if scale not in CANONICAL_SCALES:
        raise StoreError(f"unknown scale {scale!r}")
    return f"{shape}_{scale}"


def split_combo(key: str) -> tuple[str, str]:
    shape, _, scale = key.partition("_")
    if shape not in SHAPES or scale not in CANONICAL_SCALES:
        raise StoreError(f"malformed combo key {key!r}")
    return shape, scale


def _dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"


class RunStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self._manifest: dict | None = None

    # -- lifecycle ----------------------------------------------------

    @classmethod
    def create(cls, out_dir: str | Path, run_id: str, config_json: dict) -> "RunStore":
        root = Path(out_dir) / run_id
        store = cls(root)
        if store.sealed:
            raise StoreSealedError(f"run {run_id} already sealed at {root}")
        root.mkdir(parents=True, exist_ok=True)
        store._write_manifest({"run_id": run_id, "config": config_json, "combos": []})
        return store

    @classmethod
    def open(cls, root: str | Path) -> "RunStore":
        store = cls(root)
        if not (store.root / MANIFEST_FILE).is_file():
            raise StoreError(f"no run at {store.root} (missing {MANIFEST_FILE})")
        return store

    @property
    def sealed(self) -> bool:
        return (self.root / SEAL_FILE).is_file()

    def _guard(self) -> None:
        if self.sealed:
            raise StoreSealedError(f"run at {self.root} is sealed; writes are not allowed")

    def destroy(self) -> None:
        """Remove the whole run directory; refuses for sealed runs."""
        self._guard()
        if self.root.is_dir():
            shutil.rmtree(self.root)

    # -- manifest -----------------------------------------------------

    def manifest(self) -> dict:
        if self._manifest is None:
            try:
                self._manifest = json.loads((self.root / MANIFEST_FILE).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise StoreError(f"cannot read manifest at {self.root}: {e}") from e
        return self._manifest

    def _write_manifest(self, manifest: dict) -> None:
        self._guard()
        (self.root / MANIFEST_FILE).write_text(_dump_json(manifest), encoding="utf-8")
        self._manifest = manifest

    @property
    def run_id(self) -> str:
        return self.manifest()["run_id"]

    @property
    def config_json(self) -> dict:
        return self.manifest()["config"]

    def combos(self) -> list[str]:
        return list(self.manifest()["combos"])

    def shapes(self) -> list[str]:
        present = {split_combo(k)[0] for k in self.combos()}
        return [s for s in SHAPES if s in present]

    def scales(self) -> list[str]:
        present = {split_combo(k)[1] for k in self.combos()}
        return [s for s in CANONICAL_SCALES if s in present]

    def has_combo(self, shape: str, scale: str) -> bool:
        return combo_key(shape, scale) in self.combos()

    def register_combo(self, shape: str, scale: str) -> None:
        key = combo_key(shape, scale)
        manifest = self.manifest()
        if key in manifest["combos"]:
            return
        combos = manifest["combos"] + [key]
        combos.sort(key=lambda k: (SHAPES.index(split_combo(k)[0]), CANONICAL_SCALES.index(split_combo(k)[1])))
        self._write_manifest({**manifest, "combos": combos})

    # -- files --------------------------------------------------------

    def path(self, rel: str) -> Path:
        return self.root / rel

    def combo_dir(self, shape: str, scale: str) -> Path:
        return self.root / combo_key(shape, scale)

    def has_file(self, rel: str) -> bool:
        return (self.root / rel).is_file()

    def write_text(self, rel: str, text: str) -> None:
        self._guard()
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text, encoding="utf-8")

    def read_text(self, rel: str) -> str:
        try:
            return (self.root / rel).read_text(encoding="utf-8")
        except OSError as e:
            raise StoreError(f"missing store file {rel}: {e}") from e

    def write_json(self, rel: str, obj) -> None:
        self.write_text(rel, _dump_json(obj))

    def read_json(self, rel: str):
        try:
            return json.loads(self.read_text(rel))
        except json.JSONDecodeError as e:
            raise StoreError(f"corrupt JSON in {rel}: {e}") from e

    def write_combo_tensor(self, shape: str, scale: str, name: str, tensor: FlowTensor) -> None:
        if name not in TENSOR_NAMES:
            raise StoreError(f"unknown tensor name {name!r}")
        self._guard()
        d = self.combo_dir(shape, scale)
        d.mkdir(parents=True, exist_ok=True)
        write_tensor(tensor, d / f"{name}.bin")

    def read_combo_tensor(self, shape: str, scale: str, name: str) -> FlowTensor:
        if name not in TENSOR_NAMES:
            raise StoreError(f"unknown tensor name {name!r}")
        p = self.combo_dir(shape, scale) / f"{name}.bin"
        if not p.is_file():
            raise StoreError(f"missing tensor {p.relative_to(self.root)}")
        return read_tensor(p)

    # -- sealing ------------------------------------------------------

    def _iter_files(self) -> list[str]:
        out = []
        for p in sorted(self.root.rglob("*")):
            if p.is_file() and p.name != SEAL_FILE:
                out.append(p.relative_to(self.root).as_posix())
        return out

    def _missing_for_seal(self) -> list[str]:
        missing = []
        for base in (MANIFEST_FILE, MOVEMENTS_FILE, CLEANING_FILE):
            if not self.has_file(base):
                missing.append(base)
        for key in self.combos():
            for name in REQUIRED_COMBO_FILES:
                rel = f"{key}/{name}"
                if not self.has_file(rel):
                    missing.append(rel)
        for shape in self.shapes():
            rel = f"hierarchy_{shape}.json"
            if not self.has_file(rel):
                missing.append(rel)
        return missing

    def seal(self) -> dict:
        """Checksum every file and freeze the run.

        Idempotent: sealing a sealed run re-verifies and returns the
        existing record instead of failing.
        """
        if self.sealed:
            bad = self.verify()
            if bad:
                raise StoreError(f"sealed run fails verification: {bad}")
            return json.loads((self.root / SEAL_FILE).read_text(encoding="utf-8"))
        if not self.combos():
            raise StoreError("nothing to seal: no (shape, scale) combination was built")
        missing = self._missing_for_seal()
        if missing:
            raise StoreError(f"cannot seal, missing file(s): {missing}")
        files = {}
        for rel in self._iter_files():
            files[rel] = hashlib.sha256((self.root / rel).read_bytes()).hexdigest()
        record = {"run_id": self.run_id, "files": files}
        (self.root / SEAL_FILE).write_text(_dump_json(record), encoding="utf-8")
        return record

    def verify(self) -> list[str]:
        """Relative paths whose bytes no longer match the seal record."""
        if not self.sealed:
            raise StoreError("run is not sealed")
        record = json.loads((self.root / SEAL_FILE).read_text(encoding="utf-8"))
        bad = []
        for rel, digest in record["files"].items():
            p = self.root / rel
            if not p.is_file() or hashlib.sha256(p.read_bytes()).hexdigest() != digest:
                bad.append(rel)
        for rel in self._iter_files():
            if rel not in record["files"]:
                bad.append(rel)
        return sorted(bad)


def list_runs(out_dir: str | Path) -> list[RunStore]:
    out = Path(out_dir)
    stores = []
    if out.is_dir():
        for child in sorted(out.iterdir()):
            if child.is_dir() and (child / MANIFEST_FILE).is_file():
                stores.append(RunStore.open(child))
    return stores


def project_hierarchy(stored: dict, metric: str, up_to_scale: str | None = None) -> dict:
    """Single-metric view of a stored hierarchy.

    The store keeps one copy of the dot geometry with all three metric
    values per dot; consumers pick a metric (color_value) and optionally
    truncate to the ladder prefix ending at up_to_scale.
    """
    if metric not in ("prmse", "u", "corr"):
        raise ValueError(f"unknown metric {metric!r}")
    scales = list(stored["scales"])
    if up_to_scale is not None:
        if up_to_scale not in scales:
            raise ValueError(f"scale {up_to_scale!r} not in hierarchy scales {scales}")
        scales = scales[: scales.index(up_to_scale) + 1]
    keep = set(scales)
    plots = []
    for plot in stored["plots"]:
        if plot["scale"] not in keep:
            continue
        dots = [
            {
                "region_id": d["region_id"],
                "x": d["x"],
                "y": d["y"],
                "diameter": d["diameter"],
                "color_value": d["metrics"][metric],
            }
            for d in plot["dots"]
        ]
        plots.append(
            {
                "scale": plot["scale"],
                "subset_index": plot["subset_index"],
                "W": plot["W"],
                "H": plot["H"],
                "dots": dots,
            }
        )
    child_map = {s: m for s, m in stored["child_map"].items() if s in keep and s != scales[-1]}
    return {
        "shape": stored["shape"],
        "scales": scales,
        "color_metric": metric,
        "plots": plots,
        "child_map": child_map,
    }
