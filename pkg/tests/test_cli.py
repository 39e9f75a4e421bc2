"""Exit codes, flag/env/config precedence, stage commands, exports."""

import json

import pytest

from maupscope.cli import main
from maupscope.store import RunStore, list_runs

from test_pipeline import small_synth


@pytest.fixture(autouse=True)
def no_ambient_out(monkeypatch):
    monkeypatch.delenv("MAUP_OUT", raising=False)


def tiny_args(out):
    return ["--out", str(out), "--seed", "11", "--days", "8", "--scales", "50x25"]


def write_config(path, out_dir=None, **extra):
    obj = {
        "days": 8,
        "train_days": 7,
        "test_days": 1,
        "seed": 11,
        "shapes": ["grid"],
        "scales": ["50x25"],
        "synth": small_synth(seed=11).to_json(),
        "noise_sigma": 0.2,
    }
    if out_dir is not None:
        obj["out_dir"] = str(out_dir)
    obj.update(extra)
    path.write_text(json.dumps(obj), encoding="utf-8")
    return path


class TestStageCommands:
    def test_full_stage_sequence(self, tmp_path, capsys):
        args = tiny_args(tmp_path)
        assert main(["synth", *args]) == 0
        out = capsys.readouterr().out
        assert "rows read" in out and "run-" in out
        for stage in ("aggregate", "predict", "evaluate", "assoc", "layout"):
            assert main([stage, *args]) == 0
            assert f"{stage}: ok" in capsys.readouterr().out
        assert main(["seal", *args]) == 0
        assert "seal: run-" in capsys.readouterr().out
        (store,) = list_runs(tmp_path)
        assert store.sealed

    def test_stage_before_source(self, tmp_path, capsys):
        assert main(["evaluate", *tiny_args(tmp_path)]) == 3
        assert "run 'synth' or 'ingest' first" in capsys.readouterr().err

    def test_evaluate_before_predict(self, tmp_path, capsys):
        args = tiny_args(tmp_path)
        assert main(["synth", *args]) == 0
        assert main(["aggregate", *args]) == 0
        capsys.readouterr()
        assert main(["evaluate", *args]) == 3
        assert "missing predictions" in capsys.readouterr().err

    def test_synth_deterministic_across_dirs(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(["synth", "--out", str(out), "--seed", "42", "--days", "14"]) == 0
        (ra,), (rb,) = list_runs(a), list_runs(b)
        assert ra.run_id == rb.run_id
        text = ra.read_text("movements.csv")
        assert text == rb.read_text("movements.csv")
        # re-running the stage rewrites the identical file
        assert main(["synth", "--out", str(a), "--seed", "42", "--days", "14"]) == 0
        assert ra.read_text("movements.csv") == text

    def test_days_flag_auto_split(self, tmp_path):
        assert main(["synth", "--out", str(tmp_path), "--seed", "1", "--days", "10"]) == 0
        (store,) = list_runs(tmp_path)
        cfg = store.config_json
        assert (cfg["days"], cfg["train_days"], cfg["test_days"]) == (10, 7, 3)


class TestRunCommand:
    def test_quick_profile(self, tmp_path, capsys):
        assert main(["run", "--quick", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "combo" in out and "rmse" in out and "mae" in out
        assert "grid_50x25" in out and "grid_100x50" in out
        assert "sealed run-" in out
        (store,) = list_runs(tmp_path)
        assert store.sealed
        assert store.combos() == ["grid_50x25", "grid_100x50"]

    def test_config_file_run(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path / "cfg.json")
        assert main(["run", "--config", str(cfg_path), "--out", str(tmp_path / "runs")]) == 0
        assert "grid_50x25" in capsys.readouterr().out
        (store,) = list_runs(tmp_path / "runs")
        assert store.sealed

    def test_quick_and_config_conflict(self, tmp_path, capsys):
        cfg_path = write_config(tmp_path / "cfg.json")
        code = main(["run", "--quick", "--config", str(cfg_path), "--out", str(tmp_path)])
        assert code == 2
        assert "mutually exclusive" in capsys.readouterr().err


class TestConfigErrors:
    def test_unknown_field_in_config(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        write_config(p, banana=1)
        assert main(["run", "--config", str(p), "--out", str(tmp_path)]) == 2
        assert "unknown config field" in capsys.readouterr().err

    def test_unreadable_config(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_out_dir(self, capsys):
        assert main(["synth", "--seed", "1"]) == 2
        assert "out_dir missing" in capsys.readouterr().err

    def test_bad_subcommand_flag(self):
        with pytest.raises(SystemExit) as exc:
            main(["export", "--what", "everything", "--shape", "grid", "--scale", "50x25"])
        assert exc.value.code == 2

    def test_inconsistent_split(self, tmp_path, capsys):
        code = main(["synth", "--out", str(tmp_path), "--days", "10", "--train-days", "9",
                     "--test-days", "9"])
        assert code == 2
        assert "train_days + test_days" in capsys.readouterr().err


class TestEnvPrecedence:
    def test_env_var_used_when_no_flag(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MAUP_OUT", str(tmp_path / "env_out"))
        assert main(["synth", "--seed", "1", "--days", "8"]) == 0
        assert len(list_runs(tmp_path / "env_out")) == 1

    def test_flag_beats_env(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MAUP_OUT", str(tmp_path / "env_out"))
        assert main(["synth", "--seed", "1", "--days", "8", "--out", str(tmp_path / "flag_out")]) == 0
        assert list_runs(tmp_path / "flag_out")
        assert not list_runs(tmp_path / "env_out")

    def test_flag_and_env_beat_config_field(self, tmp_path, monkeypatch):
        cfg_path = write_config(tmp_path / "cfg.json", out_dir=tmp_path / "cfg_out")
        monkeypatch.setenv("MAUP_OUT", str(tmp_path / "env_out"))
        assert main(["synth", "--config", str(cfg_path)]) == 0
        assert list_runs(tmp_path / "env_out")
        assert not list_runs(tmp_path / "cfg_out")


@pytest.fixture(scope="class")
def sealed_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp")
    assert main(["run", *tiny_args(out)]) == 0
    return out


class TestExport:
    def test_scatter_matches_store(self, sealed_dir, capsys):
        capsys.readouterr()
        assert main(["export", "--what", "scatter", "--shape", "grid", "--scale", "50x25",
                     "--out", str(sealed_dir)]) == 0
        printed = capsys.readouterr().out
        (store,) = list_runs(sealed_dir)
        assert printed == store.read_text("grid_50x25/scatter.csv")

    def test_diagnostics_header(self, sealed_dir, capsys):
        capsys.readouterr()
        assert main(["export", "--what", "diagnostics", "--shape", "grid", "--scale", "50x25",
                     "--out", str(sealed_dir)]) == 0
        head = capsys.readouterr().out.splitlines()[0]
        assert head == "region_id,mean_volume,mean_abs_error,prmse,u,corr,n_slots,undefined_reason"

    def test_layout_metric(self, sealed_dir, capsys):
        capsys.readouterr()
        assert main(["export", "--what", "layout", "--shape", "grid", "--scale", "50x25",
                     "--metric", "u", "--out", str(sealed_dir)]) == 0
        body = json.loads(capsys.readouterr().out)
        assert body["color_metric"] == "u"
        assert len(body["plots"][0]["dots"]) == 1250

    def test_missing_combo(self, sealed_dir, capsys):
        capsys.readouterr()
        assert main(["export", "--what", "scatter", "--shape", "taz", "--scale", "50x25",
                     "--out", str(sealed_dir)]) == 3

    def test_layout_scale_not_built(self, sealed_dir, capsys):
        capsys.readouterr()
        assert main(["export", "--what", "layout", "--shape", "grid", "--scale", "200x100",
                     "--out", str(sealed_dir)]) == 3

    def test_explicit_run_id(self, sealed_dir, capsys):
        (store,) = list_runs(sealed_dir)
        capsys.readouterr()
        assert main(["export", "--what", "scatter", "--shape", "grid", "--scale", "50x25",
                     "--out", str(sealed_dir), "--run", store.run_id]) == 0
        assert capsys.readouterr().out.startswith("region_id,")

    def test_ambiguous_without_run(self, tmp_path, capsys):
        RunStore.create(tmp_path, "run-a", {})
        RunStore.create(tmp_path, "run-b", {})
        assert main(["export", "--what", "scatter", "--shape", "grid", "--scale", "50x25",
                     "--out", str(tmp_path)]) == 2
        assert "pass --run" in capsys.readouterr().err
