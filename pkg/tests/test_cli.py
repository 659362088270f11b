import hashlib
import io
import json

import pytest

from shipdob import cli


def run_cli(*argv):
    out = io.StringIO()
    code = cli.main(list(argv), out=out)
    return code, out.getvalue()


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


def test_validate_defaults_passes():
    code, text = run_cli("validate")
    assert code == 0
    assert "sigma       0.99986331" in text
    assert "valid" in text


def test_validate_flags_weak_gain():
    code, text = run_cli("validate", "--override", "gains.gamma=0.4")
    assert code == 1
    assert "FAIL" in text


def test_validate_warns_on_oscillatory_discretization():
    code, text = run_cli("validate", "--override", "dt=0.03")
    assert code == 0
    assert "warning" in text


@pytest.mark.parametrize("command", ["validate", "run"])
def test_unstable_discretization_exits_2(tmp_path, command):
    cfg = tmp_path / "fast.json"
    cfg.write_text(json.dumps({"gains": {"gamma": 250}, "dt": 0.1}))
    args = [command, str(cfg)] + (["--out", str(tmp_path / "o")] if command == "run" else [])
    code, _ = run_cli(*args)
    assert code == 2


def test_derive_prints_oracle_values():
    code, text = run_cli("derive")
    assert code == 0
    assert "sigma   0.9998633" in text
    assert "r_b" in text and "T M^-1" in text


@pytest.mark.parametrize(
    "argv",
    [
        ("run", "missing.json"),
        ("validate", "--override", "dt=-1"),
        ("validate", "--override", "bogus=1"),
        ("preset", "nonexistent"),
        ("frobnicate",),
    ],
)
def test_config_errors_exit_1(argv, tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    code, _ = run_cli(*argv)
    assert code == 1


def test_invalid_json_exits_1(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("validate", str(bad))[0] == 1


def test_preset_twice_same_seed_identical_outputs(tmp_path):
    outs = []
    for name in ("a", "b"):
        code, _ = run_cli(
            "preset", "severe-table3", "--seed", "7", "--override", "duration=3",
            "--out", str(tmp_path / name),
        )
        assert code == 0
        outs.append(tmp_path / name)
    for f in ("trace.csv", "metrics.json"):
        assert digest(outs[0] / f) == digest(outs[1] / f)


def test_seed_flag_and_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("OBSERVER_SEED", "7")
    run_cli("preset", "severe-table3", "--override", "duration=1", "--out", str(tmp_path / "env"))
    monkeypatch.delenv("OBSERVER_SEED")
    run_cli("preset", "severe-table3", "--seed", "7", "--override", "duration=1", "--out", str(tmp_path / "flag"))
    run_cli("preset", "severe-table3", "--override", "duration=1", "--out", str(tmp_path / "doc"))
    assert digest(tmp_path / "env" / "trace.csv") == digest(tmp_path / "flag" / "trace.csv")
    assert digest(tmp_path / "doc" / "trace.csv") != digest(tmp_path / "flag" / "trace.csv")


def test_rerun_from_manifest_is_bit_exact(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"duration": 2, "env": {"noise_enabled": True}, "seed": 11}))
    assert run_cli("run", str(cfg), "--out", str(tmp_path / "first"))[0] == 0
    manifest = tmp_path / "first" / "manifest.json"
    assert run_cli("run", str(manifest), "--out", str(tmp_path / "second"))[0] == 0
    assert digest(tmp_path / "first" / "trace.csv") == digest(tmp_path / "second" / "trace.csv")


def test_decimation_flag(tmp_path):
    code, _ = run_cli(
        "preset", "severe-table3", "--decimation", "2", "--override", "duration=1",
        "--out", str(tmp_path),
    )
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["config"]["measurement_decimation"] == 2


def test_preset_list_and_dump():
    code, text = run_cli("preset", "--list")
    assert code == 0 and "gamma-fig8" in text
    code, text = run_cli("preset", "severe-table3", "--dump")
    assert json.loads(text)["env"]["gamma_current_deg"] == 300


@pytest.mark.parametrize(
    "name,members",
    [
        ("q-sweep-fig6", ["Q_1000", "Q_10000", "Q_30000", "Q_100000"]),
        ("gamma-fig8", ["gamma_0.01", "gamma_0.1", "gamma_1", "gamma_10", "gamma_30"]),
        ("trajectory-fig1", ["uncertain", "nominal"]),
    ],
)
def test_sweep_presets_write_per_run_directories(tmp_path, name, members):
    code, _ = run_cli("preset", name, "--override", "duration=1", "--out", str(tmp_path))
    assert code == 0
    for m in members:
        assert (tmp_path / m / "manifest.json").exists()


def test_run_after_validate_never_fails_config(tmp_path):
    cfg = tmp_path / "s.json"
    cfg.write_text(json.dumps({"duration": 1, "gains": {"g1": 30, "g2": 40, "g3": 50}}))
    assert run_cli("validate", str(cfg))[0] == 0
    assert run_cli("run", str(cfg), "--out", str(tmp_path / "o"))[0] == 0
