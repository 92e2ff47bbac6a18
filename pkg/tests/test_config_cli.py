import hashlib

import pytest
import yaml

from superosc.cli import EXIT_CONFIG, EXIT_OK, EXIT_PHYSICS, main, read_manifest
from superosc.config import PRESETS, ConfigError, ScenarioConfig, load_config

TINY = {"n_order": 8, "alpha": 1.5, "window_half_width": 2.0, "open_duration": 2.0}


def _write(path, values):
    path.write_text(yaml.safe_dump(values))
    return str(path)


def test_presets():
    assert load_config(env={}).n_order == 100
    weak = load_config(preset="weak", env={})
    assert (weak.n_order, weak.alpha, weak.window_half_width, weak.open_duration) == (25, 2.0, 5.0, 5.0)
    assert set(PRESETS) == {"default", "weak"}


def test_precedence_file_env_override(tmp_path):
    path = _write(tmp_path / "c.yaml", {"window_half_width": 6.0, "open_duration": 3.0})
    env = {"SUPEROSC_OPEN_DURATION": "4.0"}
    cfg = load_config(path, env=env, threads=2)
    assert (cfg.window_half_width, cfg.open_duration, cfg.threads) == (6.0, 4.0, 2)


def test_yaml_round_trip_and_hash(tmp_path):
    cfg = load_config(env={}, **TINY)
    text = cfg.to_yaml()
    assert "# [a] release window half-width L" in text
    (tmp_path / "c.yaml").write_text(text)
    back = load_config(str(tmp_path / "c.yaml"), env={})
    assert back == cfg and back.hash() == cfg.hash()
    assert cfg.with_overrides(out_dir="elsewhere", threads=4).hash() == cfg.hash()
    assert cfg.with_overrides(open_duration=3.0).hash() != cfg.hash()


@pytest.mark.parametrize("bad", [{"window_half_width": 0.0}, {"open_duration": -1.0},
                                 {"n_order": 1000}, {"alpha": 4.005}, {"nonsense": 1},
                                 {"opener_shape": "square"}, {"tau_step": 1.0}])
def test_invalid_configs_rejected(bad):
    with pytest.raises(ConfigError):
        load_config(env={}, **bad)


def test_bad_yaml_rejected(tmp_path):
    (tmp_path / "c.yaml").write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "c.yaml"), env={})


def test_frozen_dataclass():
    with pytest.raises(Exception):
        ScenarioConfig().alpha = 3.0


def _files(out, skip=("manifest.txt",)):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in out.iterdir()
            if p.name not in skip}


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    cfg = _write(base / "tiny.yaml", TINY)
    out = base / "out"
    codes = [main(["prepare", "--config", cfg, "--out", str(out)]),
             main(["run", "--config", cfg, "--out", str(out)]),
             main(["analyze", "--config", cfg, "--out", str(out)])]
    return base, cfg, out, codes


def test_pipeline_stages_and_manifest(tiny_run):
    _, _, out, codes = tiny_run
    assert codes[0] == EXIT_OK and all(c in (EXIT_OK, EXIT_PHYSICS) for c in codes)
    lines = (out / "manifest.txt").read_text().splitlines()
    listed = {ln.split()[1]: ln.split()[3] for ln in lines if ln.startswith("file:") and ln.split()[2] != "-"}
    assert listed == _files(out)
    state = read_manifest(out)
    assert set(state["stages"]) == {"prepare", "run", "analyze"}
    for name in ("report.txt", "dist_total_final.csv", "char_opener.csv", "fig2_photon.svg"):
        assert (out / name).exists()


def test_figures_carry_config_hash(tiny_run):
    _, cfg, out, _ = tiny_run
    h = load_config(cfg, env={}).hash()
    for svg in out.glob("*.svg"):
        assert f"config_hash={h}" in svg.read_text()


def test_outputs_are_deterministic(tiny_run):
    base, cfg, out, _ = tiny_run
    again = base / "again"
    for stage in ("prepare", "run", "analyze"):
        main([stage, "--config", cfg, "--out", str(again)])
    # config.yaml records the output directory, everything else must match byte for byte
    skip = ("manifest.txt", "config.yaml")
    assert _files(again, skip) == _files(out, skip)


def test_report_subcommand(tiny_run, capsys):
    _, cfg, out, codes = tiny_run
    code = main(["report", "--config", cfg, "--out", str(out)])
    text = capsys.readouterr().out
    assert "total_energy_l1:" in text and "all.pass:" in text
    assert code == codes[2]


def test_missing_artifacts_and_bad_config_exit_3(tmp_path):
    cfg = _write(tmp_path / "tiny.yaml", TINY)
    assert main(["run", "--config", cfg, "--out", str(tmp_path / "empty")]) == EXIT_CONFIG
    assert main(["analyze", "--config", cfg, "--out", str(tmp_path / "empty")]) == EXIT_CONFIG
    assert main(["report", "--config", cfg, "--out", str(tmp_path / "empty")]) == EXIT_CONFIG
    bad = _write(tmp_path / "bad.yaml", {**TINY, "window_half_width": 0.0})
    assert main(["prepare", "--config", bad, "--out", str(tmp_path / "b")]) == EXIT_CONFIG


def test_sweep_writes_table(tmp_path):
    cfg = _write(tmp_path / "tiny.yaml", TINY)
    code = main(["sweep", "--config", cfg, "--out", str(tmp_path / "sw"), "--axis", "T", "--values", "1,2"])
    assert code in (EXIT_OK, EXIT_PHYSICS)
    rows = (tmp_path / "sw" / "sweep_T.csv").read_text().splitlines()
    assert len(rows) == 3
