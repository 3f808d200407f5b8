import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from flowshortcuts.config import config_to_dict, dumps, load, loads
from flowshortcuts.errors import ConfigError
from flowshortcuts.io import (
    OUTPUT_ENV,
    RunManifest,
    atomic_write_text,
    format_csv,
    long_table,
    output_dir,
    read_csv,
    read_manifest,
    write_csv,
)
from flowshortcuts.pipeline import PRESETS, preset, validate

MINIMAL = """\
schema_version = 1
setting = "quantum"
shortcut = "cd"

[potential]
kind = "harmonic"

[schedule.kappa]
kind = "polynomial_smoothstep"
tau = 1.0
start = 1.0
end = 4.0
"""


class TestConfig:
    @pytest.mark.parametrize("name", sorted(PRESETS))
    def test_presets_roundtrip(self, name):
        cfg = preset(name)
        again = loads(dumps(cfg))
        assert config_to_dict(again) == config_to_dict(cfg)

    def test_defaults(self):
        cfg = loads(MINIMAL)
        assert cfg.tau == 1.0
        assert cfg.numerics.n_points == 1024 and cfg.numerics.scheme == "sinc"
        assert cfg.driven.params_at(1.0)["kappa"] == 4.0

    @pytest.mark.parametrize("text, where", [
        (MINIMAL + "\n[numerics]\nnpoints = 3\n", "numerics"),
        (MINIMAL.replace('kind = "harmonic"', 'kind = "harmonic"\nstiffness = 2'), "potential"),
        (MINIMAL + "\nextra = 1\n", "extra"),
        (MINIMAL.replace("tau = 1.0", "tau = 1.0\nwidth = 2"), "schedule.kappa"),
    ])
    def test_unknown_keys_named(self, text, where):
        with pytest.raises(ConfigError, match=where):
            loads(text)

    def test_syntax_error_position(self):
        with pytest.raises(ConfigError, match="line 3"):
            loads('schema_version = 1\nsetting = "quantum"\nshortcut = = 2\n')

    @pytest.mark.parametrize("edit, match", [
        (("schema_version = 1", "schema_version = 2"), "schema_version"),
        (('shortcut = "cd"', 'shortcut = "ucd"'), "shortcut"),
        (('setting = "quantum"', 'setting = "optical"'), "setting"),
        (("tau = 1.0", "tau = -1.0"), "schedule.kappa"),
        (("start = 1.0", 'start = "one"'), "schedule.kappa.start"),
    ])
    def test_invalid_values(self, edit, match):
        with pytest.raises(ConfigError, match=match):
            loads(MINIMAL.replace(*edit))

    def test_wrong_numeric_type(self):
        with pytest.raises(ConfigError, match="n_points"):
            loads(MINIMAL + '\n[numerics]\nn_points = "many"\n')

    def test_load_file(self, tmp_path):
        path = tmp_path / "exp.toml"
        path.write_text(MINIMAL)
        assert load(path).setting == "quantum"
        with pytest.raises(ConfigError):
            load(tmp_path / "missing.toml")

    def test_overrides(self):
        cfg = preset("razavy").with_overrides(seed=5, dt=1e-5, n_points=512)
        assert (cfg.numerics.seed, cfg.numerics.dt, cfg.numerics.n_points) == (5, 1e-5, 512)

    def test_validate_default_passes(self):
        report = validate(preset("razavy"))
        assert report.ok

    def test_validate_rejects_linear_start(self):
        text = MINIMAL.replace(
            'kind = "polynomial_smoothstep"\ntau = 1.0\nstart = 1.0\nend = 4.0',
            'kind = "custom_samples"\ntau = 1.0\ntimes = [0.0, 0.25, 0.5, 0.75, 1.0]\n'
            'values = [1.0, 1.75, 2.5, 3.25, 4.0]')
        report = validate(loads(text))
        assert not report.ok
        assert any("smooth" in line for line in report.lines())

    def test_validate_warns_on_asymmetric_excited_state(self):
        text = """\
schema_version = 1
setting = "quantum"
shortcut = "ff"
[potential]
kind = "morph"
[schedule.tilt]
kind = "polynomial_smoothstep"
tau = 1.0
start = 0.0
end = 2.0
[numerics]
state = 1
"""
        lines = validate(loads(text)).lines()
        assert any("no_flux" in line and "WARN" in line for line in lines)


class TestCsv:
    def test_format(self):
        text = format_csv({"t": [0.0, 0.5], "F": [1.0, 1 / 3]}, {"tool": "x"})
        assert text == "# tool: x\nt,F\n0,1\n0.5,0.333333333333\n"

    def test_roundtrip_and_atomic(self, tmp_path):
        path = write_csv(tmp_path / "a.csv", {"q": np.linspace(0, 1, 5), "v": np.arange(5.0)}, {"k": "v"})
        cols, meta = read_csv(path)
        assert meta == {"k": "v"}
        assert np.allclose(cols["q"], np.linspace(0, 1, 5))
        assert not list(tmp_path.glob(".*tmp"))
        assert b"\r" not in path.read_bytes()

    def test_length_mismatch(self, tmp_path):
        with pytest.raises(ValueError):
            write_csv(tmp_path / "b.csv", {"a": [1, 2], "b": [1]})

    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=30))
    def test_deterministic(self, values):
        cols = {"x": values}
        assert format_csv(cols) == format_csv(cols)

    def test_long_table(self):
        cols = long_table([0.0, 1.0], [0.0, 0.5, 1.0], {"v": np.arange(6.0).reshape(2, 3)})
        assert list(cols["t"]) == [0, 0, 0, 1, 1, 1]
        assert list(cols["v"]) == [0, 1, 2, 3, 4, 5]


class TestOutput:
    def test_output_dir_precedence(self, tmp_path, monkeypatch):
        monkeypatch.setenv(OUTPUT_ENV, str(tmp_path / "env"))
        assert output_dir() == tmp_path / "env"
        assert output_dir(tmp_path / "cli") == tmp_path / "cli"
        monkeypatch.delenv(OUTPUT_ENV)
        monkeypatch.chdir(tmp_path)
        assert output_dir().resolve() == (tmp_path / "results").resolve()

    def test_manifest(self, tmp_path):
        m = RunManifest("run", {"a": 1}, "0.1.0", 1.5, {"x": np.float64(2.0)}, {"ok": np.bool_(True)},
                        ["f.csv"])
        data = read_manifest(m.write(tmp_path))
        assert data["diagnostics"]["x"] == 2.0 and data["acceptance"]["ok"] is True
        assert json.loads((tmp_path / "run.manifest.json").read_text())["name"] == "run"

    def test_atomic_write_replaces(self, tmp_path):
        p = atomic_write_text(tmp_path / "x.txt", "one")
        atomic_write_text(p, "two")
        assert p.read_text() == "two"
