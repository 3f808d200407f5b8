import numpy as np
import pytest

from flowshortcuts.cli import main
from flowshortcuts.io import read_csv, read_manifest
from flowshortcuts.pipeline import HARMONIC_ESE, RAZAVY

SMALL_ESE = HARMONIC_ESE.replace("n_particles = 100000", "n_particles = 4000").replace(
    "n_points = 1024", "n_points = 256")


def run(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def test_eigensolve_and_flow(tmp_path, capsys):
    code, out = run(["eigensolve", "--grid", "256", "--out", str(tmp_path)], capsys)
    assert code == 0
    cols, meta = read_csv(tmp_path / "eigensolve_energies.csv")
    assert np.allclose(cols["energy"], -2.0)
    assert (tmp_path / "eigensolve_eigenstates.csv").exists()
    assert meta["setting"] == "quantum"
    code, _ = run(["flow", "--grid", "256", "--out", str(tmp_path)], capsys)
    assert code == 0
    cols, _ = read_csv(tmp_path / "flow_flow.csv")
    assert {"t", "q", "v", "a", "valid"} <= set(cols)
    assert read_manifest(tmp_path / "flow.manifest.json")["status"] == "ok"


def test_shortcut_kind_override(tmp_path, capsys):
    code, _ = run(["shortcut", "--grid", "256", "--kind", "cd", "--out", str(tmp_path)], capsys)
    assert code == 0
    manifest = read_manifest(tmp_path / "shortcut.manifest.json")
    assert manifest["config"]["shortcut"] == "cd"
    code, out = run(["shortcut", "--grid", "256", "--kind", "none", "--out", str(tmp_path)], capsys)
    assert code == 2 and "shortcut" in out.err


def test_evolve_writes_fidelity(tmp_path, capsys):
    code, out = run(["evolve", "--grid", "512", "--dt", "5e-5", "--out", str(tmp_path)], capsys)
    assert code == 0
    cols, _ = read_csv(tmp_path / "evolve_fidelity.csv")
    assert cols["fidelity"][-1] >= 0.99
    assert "final_fidelity" in out.out


def test_validate(capsys):
    code, out = run(["validate"], capsys)
    assert code == 0 and "PASS" in out.out


def test_missing_config_is_config_error(tmp_path, capsys):
    code, out = run(["run", str(tmp_path / "nope.toml")], capsys)
    assert code == 2 and "config error" in out.err


def test_setting_mismatch(tmp_path, capsys):
    path = tmp_path / "q.toml"
    path.write_text(RAZAVY)
    code, out = run(["classical", str(path), "--out", str(tmp_path)], capsys)
    assert code == 2 and "classical" in out.err


def test_module_error_exit(tmp_path, capsys):
    path = tmp_path / "narrow.toml"
    path.write_text(RAZAVY.replace("q_min = -4.0", "q_min = -1.0").replace("q_max = 4.0", "q_max = 1.0"))
    code, out = run(["eigensolve", str(path), "--out", str(tmp_path)], capsys)
    assert code == 3 and "error" in out.err


def test_stochastic_deterministic(tmp_path, capsys):
    path = tmp_path / "ese.toml"
    path.write_text(SMALL_ESE)
    for name in ("a", "b"):
        code, _ = run(["stochastic", str(path), "--positions", "--dt", "1e-3", "--name", name,
                       "--out", str(tmp_path)], capsys)
        assert code == 0
    for suffix in ("ensemble", "positions"):
        a = (tmp_path / f"a_{suffix}.csv").read_bytes()
        b = (tmp_path / f"b_{suffix}.csv").read_bytes()
        assert a == b
    code, _ = run(["stochastic", str(path), "--seed", "99", "--dt", "1e-3", "--name", "c",
                   "--out", str(tmp_path)], capsys)
    assert (tmp_path / "c_ensemble.csv").read_bytes() != (tmp_path / "a_ensemble.csv").read_bytes()


def test_output_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("FLOWSHORTCUTS_OUTPUT_DIR", str(tmp_path / "env"))
    code, _ = run(["reproduce", "fig2", "--grid", "256"], capsys)
    assert code == 0
    assert (tmp_path / "env" / "fig2_potential.csv").exists()
    assert read_manifest(tmp_path / "env" / "fig2.manifest.json")["acceptance"]["double_to_single_well"]


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "flowshortcuts" in capsys.readouterr().out
