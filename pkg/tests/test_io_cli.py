import dataclasses
import json

import numpy as np
import pytest

from phcavity import cli
from phcavity import io as pio
from phcavity.config import (PRESETS, AnalysisSettings, ConfigError, OutputSettings, RunConfig, SolverSettings,
                             format_config, load_config, parse_config, preset)
from phcavity.fdtd.boundaries import BlochPeriodic, BoundarySpec
from phcavity.fdtd.solver import InstabilityError, Solver
from phcavity.fdtd.sources import excite_dipole_mode
from phcavity.geometry import FractionalEdgeDislocation, GeometryError, PhotonicCrystalSpec, RadiusChange, build_structure, uniform_grid
from phcavity.pipeline import AnalysisError


def tiny_config(**outputs) -> RunConfig:
    """A 2-layer, 10-cell lattice that runs in seconds."""
    return RunConfig(PhotonicCrystalSpec(10, 0.3, 0.6, num_layers=2), (RadiusChange(0.2),), name="tiny",
                     solver=SolverSettings(pass1_periods=30, settle_periods=5, measure_periods=10),
                     analysis=AnalysisSettings(window_min_a_over_lambda=0.2, window_max_a_over_lambda=0.4),
                     outputs=OutputSettings(**outputs))


# --- raw grids, hole lists, checkpoints ----------------------------------------------

def test_grid_roundtrip(tmp_path):
    arr = np.random.default_rng(0).normal(size=(4, 5, 6)).astype(np.float32)
    pio.write_grid(tmp_path / "g.raw", arr, 0.5)
    back, cell = pio.read_grid(tmp_path / "g.raw")
    assert cell == 0.5 and np.array_equal(back, arr)
    raw = (tmp_path / "g.raw").read_bytes()
    assert raw.startswith(b"4 5 6 0.5\n")
    assert len(raw) == len(b"4 5 6 0.5\n") + 4 * arr.size


def test_grid_errors(tmp_path):
    with pytest.raises(pio.FormatError):
        pio.write_grid(tmp_path / "c.raw", np.ones((2, 2, 2), complex))
    (tmp_path / "bad.raw").write_bytes(b"2 2 2 1\n" + b"\0" * 12)
    with pytest.raises(pio.FormatError):
        pio.read_grid(tmp_path / "bad.raw")


def test_hole_file_roundtrip(tmp_path):
    spec = PhotonicCrystalSpec(20, 0.275, 0.75, num_layers=2)
    hs = build_structure(spec, [RadiusChange(0.2), FractionalEdgeDislocation("x", 2)])
    pio.write_holes(tmp_path / "h.txt", hs)
    back = pio.read_holes(tmp_path / "h.txt", 20)
    assert len(back) == len(hs)
    assert np.allclose([(h.x, h.y, h.r) for h in back], [(h.x, h.y, h.r) for h in hs], atol=1e-6)


@pytest.mark.parametrize("bloch", [False, True])
def test_checkpoint_restart_matches_continuous_run(tmp_path, bloch):
    if bloch:
        ph = BlochPeriodic(np.exp(0.3j))
        bounds = BoundarySpec((ph, ph), (ph, ph))
    else:
        bounds = BoundarySpec()
    grid = uniform_grid((24, 24, 24))

    def make():
        return Solver(grid, bounds, dtype=np.float32, sources=[excite_dipole_mode(None, None, offset=(1, 2))])

    a = make()
    a.run(30)
    pio.save_checkpoint(tmp_path / "ck", a)
    b = Solver(grid, bounds, dtype=np.float32)
    pio.load_checkpoint(tmp_path / "ck", b)
    assert b.state.step == 30
    b.reset_pml()
    a.reset_pml()
    # PML memory is not part of the checkpoint; compare against a run with the same reset
    a.run(30)
    b.run(30)
    for x, y in zip(a.state.e + a.state.h, b.state.e + b.state.h):
        assert np.array_equal(x, y)
    with pytest.raises(pio.FormatError):
        pio.load_checkpoint(tmp_path / "ck", Solver(uniform_grid((26, 24, 24)), bounds))


def test_csv_helpers(tmp_path):
    rows = [{"structure_id": "s", "p": 2, "a_over_lambda": 0.2931234567891, "N0": float("inf")}]
    pio.write_csv(tmp_path / "r.csv", pio.MODE_REPORT_COLUMNS, rows)
    back = pio.read_csv(tmp_path / "r.csv")
    assert back[0]["p"] == "2" and float(back[0]["a_over_lambda"]) == pytest.approx(0.2931234568)
    assert back[0]["Q_perp"] == ""


# --- configuration ------------------------------------------------------------------------

@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_roundtrip(name):
    cfg = preset(name)
    assert parse_config(format_config(cfg)) == cfg


def test_unknown_preset():
    with pytest.raises(ConfigError, match="unknown preset"):
        preset("nope")


def test_config_error_reports_line(tmp_path):
    text = format_config(tiny_config()).replace("r_def_over_a = 0.2", "r_def_over_a = 0.35")
    path = tmp_path / "bad.ini"
    path.write_text(text)
    line = text.splitlines().index("r_def_over_a = 0.35") + 1
    with pytest.raises(ConfigError) as err:
        load_config(path)
    assert f"bad.ini:{line}:" in str(err.value) and "r_def_over_a" in str(err.value)


@pytest.mark.parametrize("edit,match", [
    (("courant = 0.5", "courant = 0.7"), "courant"),
    (("precision = float32", "precision = half"), "precision"),
    (("mode = x", "mode = z"), "mode"),
    (("a = 10", "a = ten"), "a"),
    (("[structure]", "[structur]"), "structur"),
])
def test_config_errors(edit, match):
    text = format_config(tiny_config()).replace(*edit)
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_with_parameter():
    cfg = tiny_config()
    assert cfg.with_parameter("p", 2).elongation() == 2
    assert cfg.with_parameter("num_layers", 3).spec.num_layers == 3
    with pytest.raises(GeometryError):
        cfg.with_parameter("colour", 1)
    with pytest.raises(GeometryError):
        cfg.with_parameter("n_defect", 3.0)


# --- command line -------------------------------------------------------------------------

@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = tiny_config(eps_grid=True, field_slices=("z:0",), pattern=True, probes=True, checkpoint=True)
    (root / "tiny.ini").write_text(format_config(cfg))
    codes = [cli.main(["simulate", "--config", str(root / "tiny.ini"), "--out", str(root / d)]) for d in ("a", "b")]
    return root, codes


def test_simulate_artifacts(simulated):
    root, codes = simulated
    assert codes == [0, 0]
    out = root / "a"
    for name in ("config.ini", "holes.txt", "eps.raw", "mode_report.csv", "summary.json", "pattern.csv",
                 "intensity_z0.raw", "nearfield/nearfield.json", "checkpoint/meta.json"):
        assert (out / name).exists(), name
    assert list(out.glob("probe_*.csv"))
    row = pio.read_csv(out / "mode_report.csv")[0]
    assert list(row) == list(pio.MODE_REPORT_COLUMNS)
    assert 0.2 < float(row["a_over_lambda"]) < 0.4
    assert "# farfield" in (out / "mode_report.csv").read_text()
    assert load_config(out / "config.ini") == load_config(root / "tiny.ini")


def test_simulate_is_deterministic(simulated):
    root, _ = simulated
    assert (root / "a" / "mode_report.csv").read_text() == (root / "b" / "mode_report.csv").read_text()
    assert json.loads((root / "a" / "summary.json").read_text()) == json.loads((root / "b" / "summary.json").read_text())


def test_farfield_reanalysis(simulated, tmp_path):
    root, _ = simulated
    assert cli.main(["farfield", str(root / "a" / "nearfield"), "--out", str(tmp_path)]) == 0
    row = pio.read_csv(tmp_path / "farfield.csv")[0]
    summary = json.loads((root / "a" / "summary.json").read_text())
    assert float(row["Q_farfield"]) == pytest.approx(summary["ff_Q"], rel=0.02)


def test_empty_sweep_writes_header(tmp_path):
    (tmp_path / "c.ini").write_text(format_config(tiny_config()))
    assert cli.main(["sweep", "--config", str(tmp_path / "c.ini"), "--parameter", "p", "--values", "",
                     "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "sweep.csv").read_text() == ",".join(cli.SWEEP_COLUMNS) + "\n"


def test_sweep_records_failures(tmp_path):
    (tmp_path / "c.ini").write_text(format_config(tiny_config()))
    code = cli.main(["sweep", "--config", str(tmp_path / "c.ini"), "--parameter", "r_def_over_a",
                     "--values", "0.4,0.35", "--out", str(tmp_path / "o")])
    assert code == 0
    rows = pio.read_csv(tmp_path / "o" / "sweep.csv")
    assert [r["value"] for r in rows] == ["0.35", "0.4"]
    assert all(r["status"] == "failed" and "r_def_over_a" in r["error"] for r in rows)


def test_presets_cli(capsys):
    assert cli.main(["presets", "list"]) == 0
    out = capsys.readouterr().out
    assert "table1-row1" in out and "fig4" in out
    assert cli.main(["presets", "show", "fig4"]) == 0
    assert "[sweep]" in capsys.readouterr().out


@pytest.mark.parametrize("argv", [
    ["simulate"],
    ["simulate", "no-such-preset"],
    ["simulate", "--config", "/nonexistent/file.ini"],
    ["sweep", "fig4", "--parameter", "colour", "--values", "1"],
    ["sweep", "fig4", "--values", "a,b"],
    ["presets", "show"],
])
def test_config_errors_exit_code(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv[0] != "presets" else argv) == cli.EXIT_CONFIG


@pytest.mark.parametrize("exc,code", [(InstabilityError("boom", 7), cli.EXIT_UNSTABLE),
                                      (AnalysisError("no peak"), cli.EXIT_ANALYSIS)])
def test_failure_exit_codes(monkeypatch, tmp_path, exc, code):
    def fail(*args, **kwargs):
        raise exc

    monkeypatch.setattr(cli, "run_cavity", fail)
    (tmp_path / "c.ini").write_text(format_config(tiny_config()))
    assert cli.main(["simulate", "--config", str(tmp_path / "c.ini"), "--out", str(tmp_path / "o")]) == code


def test_cli_seed_override(tmp_path):
    cfg = dataclasses.replace(tiny_config(), seed=5)
    (tmp_path / "c.ini").write_text(format_config(cfg))
    parsed = cli.build_parser().parse_args(["simulate", "--config", str(tmp_path / "c.ini"), "--seed", "9"])
    assert cli._resolve(parsed).seed == 9
