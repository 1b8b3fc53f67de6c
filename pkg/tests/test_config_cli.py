"""Tests for the JSON config parser and the command-line interface.

CLI commands are exercised in process through ``main(argv)``; exit
codes follow the documented contract (0 ok, 1 usage/config, 2 numeric
abort, 3 I/O).
"""

import json
from pathlib import Path

import numpy as np
import pytest

from euler_spectra.cli import (
    EXIT_IO,
    EXIT_NUMERIC,
    EXIT_OK,
    EXIT_USAGE,
    main,
)
from euler_spectra.config import InitSpec, RunConfig, parse_config
from euler_spectra.errors import ConfigurationError
from euler_spectra.fields import VectorField
from euler_spectra.grid import Grid
from euler_spectra.initial import taylor_green
from euler_spectra.snapshot import write_snapshot
from euler_spectra.solver import SolverConfig


MINIMAL = {
    "n": 16,
    "initial": {"kind": "taylor_green"},
    "solver": {"t_final": 0.01},
}


def config_text(**overrides):
    doc = json.loads(json.dumps(MINIMAL))
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(doc.get(key), dict):
            doc[key].update(value)
        else:
            doc[key] = value
    return json.dumps(doc)


class TestParseConfig:
    def test_minimal_document_defaults(self):
        cfg = parse_config(config_text())
        assert cfg.n == 16
        assert cfg.initial.kind == "taylor_green"
        assert cfg.solver.dt == 1e-3
        assert cfg.solver.nu == 0.0
        assert cfg.solver.dealias is True
        assert cfg.output_dir == "out"
        assert cfg.output_every == 10
        assert cfg.snapshot_every == 0
        assert cfg.class_tolerance is None
        assert cfg.eps_floor is None

    def test_rejects_malformed_json(self):
        with pytest.raises(ConfigurationError, match="not valid JSON"):
            parse_config("{not json")

    def test_rejects_non_power_of_two(self):
        with pytest.raises(ConfigurationError, match=r"\$\.n"):
            parse_config(config_text(n=24))
        with pytest.raises(ConfigurationError, match=r"\$\.n"):
            parse_config(config_text(n=256))

    def test_rejects_unknown_top_level_key(self):
        with pytest.raises(ConfigurationError,
                           match=r"\$\.viscosity: unknown key"):
            parse_config(config_text(viscosity=0.1))

    def test_rejects_unknown_solver_key(self):
        # A typo like "viscocity" must fail, not silently use nu = 0.
        with pytest.raises(ConfigurationError,
                           match=r"\$\.solver\.viscocity: unknown key"):
            parse_config(config_text(solver={"t_final": 0.01,
                                             "viscocity": 0.1}))

    def test_rejects_wrong_types(self):
        with pytest.raises(ConfigurationError,
                           match=r"\$\.solver\.dt: expected a number"):
            parse_config(config_text(solver={"t_final": 0.01, "dt": True}))
        with pytest.raises(ConfigurationError,
                           match=r"\$\.n: expected an integer"):
            parse_config(config_text(n=16.0))
        with pytest.raises(ConfigurationError,
                           match=r"\$\.solver\.dealias: expected a boolean"):
            parse_config(config_text(solver={"t_final": 0.01, "dealias": 1}))

    def test_missing_required_keys(self):
        with pytest.raises(ConfigurationError,
                           match=r"\$\.solver\.t_final: required"):
            parse_config(json.dumps({"n": 16,
                                     "initial": {"kind": "shear"},
                                     "solver": {}}))
        with pytest.raises(ConfigurationError, match=r"\$\.n: required"):
            parse_config(json.dumps({"initial": {"kind": "shear"},
                                     "solver": {"t_final": 0.0}}))

    def test_solver_validation_carries_path(self):
        with pytest.raises(ConfigurationError, match=r"\$\.solver: dt"):
            parse_config(config_text(solver={"t_final": 0.01, "dt": -1.0}))

    def test_unknown_initial_kind(self):
        with pytest.raises(ConfigurationError, match="unknown initial kind"):
            parse_config(config_text(initial={"kind": "vortex_ring"}))

    def test_from_file_requires_path(self):
        with pytest.raises(ConfigurationError,
                           match=r"\$\.initial\.path: required"):
            parse_config(config_text(initial={"kind": "from_file"}))

    def test_random_kind_parameters(self):
        cfg = parse_config(config_text(
            initial={"kind": "random_solenoidal", "seed": 42,
                     "peak_k": 3.0, "amplitude": 2.0}))
        assert cfg.initial.seed == 42
        assert cfg.initial.peak_k == 3.0
        assert cfg.initial.amplitude == 2.0
        assert cfg.initial.slope == 2.0

    def test_abc_parameters_rejected_for_other_kinds(self):
        with pytest.raises(ConfigurationError,
                           match=r"\$\.initial\.a: unknown key"):
            parse_config(config_text(initial={"kind": "shear", "a": 2.0}))

    def test_output_cadence_bounds(self):
        with pytest.raises(ConfigurationError, match=r"\$\.output_every"):
            parse_config(config_text(output_every=0))
        with pytest.raises(ConfigurationError, match=r"\$\.snapshot_every"):
            parse_config(config_text(snapshot_every=-1))

    def test_null_tolerances_allowed(self):
        cfg = parse_config(config_text(class_tolerance=None, eps_floor=None))
        assert cfg.class_tolerance is None
        cfg = parse_config(config_text(class_tolerance=1e-8))
        assert cfg.class_tolerance == 1e-8


class TestInitSpecBuild:
    def test_generator_dispatch(self, grid16):
        spec = InitSpec(kind="taylor_green")
        built = spec.build(grid16)
        direct = taylor_green(grid16)
        for a, b in zip(built.arrays(), direct.arrays()):
            assert np.array_equal(a, b)

    def test_from_file_round_trip(self, grid16, tmp_path):
        path = tmp_path / "ic.bin"
        write_snapshot(path, taylor_green(grid16), time=0.0)
        built = InitSpec(kind="from_file", path=str(path)).build(grid16)
        direct = taylor_green(grid16)
        for a, b in zip(built.arrays(), direct.arrays()):
            assert np.max(np.abs(a - b)) < 1e-15

    def test_from_file_grid_mismatch(self, grid16, tmp_path):
        path = tmp_path / "ic.bin"
        write_snapshot(path, taylor_green(grid16), time=0.0)
        with pytest.raises(ConfigurationError, match="does not match"):
            InitSpec(kind="from_file", path=str(path)).build(Grid(8))

    def test_run_config_validates_n(self):
        with pytest.raises(ConfigurationError, match="power of two"):
            RunConfig(n=24, initial=InitSpec(kind="shear"),
                      solver=SolverConfig(dt=1e-3, t_final=0.0))


def write_config(tmp_path, **overrides):
    path = tmp_path / "run.json"
    path.write_text(config_text(**overrides))
    return str(path)


@pytest.fixture
def threads_env(monkeypatch):
    monkeypatch.setenv("EULER_SPECTRA_THREADS", "1")


class TestCmdRun:
    def test_successful_run_artifacts(self, tmp_path, threads_env):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, n=8, output_dir=str(out),
                           output_every=2,
                           snapshot_every=5,
                           solver={"t_final": 0.01, "dt": 1e-3})
        assert main(["run", "--config", cfg, "--quiet"]) == EXIT_OK
        assert (out / "timeseries.csv").exists()
        assert (out / "final.bin").exists()
        assert (out / "snapshot_00000000.bin").exists()
        assert (out / "snapshot_00000005.bin").exists()
        assert (out / "snapshot_00000010.bin").exists()
        summary = json.loads((out / "summary.json").read_text())
        assert summary["run"]["aborted"] is False
        assert summary["run"]["steps_completed"] == 10
        assert summary["class"] == "Neither"
        assert summary["envelope_containment"]["satisfied"] is True
        assert summary["stretching_exponential_bound"]["satisfied"] is True
        assert summary["epsilon_decay_bound"]["verdict"] == "inapplicable"
        assert "moment_balance_max_normalized_residual" in summary
        with open(out / "timeseries.csv") as fh:
            header = fh.readline().strip().split(",")
        assert header[:3] == ["t", "E", "H"]
        assert header[-5:] == ["env_lower", "env_upper", "bkm_integral",
                               "class_env_lower", "class_env_upper"]

    def test_output_dir_override(self, tmp_path, threads_env):
        cfg = write_config(tmp_path, n=8, output_dir=str(tmp_path / "a"),
                           solver={"t_final": 0.002, "dt": 1e-3})
        override = tmp_path / "b"
        assert main(["run", "--config", cfg, "--quiet",
                     "--output-dir", str(override)]) == EXIT_OK
        assert (override / "summary.json").exists()
        assert not (tmp_path / "a").exists()

    def test_missing_config_is_io_error(self, tmp_path):
        assert main(["run", "--config", str(tmp_path / "nope.json"),
                     "--quiet"]) == EXIT_IO

    def test_bad_config_is_usage_error(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(config_text(n=24))
        assert main(["run", "--config", str(path), "--quiet"]) == EXIT_USAGE
        assert "$.n" in capsys.readouterr().err

    def test_unwritable_output_dir(self, tmp_path, threads_env):
        blocker = tmp_path / "blocker"
        blocker.write_text("a file, not a directory")
        cfg = write_config(tmp_path, n=8,
                           output_dir=str(blocker / "sub"),
                           solver={"t_final": 0.002, "dt": 1e-3})
        assert main(["run", "--config", cfg, "--quiet"]) == EXIT_IO

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_numeric_abort_exit_code_and_partial_outputs(self, tmp_path,
                                                         threads_env, capsys):
        out = tmp_path / "out"
        cfg = write_config(tmp_path, n=8, output_dir=str(out),
                           output_every=1,
                           solver={"t_final": 200.0, "dt": 20.0})
        code = main(["run", "--config", cfg, "--quiet"])
        assert code == EXIT_NUMERIC
        assert "numeric abort" in capsys.readouterr().err
        summary = json.loads((out / "summary.json").read_text())
        assert summary["run"]["aborted"] is True
        assert summary["run"]["abort"]["step_index"] >= 1
        # The CSV retains every record up to the failure.
        lines = (out / "timeseries.csv").read_text().splitlines()
        assert len(lines) >= 2

    def test_missing_subcommand_is_usage_error(self, capsys):
        assert main([]) == EXIT_USAGE
        assert main(["frobnicate"]) == EXIT_USAGE


class TestCmdDiagnose:
    @pytest.fixture
    def snapshot_dir(self, tmp_path, threads_env):
        out = tmp_path / "snapout"
        cfg = write_config(tmp_path, n=8,
                           initial={"kind": "abc"},
                           output_dir=str(out),
                           snapshot_every=1,
                           solver={"t_final": 0.016, "dt": 2e-3})
        assert main(["run", "--config", cfg, "--quiet"]) == EXIT_OK
        paths = sorted(str(p) for p in out.glob("snapshot_*.bin"))
        assert len(paths) == 9
        return paths

    def test_record_csv_and_verdicts(self, snapshot_dir, capsys):
        assert main(["diagnose", *snapshot_dir]) == EXIT_OK
        captured = capsys.readouterr()
        rows = captured.out.strip().splitlines()
        assert rows[0].split(",")[:4] == ["t", "E", "H", "Z"]
        assert len(rows) == 1 + len(snapshot_dir)
        assert "identity Z = 2Q: pass" in captured.err
        assert "identity W = -(4/3) C3: pass" in captured.err
        assert "identity C3 = 3P: pass" in captured.err
        assert "moment balance" in captured.err
        assert "vorticity transport" in captured.err

    def test_few_snapshots_skip_series_residuals(self, snapshot_dir, capsys):
        assert main(["diagnose", *snapshot_dir[:3]]) == EXIT_OK
        err = capsys.readouterr().err
        assert "identity Z = 2Q" in err
        assert "moment balance" not in err

    def test_unsorted_times_rejected(self, snapshot_dir, capsys):
        code = main(["diagnose", snapshot_dir[2], snapshot_dir[0]])
        assert code == EXIT_USAGE
        assert "increasing time order" in capsys.readouterr().err

    def test_mixed_grids_rejected(self, snapshot_dir, tmp_path, capsys):
        other = tmp_path / "other.bin"
        write_snapshot(other, taylor_green(Grid(16)), time=99.0)
        code = main(["diagnose", snapshot_dir[0], str(other)])
        assert code == EXIT_USAGE
        assert "one resolution" in capsys.readouterr().err

    def test_missing_snapshot_is_io_error(self, tmp_path):
        assert main(["diagnose", str(tmp_path / "ghost.bin")]) == EXIT_IO

    def test_corrupt_snapshot_is_io_error(self, snapshot_dir, tmp_path):
        bad = tmp_path / "bad.bin"
        raw = bytearray(Path(snapshot_dir[0]).read_bytes())
        raw[60] ^= 0xFF
        bad.write_bytes(bytes(raw))
        assert main(["diagnose", str(bad)]) == EXIT_IO


class TestCmdClassify:
    def test_from_config(self, tmp_path, capsys):
        cfg = write_config(tmp_path, n=16)
        assert main(["classify", "--config", cfg]) == EXIT_OK
        out = capsys.readouterr().out
        assert "class: Neither" in out
        assert "min_lambda2:" in out and "max_lambda2:" in out

    def test_from_snapshot(self, tmp_path, grid16, capsys):
        path = tmp_path / "snap.bin"
        write_snapshot(path, taylor_green(grid16), time=0.0)
        assert main(["classify", str(path)]) == EXIT_OK
        assert "class: Neither" in capsys.readouterr().out

    def test_zero_field_snapshot(self, tmp_path, grid8, capsys):
        path = tmp_path / "zero.bin"
        write_snapshot(path, VectorField.zeros(grid8), time=0.0)
        assert main(["classify", str(path)]) == EXIT_OK
        out = capsys.readouterr().out
        assert "class: Neither" in out
        assert "min_lambda2: 0.0" in out
        assert "max_lambda2: 0.0" in out

    def test_synthetic_spectra_file(self, tmp_path, grid8, capsys):
        # Payload interpreted as ordered eigenvalue fields.
        shape = (grid8.n,) * 3
        spectra = VectorField.physical(grid8, (np.full(shape, 2.0),
                                               np.full(shape, 1.0),
                                               np.full(shape, -3.0)))
        path = tmp_path / "spectra.bin"
        write_snapshot(path, spectra, time=0.0)
        assert main(["classify", str(path), "--spectra"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "class: APlus" in out
        assert "min_lambda2: 1.0" in out

    def test_requires_exactly_one_input(self, tmp_path, capsys):
        cfg = write_config(tmp_path)
        assert main(["classify"]) == EXIT_USAGE
        assert main(["classify", "snap.bin", "--config", cfg]) == EXIT_USAGE

    def test_spectra_flag_needs_snapshot(self, tmp_path):
        cfg = write_config(tmp_path)
        assert main(["classify", "--config", cfg, "--spectra"]) == EXIT_USAGE


class TestDeterminism:
    def test_reruns_are_byte_identical(self, tmp_path, threads_env):
        out_a = tmp_path / "a"
        out_b = tmp_path / "b"
        cfg = write_config(
            tmp_path, n=8,
            initial={"kind": "random_solenoidal", "seed": 9, "peak_k": 1.5},
            output_every=1,
            solver={"t_final": 0.01, "dt": 1e-3})
        assert main(["run", "--config", cfg, "--quiet",
                     "--output-dir", str(out_a)]) == EXIT_OK
        assert main(["run", "--config", cfg, "--quiet",
                     "--output-dir", str(out_b)]) == EXIT_OK
        csv_a = (out_a / "timeseries.csv").read_bytes()
        csv_b = (out_b / "timeseries.csv").read_bytes()
        assert csv_a == csv_b
        assert (out_a / "final.bin").read_bytes() == \
            (out_b / "final.bin").read_bytes()
