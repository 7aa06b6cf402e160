"""Tests for the command-line surface and its exit codes."""

from __future__ import annotations

import json
import logging

import numpy as np
import pytest

from powerspec import __version__
from powerspec.config import load_config
from powerspec.datafiles import write_curve
from powerspec.errors import SingularStepError
from powerspec.main import build_parser, main, resolve_config
from powerspec.spectra import Provenance, SpectrumCurve
from powerspec.verify import CheckResult, SuiteReport


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    for handler in root.handlers:
        if handler not in handlers:
            handler.close()
    root.handlers[:] = handlers
    root.setLevel(level)


def _curve_file(tmp_path, name, values):
    curve = SpectrumCurve(
        x=np.array([0.5, 1.0, 2.0]), values=np.asarray(values), provenance=Provenance.MONTE_CARLO
    )
    (path,) = write_curve(curve, tmp_path / name, "json")
    return str(path)


class TestParser:
    def test_version(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["--version"])
        assert excinfo.value.code == 0
        assert __version__ in capsys.readouterr().out

    def test_missing_command_is_usage_error(self):
        with pytest.raises(SystemExit) as excinfo:
            main([])
        assert excinfo.value.code == 2

    def test_overrides_reach_config(self, tmp_path):
        args = build_parser().parse_args(
            ["theory", "-n", "32", "--generator", "tcue", "--grid", "linear", "--count", "5",
             "--precision", "double", "-o", str(tmp_path)]
        )
        config = resolve_config(args)
        assert config.command == "theory"
        assert config.ensemble.n == 32
        assert config.ensemble.generator == "tcue"
        assert config.grid.count == 5
        assert config.theory.precision == "double"
        assert config.output.directory == str(tmp_path)
        assert config.ensemble.realizations == 100_000

    def test_flags_override_file(self, tmp_path):
        path = tmp_path / "run.toml"
        path.write_text("[ensemble]\nn = 12\nseed = 4\n", encoding="utf-8")
        args = build_parser().parse_args(["--config", str(path), "simulate", "--seed", "9"])
        config = resolve_config(args)
        assert config.ensemble.n == 12
        assert config.ensemble.seed == 9


class TestCommands:
    def test_simulate(self, tmp_path, capsys):
        code = main(
            ["--workers", "2", "simulate", "-n", "8", "-r", "100", "--chunk-size", "25",
             "-o", str(tmp_path), "--format", "json"]
        )
        assert code == 0
        out = capsys.readouterr().out.strip()
        assert out.endswith("simulate-uncorrelated-n8.json")
        assert (tmp_path / "simulate-uncorrelated-n8.json").exists()

    def test_save_and_load_ensemble(self, tmp_path, capsys):
        out = str(tmp_path)
        common = ["-n", "6", "-r", "40", "--chunk-size", "10", "-o", out, "--format", "json"]
        assert main(["simulate", *common, "--save-ensemble"]) == 0
        saved = capsys.readouterr().out.split()[-1]
        assert saved.endswith("simulate-uncorrelated-n6.levels.csv")
        assert main(["simulate", "-o", out, "--format", "json", "--levels", saved]) == 0
        assert capsys.readouterr().out.strip().endswith("simulate-external-n6.json")

    def test_malformed_levels_file(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1.0,2.0\n1.0\n", encoding="utf-8")
        assert main(["simulate", "--levels", str(path), "-o", str(tmp_path)]) == 3

    def test_log_file_is_written(self, tmp_path, isolated_home):
        main(["theory", "-n", "8", "-o", str(tmp_path), "--format", "csv"])
        assert (isolated_home / "logs" / "powerspec.log").exists()

    def test_config_show(self, capsys):
        assert main(["config", "show"]) == 0
        out = capsys.readouterr().out
        assert "[ensemble]" in out
        assert 'engine = "dpv"' in out

    def test_config_init_default_location(self, isolated_home):
        assert main(["config", "init"]) == 0
        assert load_config(isolated_home / "config.toml").ensemble.n == 2048

    def test_config_init_explicit_path(self, tmp_path):
        target = tmp_path / "mine.toml"
        assert main(["config", "init", str(target)]) == 0
        assert target.exists()

    def test_compare_pass_and_fail(self, tmp_path, capsys):
        ref = _curve_file(tmp_path, "ref", [1.0, 2.0, 3.0])
        close = _curve_file(tmp_path, "close", [1.0, 2.0, 3.001])
        far = _curve_file(tmp_path, "far", [1.0, 2.0, 6.0])
        assert main(["compare", close, ref, "--tolerance", "0.01"]) == 0
        assert json.loads(capsys.readouterr().out)["passed"] is True
        assert main(["compare", far, ref, "--metric", "max"]) == 6

    def test_verify(self, mocker, capsys):
        report = SuiteReport("oracles", [CheckResult("toeplitz", 1e-12, 1e-8, 4)])
        mocker.patch("powerspec.experiments.run_suite", return_value=[report])
        assert main(["verify", "oracles", "--quick"]) == 0
        assert "oracles: passed" in capsys.readouterr().out


class TestExitCodes:
    def test_full_scale_refused(self, tmp_path):
        assert main(["figures", "4", "--scale", "full", "-o", str(tmp_path)]) == 2

    def test_invalid_config_file(self, tmp_path):
        path = tmp_path / "bad.toml"
        path.write_text('[theory]\nengine = "lattice"\n', encoding="utf-8")
        assert main(["--config", str(path), "theory"]) == 2

    def test_bad_worker_count(self, tmp_path):
        assert main(["--workers", "0", "simulate", "-o", str(tmp_path)]) == 2

    def test_missing_curve_file(self, tmp_path):
        assert main(["compare", str(tmp_path / "a.json"), str(tmp_path / "b.json")]) == 3

    def test_singular_step(self, mocker):
        mocker.patch(
            "powerspec.main.cmd_theory",
            side_effect=SingularStepError("Singular dPV denominator g-1", n=7, phi=1.0, zeta=1.0),
        )
        assert main(["theory", "--generator", "tcue"]) == 5

    def test_unexpected_error(self, mocker):
        mocker.patch("powerspec.main.cmd_simulate", side_effect=RuntimeError("boom"))
        assert main(["simulate"]) == 1

    def test_interrupted(self, mocker):
        mocker.patch("powerspec.main.cmd_universal", side_effect=KeyboardInterrupt)
        assert main(["universal"]) == 130
