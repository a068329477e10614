import logging

import pytest

import experiments
import main
from utils.errors import CflViolationError, ConservationError

REAL_SETUP_LOGGING = main.setup_logging

CONFIG = """\
name = "cli"
steps = 4
snapshot_every = 2

[model]
kind = "classical"
alpha = 0.5

[grid]
n_sites = 16

[initial]
kind = "sine"
amplitude = 0.2
"""


@pytest.fixture(autouse=True)
def quiet_logging(mocker):
    return mocker.patch("main.setup_logging")


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "cli.toml"
    path.write_text(CONFIG, encoding="utf-8")
    return path


class TestParser:
    def test_requires_a_verb(self):
        with pytest.raises(SystemExit):
            main.build_parser().parse_args([])

    def test_compare_defaults_to_reference(self):
        args = main.build_parser().parse_args(["compare", "3"])
        assert args.run_b == "reference"
        assert not args.fit

    def test_overrides_left_over(self):
        args, overrides = main.build_parser().parse_known_args(
            ["run", "--config", "x.toml", "--model.theta", "0.5"])
        assert args.config == "x.toml"
        assert overrides == ["--model.theta", "0.5"]

    def test_sweep_values_cast_to_int_except_angles(self):
        assert main._sweep_values("grid_convergence", [32.0, 64.0]) == [32, 64]
        assert main._sweep_values("angle_scan", [0.5]) == [0.5]
        assert main._sweep_values("ensemble_noise", None) is None


class TestCommands:
    def test_run_succeeds(self, config_file, output_root, capsys):
        assert main.main(["run", "--config", str(config_file)]) == 0
        assert str(output_root / "cli") in capsys.readouterr().out
        assert (output_root / "cli" / "provenance.toml").exists()

    def test_run_with_override(self, config_file, output_root):
        assert main.main(["run", "--config", str(config_file), "--name", "renamed"]) == 0
        assert (output_root / "renamed").is_dir()

    def test_bad_config_exit_code(self, tmp_path, output_root):
        path = tmp_path / "bad.toml"
        path.write_text("steps = 0\n", encoding="utf-8")
        assert main.main(["run", "--config", str(path)]) == 2

    def test_missing_config_exit_code(self, tmp_path, output_root):
        assert main.main(["run", "--config", str(tmp_path / "absent.toml")]) == 2

    def test_bad_override_exit_code(self, config_file, output_root):
        assert main.main(["run", "--config", str(config_file), "stray"]) == 2

    @pytest.mark.parametrize("error, code", [
        (ConservationError("mass drift"), 3),
        (CflViolationError("dt too large", admissible_dt=0.5), 4),
    ])
    def test_error_exit_codes(self, config_file, output_root, mocker, error, code):
        mocker.patch.object(experiments.ExperimentRunner, "run", side_effect=error)
        assert main.main(["run", "--config", str(config_file)]) == code

    def test_theory_report(self, capsys, tmp_path):
        table = tmp_path / "table.csv"
        assert main.main(["theory-report", "--model.kind", "classical", "--model.alpha", "0.5",
                          "--table", str(table)]) == 0
        out = capsys.readouterr().out
        assert "theory.model = classical" in out
        assert "theory.c_s = 0.5" in out
        assert table.read_text(encoding="utf-8").startswith("rho,d_plus")

    def test_runs_listing_and_delete(self, config_file, output_root, capsys):
        main.main(["run", "--config", str(config_file)])
        capsys.readouterr()
        assert main.main(["runs"]) == 0
        listing = capsys.readouterr().out
        assert "cli" in listing and "finished" in listing

        assert main.main(["runs", "--delete", str(output_root / "cli")]) == 0
        assert not (output_root / "cli").exists()
        capsys.readouterr()
        main.main(["runs"])
        assert "cli" not in capsys.readouterr().out

    def test_compare_against_reference(self, config_file, output_root, tmp_path, capsys):
        main.main(["run", "--config", str(config_file)])
        output = tmp_path / "errors.csv"
        assert main.main(["compare", str(output_root / "cli"), "--output", str(output)]) == 0
        assert '"max_l2_error"' in capsys.readouterr().out
        assert output.exists()

    def test_unknown_run_exit_code(self, output_root):
        assert main.main(["compare", "999"]) == 2


class TestLogging:
    def test_log_file_created(self, tmp_path):
        root = logging.getLogger()
        saved, level = root.handlers[:], root.level
        try:
            REAL_SETUP_LOGGING(str(tmp_path / "logs"), verbose=True)
            assert root.level == logging.DEBUG
            logging.getLogger("QlgBurgers").info("hello")
            assert (tmp_path / "logs" / "qlg_burgers.log").exists()
        finally:
            for handler in root.handlers:
                handler.close()
            root.handlers[:] = saved
            root.setLevel(level)
