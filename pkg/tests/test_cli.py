"""
End-to-end tests for the command line.
"""
import math

import numpy as np
import pytest
import yaml

from pwinterp.cli import build_parser, main, parse_overrides
from pwinterp.errors import ConfigError
from pwinterp.io_formats import read_table


def run(conf_dir, command, out_dir, *extra):
    return main([command, str(conf_dir / f"{command}.conf"), "--output-dir", str(out_dir), *extra])


def summary(out_dir):
    return yaml.safe_load((out_dir / "summary.yaml").read_text())


class TestParser:
    """Test argument parsing"""

    def test_unknown_command(self):
        """Test that an unknown command exits with code 2."""
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["frobnicate", "x.conf"])
        assert exc.value.code == 2

    def test_overrides(self):
        """Test parsing of --set overrides."""
        assert parse_overrides(["N = 5", "epsilon=0.25"]) == {"N": "5", "epsilon": "0.25"}
        with pytest.raises(ConfigError):
            parse_overrides(["N"])


class TestCommands:
    """Run bundled configurations end to end"""

    def test_control_solve(self, conf_dir, tmp_path):
        """Test the control-solve command against the closed form."""
        out = tmp_path / "out"
        assert run(conf_dir, "control-solve", out) == 0
        results = summary(out)["results"]
        assert results["norm_squared"] == pytest.approx(2 / (1 - math.exp(-2.0)), rel=1e-8)
        table = read_table(out / "control_signal.csv", 3)
        assert table[-1, 1] == pytest.approx(1 / ((1 - math.exp(-2.0)) / 2), rel=1e-10)

    def test_summary_records_inputs(self, conf_dir, tmp_path):
        """Test that the summary records inputs and their hashes."""
        out = tmp_path / "out"
        assert run(conf_dir, "density", out) == 0
        content = summary(out)
        assert content["command"] == "density"
        assert content["version"] == "0.1.0"
        assert len(content["inputs"]["nodes_file"]["sha256"]) == 64
        assert content["results"]["verdict"] in ("sufficient", "inconclusive", "violates_necessary")

    def test_analyze_sequence(self, conf_dir, tmp_path):
        """Test the analyze-sequence products table."""
        out = tmp_path / "out"
        assert run(conf_dir, "analyze-sequence", out) == 0
        table = read_table(out / "carleson_products.csv", 5)
        assert len(table) == 101
        assert np.all(table[:, 3] <= 1.0)

    def test_carleson_measure(self, conf_dir, tmp_path):
        """Test the carleson-measure command."""
        out = tmp_path / "out"
        assert run(conf_dir, "carleson-measure", out) == 0
        assert summary(out)["results"]["carleson_measure_constant"] == pytest.approx(2.0)

    def test_mcphail_check(self, conf_dir, tmp_path):
        """Test the mcphail-check command on a merging sequence."""
        out = tmp_path / "out"
        assert run(conf_dir, "mcphail-check", out) == 0
        results = summary(out)["results"]
        assert results["nodes_used"] == 21
        assert results["satisfied"] is False

    def test_build_multiplier(self, conf_dir, tmp_path):
        """Test the build-multiplier command with an override."""
        out = tmp_path / "out"
        assert run(conf_dir, "build-multiplier", out, "--set", "epsilon=1") == 0
        results = summary(out)["results"]
        assert results["normalization"] == pytest.approx(4.5046, abs=1e-3)
        assert results["H_at_zero"] == pytest.approx(1.0, abs=1e-10)

    def test_control_simulate_free_decay(self, conf_dir, tmp_path):
        """Test free decay through control-simulate."""
        out = tmp_path / "out"
        assert run(conf_dir, "control-simulate", out) == 0
        endpoint = summary(out)["results"]["endpoint"]
        assert endpoint["x0"][0] == pytest.approx(math.exp(-1.0))
        assert endpoint["x3"][0] == pytest.approx(0.0)

    def test_solve_interpolation(self, conf_dir, tmp_path):
        """Test the solve-interpolation command."""
        out = tmp_path / "out"
        assert run(conf_dir, "solve-interpolation", out) == 0
        results = summary(out)["results"]
        assert results["node_residual"] < 1e-8
        assert results["weighting"] == "canonical"
        assert (out / "interpolant_samples.csv").exists()


class TestExitCodes:
    """Test error mapping and all-or-nothing output"""

    def test_missing_config(self, tmp_path):
        """Test the exit code for a missing configuration."""
        assert main(["density", str(tmp_path / "absent.conf"), "--output-dir", str(tmp_path)]) == 3

    def test_parameter_range(self, conf_dir, tmp_path):
        """Test the exit code for an out-of-range parameter."""
        out = tmp_path / "out"
        assert run(conf_dir, "density", out, "--set", "epsilon=-1") == 4
        assert not out.exists()

    def test_complex_nodes_need_manifest(self, conf_dir, tmp_path):
        """Test the exit code when complex nodes lack a manifest."""
        out = tmp_path / "out"
        assert run(conf_dir, "build-family", out, "--set", "generator=shifted-integers",
                   "--set", "shift_im=1", "--set", "N=3") == 6
        assert not out.exists()

    def test_uncontrollable_mode(self, tmp_path):
        """Test the exit code for an uncontrollable mode."""
        (tmp_path / "system.csv").write_text("n,re,im,bre,bim\n0,1,0,1,0\n1,2,0,0,0\n")
        (tmp_path / "x1.csv").write_text("index,re,im\n1,1,0\n")
        (tmp_path / "run.conf").write_text(
            "command = control-solve\nsystem_file = system.csv\nx1_file = x1.csv\nhorizon = 1\n"
        )
        out = tmp_path / "out"
        assert main(["control-solve", str(tmp_path / "run.conf"), "--output-dir", str(out)]) == 7
        assert not out.exists()


class TestDeterminism:
    """Test reproducibility of randomised commands"""

    def test_norm_study_repeats(self, conf_dir, tmp_path):
        """Test that a seeded norm study repeats byte for byte."""
        texts = []
        for name in ("first", "second"):
            out = tmp_path / name
            assert run(conf_dir, "norm-study", out, "--seed", "5", "--set", "N=6",
                       "--set", "trials=3") == 0
            texts.append((out / "norm_ratios.csv").read_text())
        assert texts[0] == texts[1]
