"""End-to-end checks of the four CLI verbs.

Everything runs in-process through cli.main(argv) against temp directories,
with one subprocess test proving `python -m rydeit` works. A reduced grid
and quadrature keep the simulate-heavy tests quick; accuracy at full
settings is covered elsewhere.
"""

import json
import subprocess
import sys

import numpy as np
import pytest

from rydeit import cli, spectrum, velocitymap
from rydeit.config import RunConfig
from rydeit.errors import (
    CalibrationError,
    ComputationError,
    FileFormatError,
    QuadratureError,
    RydeitError,
    ValidationError,
    exit_code_for,
)

FAST_KEYS = {
    "grid_points": "1001",
    "quadrature_points": "8001",
}


def write_config(path, **overrides):
    keys = dict(FAST_KEYS)
    keys.update({k: str(v) for k, v in overrides.items()})
    path.write_text(
        "\n".join(f"{k} = {v}" for k, v in keys.items()) + "\n", encoding="utf-8"
    )
    return str(path)


@pytest.fixture(scope="module")
def fast_cfg_file(tmp_path_factory):
    return write_config(tmp_path_factory.mktemp("cfg") / "fast.txt")


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory, fast_cfg_file):
    """One simulated default-series trace, shared by the analyze tests."""
    out = tmp_path_factory.mktemp("sim")
    rc = cli.main(
        ["simulate", "--config", fast_cfg_file, "--output-dir", str(out), "--quiet"]
    )
    assert rc == 0
    return out


class TestParserShape:
    def test_requires_subcommand(self):
        with pytest.raises(SystemExit) as info:
            cli.main([])
        assert info.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["transmogrify"])
        assert info.value.code == 2

    def test_analyze_requires_trace_argument(self):
        with pytest.raises(SystemExit) as info:
            cli.main(["analyze"])
        assert info.value.code == 2

    def test_options_work_on_either_side_of_verb(self, tmp_path, fast_cfg_file):
        d1, d2 = tmp_path / "before", tmp_path / "after"
        assert (
            cli.main(
                [
                    "--config",
                    fast_cfg_file,
                    "--output-dir",
                    str(d1),
                    "--quiet",
                    "predict-peaks",
                ]
            )
            == 0
        )
        assert (
            cli.main(
                [
                    "predict-peaks",
                    "--config",
                    fast_cfg_file,
                    "--output-dir",
                    str(d2),
                    "--quiet",
                ]
            )
            == 0
        )
        name = "pathways_n43S12.txt"
        # digest line differs because output_dir is itself a config field
        body1 = (d1 / name).read_bytes().split(b"\n", 1)[1]
        body2 = (d2 / name).read_bytes().split(b"\n", 1)[1]
        assert body1 == body2


class TestPredictPeaks:
    def test_writes_parseable_pathway_table(self, tmp_path, fast_cfg_file, system):
        rc = cli.main(
            [
                "predict-peaks",
                "--config",
                fast_cfg_file,
                "--output-dir",
                str(tmp_path),
                "--quiet",
            ]
        )
        assert rc == 0
        text = (tmp_path / "pathways_n43S12.txt").read_text()
        pathways = velocitymap.parse_pathway_table(text, system)
        assert len(pathways) == 3
        assert {p.f_intermediate for p in pathways} == {3, 4, 5}
        assert all(p.series == "S1/2" for p in pathways)

    def test_stdout_lists_pathways_and_quiet_silences(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.txt")
        assert cli.main(["predict-peaks", "--config", cfg, "--output-dir", str(tmp_path / "a")]) == 0
        loud = capsys.readouterr().out
        assert "wrote 3 pathways" in loud
        assert loud.count("F'=") == 3
        assert cli.main(["predict-peaks", "--config", cfg, "--output-dir", str(tmp_path / "b"), "--quiet"]) == 0
        assert capsys.readouterr().out == ""

    def test_resolved_config_records_digest(self, tmp_path, fast_cfg_file):
        cli.main(
            [
                "predict-peaks",
                "--config",
                fast_cfg_file,
                "--output-dir",
                str(tmp_path),
                "--quiet",
            ]
        )
        resolved = (tmp_path / "resolved_config.txt").read_text()
        cfg = RunConfig.from_file(fast_cfg_file).replace(output_dir=str(tmp_path))
        assert resolved.startswith(f"# digest={cfg.digest()}\n")
        # pathway file is stamped with the same digest
        table = (tmp_path / "pathways_n43S12.txt").read_text()
        assert f"# config_digest={cfg.digest()}" in table

    def test_seed_flag_overrides_config(self, tmp_path, fast_cfg_file):
        cli.main(
            [
                "predict-peaks",
                "--config",
                fast_cfg_file,
                "--output-dir",
                str(tmp_path),
                "--seed",
                "999",
                "--quiet",
            ]
        )
        assert "seed = 999\n" in (tmp_path / "resolved_config.txt").read_text()

    def test_both_d_series_share_one_scan(self, tmp_path, system):
        cfg = write_config(tmp_path / "c.txt", n=40, series="D3/2,D5/2")
        rc = cli.main(["predict-peaks", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert rc == 0
        # grouping walks from the least-bound series down, hence the tag order
        pathways = velocitymap.parse_pathway_table(
            (tmp_path / "pathways_n40D52D32.txt").read_text(), system
        )
        assert len(pathways) == 6
        assert {p.series for p in pathways} == {"D3/2", "D5/2"}


class TestSimulate:
    def test_trace_file_loads_with_metadata(self, sim_dir, fast_cfg_file):
        trace = spectrum.load_trace(sim_dir / "trace_n43S12.txt")
        assert trace.axis_kind == spectrum.AXIS_CALIBRATED_MHZ
        assert trace.metadata["n"] == "43"
        cfg = RunConfig.from_file(fast_cfg_file).replace(output_dir=str(sim_dir))
        assert trace.metadata["config_digest"] == cfg.digest()
        assert np.all(trace.transmission > 0) and np.all(trace.transmission <= 1)

    def test_repeat_runs_are_byte_identical(self, tmp_path):
        # noise goes through the seeded generator, so bytes must repeat
        cfg = write_config(
            tmp_path / "c.txt", sideband_enabled="true", noise_rms="2e-4"
        )
        out = tmp_path / "out"
        assert cli.main(["simulate", "--config", cfg, "--output-dir", str(out), "--quiet"]) == 0
        first = (out / "trace_n43S12.txt").read_bytes()
        assert cli.main(["simulate", "--config", cfg, "--output-dir", str(out), "--quiet"]) == 0
        assert (out / "trace_n43S12.txt").read_bytes() == first

    def test_distortion_produces_raw_axis(self, tmp_path):
        cfg = write_config(
            tmp_path / "c.txt",
            sideband_enabled="true",
            distortion_enabled="true",
            distortion_c2="8e-5",
            distortion_c3="1.2e-8",
        )
        rc = cli.main(["simulate", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert rc == 0
        trace = spectrum.load_trace(tmp_path / "trace_n43S12.txt")
        assert trace.axis_kind == spectrum.AXIS_RAW_SCAN_UNITS
        assert trace.metadata["sideband_rf_mhz"] == "50.0"


class TestAnalyze:
    def test_closed_loop_recovers_intervals(self, sim_dir, tmp_path, fast_cfg_file, capsys):
        rc = cli.main(
            [
                "analyze",
                "--config",
                fast_cfg_file,
                "--output-dir",
                str(tmp_path),
                str(sim_dir / "trace_n43S12.txt"),
            ]
        )
        assert rc == 0
        out = capsys.readouterr().out
        assert "3 peaks fitted" in out
        payload = json.loads((tmp_path / "splittings.json").read_text())
        records = payload["records"]
        # merged reports sort records by (n, kind, label)
        assert [r["label"] for r in records] == ["F4-F3:S1/2", "F5-F4:S1/2"]
        for r in records:
            assert r["kind"] == "hyperfine"
            assert abs(r["percent_bias"]) < 0.5
            assert r["flag"] == ""
        assert (tmp_path / "splittings.txt").exists()
        plot = (tmp_path / "splittings_plotdata.txt").read_text()
        assert plot.startswith("# columns: n kind label")
        assert len(plot.strip().splitlines()) == 1 + len(records)

    def test_raw_modulated_trace_is_calibrated_then_analyzed(self, tmp_path):
        """Distorted axis plus sideband ruler: the full inverse path."""
        cfg = write_config(
            tmp_path / "c.txt",
            sideband_enabled="true",
            sideband_modulation_index="1.0",
            distortion_enabled="true",
            distortion_c2="8e-5",
            distortion_c3="1.2e-8",
        )
        sim = tmp_path / "sim"
        assert cli.main(["simulate", "--config", cfg, "--output-dir", str(sim), "--quiet"]) == 0
        ana = tmp_path / "ana"
        rc = cli.main(
            [
                "analyze",
                "--config",
                cfg,
                "--output-dir",
                str(ana),
                "--quiet",
                str(sim / "trace_n43S12.txt"),
            ]
        )
        assert rc == 0
        payload = json.loads((ana / "splittings.json").read_text())
        assert len(payload["records"]) == 2
        for r in payload["records"]:
            assert abs(r["percent_bias"]) < 0.5

    def test_raw_trace_without_ruler_exits_3(self, tmp_path, capsys):
        cfg = write_config(
            tmp_path / "c.txt", distortion_enabled="true", distortion_c2="8e-5"
        )
        sim = tmp_path / "sim"
        assert cli.main(["simulate", "--config", cfg, "--output-dir", str(sim), "--quiet"]) == 0
        rc = cli.main(
            [
                "analyze",
                "--config",
                cfg,
                "--output-dir",
                str(tmp_path / "ana"),
                "--quiet",
                str(sim / "trace_n43S12.txt"),
            ]
        )
        assert rc == 3
        assert "cannot calibrate" in capsys.readouterr().err

    def test_missing_trace_file_exits_4(self, tmp_path, fast_cfg_file, capsys):
        rc = cli.main(
            [
                "analyze",
                "--config",
                fast_cfg_file,
                "--output-dir",
                str(tmp_path),
                "--quiet",
                str(tmp_path / "nope.txt"),
            ]
        )
        assert rc == 4
        assert "error:" in capsys.readouterr().err

    def test_corrupt_trace_reports_line_number(self, sim_dir, tmp_path, fast_cfg_file, capsys):
        good = (sim_dir / "trace_n43S12.txt").read_text().splitlines()
        good[40] = "not,a,number,row"
        bad = tmp_path / "bad.txt"
        bad.write_text("\n".join(good) + "\n", encoding="utf-8")
        rc = cli.main(
            [
                "analyze",
                "--config",
                fast_cfg_file,
                "--output-dir",
                str(tmp_path),
                "--quiet",
                str(bad),
            ]
        )
        assert rc == 4
        err = capsys.readouterr().err
        assert "(line 41)" in err


class TestSweepN:
    def test_range_sweeps_and_aggregates(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.txt", n=42, n_stop=43)
        rc = cli.main(["sweep-n", "--config", cfg, "--output-dir", str(tmp_path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "predicted unresolved-overlap n: 61" in out
        assert (tmp_path / "trace_n42S12.txt").exists()
        assert (tmp_path / "trace_n43S12.txt").exists()
        payload = json.loads((tmp_path / "sweep_splittings.json").read_text())
        assert [r["n"] for r in payload["records"]] == [42, 42, 43, 43]
        assert "predicted_overlap_n=61" in payload["notes"]
        for r in payload["records"]:
            assert abs(r["percent_bias"]) < 0.5

    def test_stop_zero_means_single_n(self, tmp_path, fast_cfg_file):
        rc = cli.main(["sweep-n", "--config", fast_cfg_file, "--output-dir", str(tmp_path), "--quiet"])
        assert rc == 0
        payload = json.loads((tmp_path / "sweep_splittings.json").read_text())
        assert {r["n"] for r in payload["records"]} == {43}

    def test_reversed_range_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.txt", n=50, n_stop=44)
        rc = cli.main(["sweep-n", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert rc == 2
        assert "reversed n range" in capsys.readouterr().err


class TestExitCodes:
    @pytest.mark.parametrize(
        "exc,code",
        [
            (ValidationError("x"), 2),
            (FileFormatError("x"), 4),
            (OSError("x"), 4),
            (ComputationError("x"), 3),
            (QuadratureError("x", 0j, 1j), 3),
            (CalibrationError("x"), 3),
            (RydeitError("x"), 3),
        ],
    )
    def test_mapping(self, exc, code):
        assert exit_code_for(exc) == code

    def test_invalid_config_value_exits_2(self, tmp_path, capsys):
        cfg = write_config(tmp_path / "c.txt", gamma_21_mhz="-3")
        rc = cli.main(["simulate", "--config", cfg, "--output-dir", str(tmp_path), "--quiet"])
        assert rc == 2
        # the ladder constructor owns this check, so the message names
        # the physical quantity rather than the config key
        assert "gamma_21" in capsys.readouterr().err

    def test_missing_config_file_exits_4(self, tmp_path, capsys):
        rc = cli.main(
            ["simulate", "--config", str(tmp_path / "absent.txt"), "--quiet"]
        )
        assert rc == 4
        assert "error:" in capsys.readouterr().err


def test_python_dash_m_entry_point(tmp_path, fast_cfg_file):
    proc = subprocess.run(
        [
            sys.executable,
            "-m",
            "rydeit",
            "predict-peaks",
            "--config",
            fast_cfg_file,
            "--output-dir",
            str(tmp_path),
            "--quiet",
        ],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "pathways_n43S12.txt").exists()
