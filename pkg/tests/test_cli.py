"""Command-line interface: exit codes, stage dispatch, stdout wiring."""

import json
import os
import shutil
import subprocess
import sys

import pytest

from bladenv import pipeline
from bladenv.cli import main
from bladenv.errors import ConvergenceError, InfeasibleRegionError

TINY = {
    "seed": 7,
    "design": {"stations": 3, "points_per_side": 24},
    "doe": {"count": 80},
    "qoi": {"kind": "linear", "direction_nonzero": 2},
    "surrogate": {"order": 2, "epsilon": 1e-8, "admm_iters": 2000},
    "subspace": {"samples": 4000},
    "sampler": {"count": 40, "burn_in": 50, "thin": 2},
    "envelope": {"buffer": "chi2"},
}


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "bladenv.json"
    path.write_text(json.dumps(TINY))
    return str(path)


def run_cli(config_path, out_dir, *args):
    return main(["--config", config_path, "--out", str(out_dir), *args])


class TestExitCodes:
    def test_missing_config_file(self, tmp_path, capsys):
        code = main(["--config", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "run"), "doe"])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_invalid_config_json(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        code = main(["--config", str(path), "--out", str(tmp_path / "run"), "doe"])
        assert code == 2
        assert "config error" in capsys.readouterr().err

    def test_bad_config_value(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"doe": {"count": -5}}))
        code = main(["--config", str(path), "--out", str(tmp_path / "run"), "doe"])
        assert code == 2

    def test_missing_upstream_artifact(self, config_path, tmp_path, capsys):
        code = run_cli(config_path, tmp_path / "run", "fit")
        assert code == 3
        err = capsys.readouterr().err
        assert "artifact error" in err
        assert "doe" in err

    def test_stale_artifact_after_seed_override(self, config_path, tmp_path,
                                                capsys):
        out = tmp_path / "run"
        assert run_cli(config_path, out, "doe") == 0
        capsys.readouterr()
        code = main(["--config", config_path, "--out", str(out),
                     "--seed", "99", "evaluate"])
        assert code == 3
        assert "stale" in capsys.readouterr().err

    def test_numerical_failure(self, config_path, tmp_path, capsys,
                               monkeypatch):
        def boom(cfg, paths):
            raise InfeasibleRegionError("no interior")

        monkeypatch.setattr(pipeline, "run_doe", boom)
        code = run_cli(config_path, tmp_path / "run", "doe")
        assert code == 4
        assert "numerical error" in capsys.readouterr().err

    def test_convergence_failure(self, config_path, tmp_path, capsys,
                                 monkeypatch):
        def boom(cfg, paths):
            raise ConvergenceError("did not settle")

        monkeypatch.setattr(pipeline, "run_doe", boom)
        assert run_cli(config_path, tmp_path / "run", "doe") == 4

    def test_nonpositive_jobs(self, config_path, tmp_path, capsys):
        code = main(["--config", config_path, "--out", str(tmp_path / "run"),
                     "--jobs", "0", "doe"])
        assert code == 2
        assert "--jobs" in capsys.readouterr().err

    def test_unknown_command(self, config_path, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            run_cli(config_path, tmp_path / "run", "polish")
        assert excinfo.value.code == 2


class TestStageDispatch:
    def test_stage_by_stage_matches_run_all(self, config_path, tmp_path,
                                            capsys):
        out = tmp_path / "run"
        for command in ("doe", "evaluate", "fit", "subspace", "sample",
                        "envelope", "gate", "report"):
            assert run_cli(config_path, out, command) == 0, command
            line = capsys.readouterr().out
            assert line.startswith(f"{command}:")
        paths = pipeline.RunPaths(str(out))
        for artifact in (paths.designs, paths.qoi, paths.surrogate,
                         paths.partition, paths.samples, paths.samples_qoi,
                         paths.profiles, paths.envelope, paths.verdicts):
            assert os.path.isfile(artifact)
        assert os.path.isdir(paths.report_dir)

    def test_run_all(self, config_path, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli(config_path, out, "run-all") == 0
        assert "run-all: artifacts" in capsys.readouterr().out
        paths = pipeline.RunPaths(str(out))
        assert os.path.isfile(paths.verdicts)
        assert os.path.isfile(os.path.join(paths.report_dir, "envelope.svg"))

    def test_rerunning_one_stage_is_cheap_and_consistent(self, config_path,
                                                         tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli(config_path, out, "run-all") == 0
        paths = pipeline.RunPaths(str(out))
        with open(paths.samples, "rb") as fh:
            before = fh.read()
        assert run_cli(config_path, out, "sample") == 0
        with open(paths.samples, "rb") as fh:
            assert fh.read() == before

    def test_gate_with_measured_profiles(self, config_path, tmp_path, capsys):
        out = tmp_path / "run"
        assert run_cli(config_path, out, "run-all") == 0
        paths = pipeline.RunPaths(str(out))
        measured = tmp_path / "measured.csv"
        # reuse the envelope mean as a perfectly conforming measurement
        from bladenv import envelope as env_mod
        from bladenv import geometry

        with open(paths.envelope) as fh:
            env = env_mod.BladeEnvelope.from_dict(json.load(fh)["payload"])
        geometry.write_profile_csv(str(measured), env.mean_profile)
        capsys.readouterr()
        code = main(["--config", config_path, "--out", str(out),
                     "gate", "--profiles", str(measured)])
        assert code == 0
        assert "gate: use" in capsys.readouterr().out
        with open(paths.verdicts) as fh:
            payload = json.load(fh)["payload"]
        sources = {entry["source"] for entry in payload["verdicts"]}
        assert "measured.csv" in sources


class TestConsoleScript:
    @pytest.mark.skipif(shutil.which("bladenv") is None,
                        reason="console script not installed")
    def test_help_runs(self):
        proc = subprocess.run(
            ["bladenv", "--help"], capture_output=True, text=True, timeout=120
        )
        assert proc.returncode == 0
        assert "run-all" in proc.stdout

    def test_module_entry_matches_package(self, config_path, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-c",
             "from bladenv.cli import main; raise SystemExit(main())",
             "--config", config_path, "--out", str(tmp_path / "run"), "doe"],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0
        assert "doe: wrote" in proc.stdout
