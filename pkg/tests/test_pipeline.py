"""Stage orchestration: hashing, artifact provenance, and round trips.

Runs the whole pipeline once on a deliberately tiny linear problem and
checks every load_* against its run_* counterpart, plus the staleness
and missing-artifact diagnostics.
"""

import copy
import json
import os
import shutil

import numpy as np
import pytest

from bladenv import geometry, pipeline
from bladenv.config import PipelineConfig
from bladenv.errors import ArtifactError

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


def make_cfg(**overrides):
    raw = copy.deepcopy(TINY)
    for key, val in overrides.items():
        if isinstance(val, dict):
            raw.setdefault(key, {}).update(val)
        else:
            raw[key] = val
    return PipelineConfig.from_dict(raw)


@pytest.fixture(scope="module")
def cfg():
    return make_cfg()


@pytest.fixture(scope="module")
def run_dir(cfg, tmp_path_factory):
    """One full pipeline run shared by the read-only tests."""
    root = tmp_path_factory.mktemp("run")
    paths = pipeline.RunPaths(str(root))
    pipeline.run_all(cfg, paths)
    return paths


class TestStageHashes:
    def test_all_stages_present(self, cfg):
        hashes = pipeline.stage_hashes(cfg)
        expected = {
            "doe", "evaluate", "fit", "subspace",
            "sample", "envelope", "gate", "report",
        }
        assert set(hashes) == expected
        for h in hashes.values():
            assert isinstance(h, str) and len(h) == 16
            int(h, 16)

    def test_hashes_are_deterministic(self, cfg):
        assert pipeline.stage_hashes(cfg) == pipeline.stage_hashes(make_cfg())

    def test_doe_change_cascades_downstream(self, cfg):
        before = pipeline.stage_hashes(cfg)
        after = pipeline.stage_hashes(make_cfg(doe={"count": 81}))
        for stage in before:
            assert after[stage] != before[stage]

    def test_envelope_change_leaves_upstream_alone(self, cfg):
        before = pipeline.stage_hashes(cfg)
        after = pipeline.stage_hashes(make_cfg(envelope={"buffer": "fixed"}))
        for stage in ("doe", "evaluate", "fit", "subspace", "sample"):
            assert after[stage] == before[stage]
        for stage in ("envelope", "gate", "report"):
            assert after[stage] != before[stage]

    def test_sampler_change_leaves_fit_alone(self, cfg):
        before = pipeline.stage_hashes(cfg)
        after = pipeline.stage_hashes(make_cfg(sampler={"count": 41}))
        assert after["fit"] == before["fit"]
        assert after["subspace"] == before["subspace"]
        assert after["sample"] != before["sample"]
        assert after["envelope"] != before["envelope"]

    def test_seed_change_cascades(self, cfg):
        before = pipeline.stage_hashes(cfg)
        after = pipeline.stage_hashes(make_cfg(seed=8))
        assert after["doe"] != before["doe"]
        assert after["gate"] != before["gate"]


class TestRunPaths:
    def test_layout(self, tmp_path):
        paths = pipeline.RunPaths(str(tmp_path / "r"))
        assert paths.designs.endswith("designs.csv")
        assert paths.surrogate.endswith("surrogate.json")
        assert paths.verdicts.endswith("verdicts.json")
        assert os.path.dirname(paths.report_dir) == paths.root

    def test_ensure_creates_root(self, tmp_path):
        root = tmp_path / "deep" / "run"
        paths = pipeline.RunPaths(str(root)).ensure()
        assert os.path.isdir(paths.root)


class TestArtifactRoundTrips:
    def test_resolved_config_written(self, cfg, run_dir):
        with open(run_dir.resolved_config) as fh:
            payload = json.load(fh)
        assert payload["config"] == cfg.resolve()
        assert payload["hashes"] == pipeline.stage_hashes(cfg)

    def test_designs(self, cfg, run_dir):
        designs = pipeline.load_designs(cfg, run_dir)
        assert designs.shape == (cfg.doe.count, cfg.design.d)
        assert np.all(np.abs(designs) <= 1.0)

    def test_qoi(self, cfg, run_dir):
        values = pipeline.load_qoi(cfg, run_dir)
        assert values.shape == (cfg.doe.count,)
        assert np.all(np.isfinite(values))

    def test_surrogate_fits_the_data(self, cfg, run_dir):
        model = pipeline.load_surrogate(cfg, run_dir)
        designs = pipeline.load_designs(cfg, run_dir)
        values = pipeline.load_qoi(cfg, run_dir)
        pred = model.predict(designs)
        scale = np.linalg.norm(values)
        assert np.linalg.norm(pred - values) <= 1e-5 * scale

    def test_partition(self, cfg, run_dir):
        part = pipeline.load_partition(cfg, run_dir)
        assert part.d == cfg.design.d
        assert 1 <= part.r < part.d

    def test_samples(self, cfg, run_dir):
        part = pipeline.load_partition(cfg, run_dir)
        z = pipeline.load_samples(cfg, run_dir)
        assert z.shape == (cfg.sampler.count, part.d - part.r)

    def test_samples_qoi_nearly_invariant(self, cfg, run_dir):
        doe_values = pipeline.load_qoi(cfg, run_dir)
        sampled = pipeline.load_samples_qoi(cfg, run_dir)
        assert sampled.shape == (cfg.sampler.count,)
        # linear response: inactive moves should barely touch the output
        assert np.std(sampled) <= 0.05 * np.std(doe_values)

    def test_profile_rows(self, cfg, run_dir):
        baseline = geometry.synthetic_baseline(cfg.design.points_per_side)
        rows = np.vstack(list(pipeline.iter_profile_rows(cfg, run_dir)))
        assert rows.shape == (cfg.sampler.count, baseline.n_points)
        assert np.all(np.isfinite(rows))
        # members are small deformations of the baseline
        assert np.max(np.abs(rows - baseline.y[None, :])) < 0.1

    def test_profile_chunking(self, cfg, run_dir):
        whole = np.vstack(list(pipeline.iter_profile_rows(cfg, run_dir)))
        chunked = np.vstack(list(pipeline.iter_profile_rows(cfg, run_dir, chunk=7)))
        assert np.array_equal(whole, chunked)

    def test_envelope(self, cfg, run_dir):
        env = pipeline.load_envelope(cfg, run_dir)
        baseline = geometry.synthetic_baseline(cfg.design.points_per_side)
        assert env.n_members == cfg.sampler.count
        assert env.mean_profile.n_points == baseline.n_points
        assert 0.0 < env.zeta_use <= env.zeta_scrap

    def test_verdicts(self, cfg, run_dir):
        payload = pipeline.load_verdicts(cfg, run_dir)
        entries = payload["verdicts"]
        assert len(entries) == cfg.sampler.count
        summary = payload["summary"]
        assert sum(summary.values()) == len(entries)
        for entry in entries:
            assert entry["verdict"] in ("use", "review", "scrap")
            assert entry["source"] == "profiles.csv"
        assert [e["id"] for e in entries] == list(range(len(entries)))

    def test_report_files(self, run_dir):
        names = [
            "spectrum.svg", "spectrum.csv", "summary.svg", "summary.csv",
            "envelope.svg", "envelope.csv", "tolerance.svg", "tolerance.csv",
            "invariance.svg", "invariance.csv", "gate.svg", "gate.csv",
            "distances.svg", "distances.csv", "verdict_summary.csv",
        ]
        for name in names:
            path = os.path.join(run_dir.report_dir, name)
            assert os.path.isfile(path), name
            assert os.path.getsize(path) > 0, name


class TestProvenance:
    def test_missing_artifact_names_the_stage(self, cfg, tmp_path):
        paths = pipeline.RunPaths(str(tmp_path)).ensure()
        with pytest.raises(ArtifactError, match="doe"):
            pipeline.load_designs(cfg, paths)
        with pytest.raises(ArtifactError, match="subspace"):
            pipeline.load_partition(cfg, paths)

    def test_stale_artifact_names_the_stage(self, cfg, tmp_path):
        paths = pipeline.RunPaths(str(tmp_path)).ensure()
        pipeline.run_doe(cfg, paths)
        changed = make_cfg(doe={"count": 81})
        with pytest.raises(ArtifactError, match="stale"):
            pipeline.load_designs(changed, paths)

    def test_upstream_artifacts_survive_downstream_changes(self, cfg, run_dir):
        changed = make_cfg(sampler={"count": 41})
        designs = pipeline.load_designs(changed, run_dir)
        assert designs.shape[0] == cfg.doe.count
        with pytest.raises(ArtifactError, match="sample"):
            pipeline.load_samples(changed, run_dir)

    def test_corrupt_provenance_line(self, cfg, tmp_path):
        paths = pipeline.RunPaths(str(tmp_path)).ensure()
        pipeline.run_doe(cfg, paths)
        with open(paths.designs) as fh:
            body = fh.read().splitlines()[1:]
        with open(paths.designs, "w") as fh:
            fh.write("\n".join(body) + "\n")
        with pytest.raises(ArtifactError, match="provenance"):
            pipeline.load_designs(cfg, paths)

    def test_wrong_artifact_kind(self, cfg, tmp_path):
        paths = pipeline.RunPaths(str(tmp_path)).ensure()
        pipeline.run_doe(cfg, paths)
        with open(paths.designs) as fh:
            content = fh.read()
        with open(paths.qoi, "w") as fh:
            fh.write(content)
        with pytest.raises(ArtifactError, match="wrong artifact kind"):
            pipeline.load_qoi(cfg, paths)

    def test_corrupt_json(self, cfg, tmp_path):
        paths = pipeline.RunPaths(str(tmp_path)).ensure()
        with open(paths.surrogate, "w") as fh:
            fh.write("{not json")
        with pytest.raises(ArtifactError, match="corrupt"):
            pipeline.load_surrogate(cfg, paths)


def refine_per_side(profile):
    """Insert midpoints on each side, interpolating ordinates linearly."""
    pieces = []
    for xs, ys in (
        (profile.suction_x, profile.suction_y),
        (profile.pressure_x, profile.pressure_y),
    ):
        fine = np.sort(np.concatenate([xs, 0.5 * (xs[:-1] + xs[1:])]))
        pieces.append((fine, np.interp(fine, xs, ys)))
    x = np.concatenate([pieces[0][0], pieces[1][0]])
    y = np.concatenate([pieces[0][1], pieces[1][1]])
    return geometry.AirfoilProfile(x, y, pieces[0][0].shape[0])


class TestGateOnMeasuredProfiles:
    @pytest.fixture
    def gate_dir(self, run_dir, tmp_path):
        """Copy of the run directory so rerunning the gate stays local."""
        root = tmp_path / "copy"
        shutil.copytree(run_dir.root, root)
        return pipeline.RunPaths(str(root))

    def test_mean_profile_is_use(self, cfg, gate_dir, tmp_path):
        env = pipeline.load_envelope(cfg, gate_dir)
        path = tmp_path / "measured.csv"
        geometry.write_profile_csv(str(path), env.mean_profile)
        payload = pipeline.run_gate(cfg, gate_dir, profile_paths=[str(path)])
        entry = payload["verdicts"][-1]
        assert entry["source"] == "measured.csv"
        assert entry["verdict"] == "use"
        assert entry["zeta"] == pytest.approx(0.0, abs=1e-9)

    def test_foreign_grid_is_resampled(self, cfg, gate_dir, tmp_path):
        env = pipeline.load_envelope(cfg, gate_dir)
        fine = refine_per_side(env.mean_profile)
        assert not env.mean_profile.same_abscissae(fine)
        path = tmp_path / "fine.csv"
        geometry.write_profile_csv(str(path), fine)
        payload = pipeline.run_gate(cfg, gate_dir, profile_paths=[str(path)])
        entry = payload["verdicts"][-1]
        assert entry["verdict"] == "use"
        assert entry["zeta"] == pytest.approx(0.0, abs=1e-9)

    def test_gross_deformation_is_scrap(self, cfg, gate_dir, tmp_path):
        env = pipeline.load_envelope(cfg, gate_dir)
        warped = env.mean_profile.with_ordinates(env.mean_profile.y + 0.5)
        path = tmp_path / "warped.csv"
        geometry.write_profile_csv(str(path), warped)
        payload = pipeline.run_gate(cfg, gate_dir, profile_paths=[str(path)])
        entry = payload["verdicts"][-1]
        assert entry["verdict"] == "scrap"
        assert payload["summary"]["scrap"] >= 1

    def test_ids_continue_after_ensemble(self, cfg, gate_dir, tmp_path):
        env = pipeline.load_envelope(cfg, gate_dir)
        path = tmp_path / "m.csv"
        geometry.write_profile_csv(str(path), env.mean_profile)
        payload = pipeline.run_gate(cfg, gate_dir, profile_paths=[str(path)])
        assert payload["verdicts"][-1]["id"] == cfg.sampler.count


class TestDeterminism:
    def test_rerun_is_byte_identical(self, cfg, run_dir, tmp_path):
        other = pipeline.RunPaths(str(tmp_path / "again"))
        pipeline.run_all(cfg, other)
        for attr in (
            "resolved_config", "designs", "qoi", "surrogate", "partition",
            "samples", "samples_qoi", "profiles", "envelope", "verdicts",
        ):
            with open(getattr(run_dir, attr), "rb") as fh:
                first = fh.read()
            with open(getattr(other, attr), "rb") as fh:
                second = fh.read()
            assert first == second, attr
        for name in sorted(os.listdir(run_dir.report_dir)):
            with open(os.path.join(run_dir.report_dir, name), "rb") as fh:
                first = fh.read()
            with open(os.path.join(other.report_dir, name), "rb") as fh:
                second = fh.read()
            assert first == second, name
