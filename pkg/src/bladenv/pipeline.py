"""Stage orchestration over a run directory of content-addressed artifacts.

Every stage hashes its canonical inputs: the relevant resolved config
sections plus the input hashes of upstream stages.  Artifacts record
the hash they were built from, so a stage can tell a missing input
from a stale one and name the stage to rerun.  All writers are
deterministic byte for byte: fixed column orders, sorted JSON keys,
17-significant-digit floats, no timestamps.
"""

import csv
import hashlib
import json
import os

import numpy as np

from . import envelope as env_mod
from . import geometry, ingest, sampler, subspace, surrogate, testbed
from .config import canonical_json, derive_seed
from .errors import ArtifactError

_SCHEMA = 1
_STAGES = ("doe", "evaluate", "fit", "subspace", "sample", "envelope", "gate")
_CHUNK_ROWS = 256


def h64(text):
    return hashlib.blake2b(text.encode(), digest_size=8).hexdigest()


def stage_hashes(cfg):
    """Input hash per stage, chained through the resolved config."""
    r = cfg.resolve()
    hashes = {}
    h_design = h64(canonical_json({"schema": _SCHEMA, "design": r["design"]}))
    hashes["doe"] = h64(canonical_json(["doe", h_design, r["doe"]]))
    hashes["evaluate"] = h64(
        canonical_json(["evaluate", hashes["doe"], r["qoi"], r["seed"]])
    )
    hashes["fit"] = h64(canonical_json(["fit", hashes["evaluate"], r["surrogate"]]))
    hashes["subspace"] = h64(
        canonical_json(["subspace", hashes["fit"], r["subspace"]])
    )
    hashes["sample"] = h64(canonical_json(["sample", hashes["subspace"], r["sampler"]]))
    hashes["envelope"] = h64(
        canonical_json(["envelope", hashes["sample"], r["envelope"]])
    )
    hashes["gate"] = h64(canonical_json(["gate", hashes["envelope"]]))
    hashes["report"] = h64(canonical_json(["report", hashes["envelope"], hashes["gate"]]))
    return hashes


class RunPaths:
    """File layout of one run directory."""

    def __init__(self, root):
        self.root = root
        self.resolved_config = os.path.join(root, "resolved_config.json")
        self.designs = os.path.join(root, "designs.csv")
        self.qoi = os.path.join(root, "qoi.csv")
        self.surrogate = os.path.join(root, "surrogate.json")
        self.partition = os.path.join(root, "partition.json")
        self.samples = os.path.join(root, "samples.csv")
        self.samples_qoi = os.path.join(root, "samples_qoi.csv")
        self.profiles = os.path.join(root, "profiles.csv")
        self.envelope = os.path.join(root, "envelope.json")
        self.verdicts = os.path.join(root, "verdicts.json")
        self.report_dir = os.path.join(root, "report")

    def ensure(self):
        os.makedirs(self.root, exist_ok=True)
        return self


def _meta(stage, input_hash):
    return {"input": input_hash, "schema": _SCHEMA, "stage": stage}


def _meta_comment(stage, input_hash):
    return "meta=" + canonical_json(_meta(stage, input_hash))


def _read_meta_comment(path, stage):
    try:
        with open(path) as fh:
            first = fh.readline()
    except FileNotFoundError:
        raise ArtifactError(
            f"artifact {os.path.basename(path)} is missing; run the {stage!r} stage"
        ) from None
    prefix = "# meta="
    if not first.startswith(prefix):
        raise ArtifactError(f"{path}: missing provenance line; rerun {stage!r}")
    try:
        return json.loads(first[len(prefix) :])
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: corrupt provenance line ({exc})") from exc


def _check_meta(meta, path, stage, expected):
    if meta.get("schema") != _SCHEMA or meta.get("stage") != stage:
        raise ArtifactError(
            f"{path}: wrong artifact kind {meta.get('stage')!r}; rerun {stage!r}"
        )
    if meta.get("input") != expected:
        raise ArtifactError(
            f"artifact {os.path.basename(path)} is stale: built from inputs "
            f"{meta.get('input')}, config requires {expected}; rerun {stage!r}"
        )


def _check_csv(path, stage, expected):
    _check_meta(_read_meta_comment(path, stage), path, stage, expected)


def _load_json(path, stage, expected):
    try:
        with open(path) as fh:
            payload = json.load(fh)
    except FileNotFoundError:
        raise ArtifactError(
            f"artifact {os.path.basename(path)} is missing; run the {stage!r} stage"
        ) from None
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: corrupt JSON ({exc})") from exc
    meta = payload.get("meta", {})
    _check_meta(meta, path, stage, expected)
    return payload["payload"]


def _dump_json(path, stage, input_hash, payload):
    with open(path, "w") as fh:
        json.dump(
            {"meta": _meta(stage, input_hash), "payload": payload},
            fh,
            sort_keys=True,
            indent=1,
        )
        fh.write("\n")


# ---------------------------------------------------------------------------
# Shared construction of the synthetic test rig from config.
# ---------------------------------------------------------------------------


def build_testbed(cfg):
    """Baseline, lattice, displacement functional, and its design oracle."""
    baseline = geometry.synthetic_baseline(cfg.design.points_per_side)
    lattice = geometry.FFDLattice.around(
        baseline,
        cfg.design.stations,
        margin_x=cfg.design.margin_x,
        margin_y=cfg.design.margin_y,
        amplitude=cfg.design.amplitude,
    )
    w = testbed.sparse_direction(
        lattice.n_design, cfg.qoi.direction_nonzero, cfg.qoi.direction_seed
    )
    functional = testbed.GeometryOracle.from_design_direction(
        lattice,
        baseline,
        w,
        kind=cfg.qoi.kind,
        noise=cfg.qoi.noise,
        noise_seed=derive_seed(cfg.seed, "noise"),
    )
    return baseline, lattice, functional, functional.restrict(lattice)


# ---------------------------------------------------------------------------
# Stages.
# ---------------------------------------------------------------------------


def write_resolved(cfg, paths):
    with open(paths.resolved_config, "w") as fh:
        json.dump(
            {"config": cfg.resolve(), "hashes": stage_hashes(cfg)},
            fh,
            sort_keys=True,
            indent=1,
        )
        fh.write("\n")


def run_doe(cfg, paths):
    h = stage_hashes(cfg)["doe"]
    designs = ingest.doe_uniform(cfg.design.d, cfg.doe.count, cfg.seed_for("doe"))
    ingest.write_design_csv(paths.designs, designs, comment=_meta_comment("doe", h))
    return designs


def load_designs(cfg, paths):
    _check_csv(paths.designs, "doe", stage_hashes(cfg)["doe"])
    return ingest.read_design_csv(paths.designs)


def run_evaluate(cfg, paths):
    designs = load_designs(cfg, paths)
    h = stage_hashes(cfg)["evaluate"]
    _, _, _, oracle = build_testbed(cfg)
    values = oracle.evaluate(designs)
    ingest.write_qoi_csv(
        paths.qoi, {cfg.qoi.name: values}, comment=_meta_comment("evaluate", h)
    )
    return values


def load_qoi(cfg, paths):
    _check_csv(paths.qoi, "evaluate", stage_hashes(cfg)["evaluate"])
    table = ingest.read_qoi_csv(paths.qoi)
    if cfg.qoi.name not in table:
        raise ArtifactError(
            f"{paths.qoi}: no column {cfg.qoi.name!r}; rerun 'evaluate'"
        )
    return table[cfg.qoi.name]


def run_fit(cfg, paths):
    designs = load_designs(cfg, paths)
    outputs = load_qoi(cfg, paths)
    h = stage_hashes(cfg)["fit"]
    basis = surrogate.build_index_set(
        cfg.surrogate.index_set, cfg.design.d, cfg.surrogate.order
    )
    model = surrogate.fit(
        basis,
        designs,
        outputs,
        epsilon=cfg.surrogate.epsilon,
        cv_folds=cfg.surrogate.cv_folds,
        cv_seed=derive_seed(cfg.seed, "cv"),
        admm_iters=cfg.surrogate.admm_iters,
    )
    _dump_json(paths.surrogate, "fit", h, model.to_dict())
    return model


def load_surrogate(cfg, paths):
    payload = _load_json(paths.surrogate, "fit", stage_hashes(cfg)["fit"])
    return surrogate.Surrogate.from_dict(payload)


def run_subspace(cfg, paths):
    model = load_surrogate(cfg, paths)
    h = stage_hashes(cfg)["subspace"]
    cov = subspace.estimate_covariance(
        model, n_samples=cfg.subspace.samples, seed=cfg.seed_for("subspace")
    )
    part = subspace.partition(cov, r=cfg.subspace.rank)
    _dump_json(paths.partition, "subspace", h, part.to_dict())
    return part


def load_partition(cfg, paths):
    payload = _load_json(paths.partition, "subspace", stage_hashes(cfg)["subspace"])
    return subspace.SubspacePartition.from_dict(payload)


def run_sample(cfg, paths):
    part = load_partition(cfg, paths)
    h = stage_hashes(cfg)["sample"]
    baseline, lattice, _, oracle = build_testbed(cfg)
    u = np.full(part.r, cfg.sampler.active_value)
    poly = sampler.build_polytope(part, u)
    z = sampler.hit_and_run(
        poly,
        cfg.sampler.count,
        cfg.seed_for("sample"),
        burn_in=cfg.sampler.burn_in,
        thin=cfg.sampler.thin,
    )
    sampler.write_samples_csv(paths.samples, z, comment=_meta_comment("sample", h))
    designs = sampler.lift(poly, z)
    values = oracle.evaluate(designs)
    ingest.write_qoi_csv(
        paths.samples_qoi, {cfg.qoi.name: values}, comment=_meta_comment("sample", h)
    )
    weights = lattice.weights(baseline)
    with open(paths.profiles, "w", newline="") as fh:
        fh.write(f"# {_meta_comment('sample', h)}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["profile_id"] + [f"y{j + 1}" for j in range(baseline.n_points)]
        )
        for lo in range(0, designs.shape[0], _CHUNK_ROWS):
            block = designs[lo : lo + _CHUNK_ROWS]
            rows = baseline.y[None, :] + lattice.amplitude * (block @ weights.T)
            for i, row in enumerate(rows):
                writer.writerow([lo + i] + [f"{v:.17g}" for v in row])
    return z


def load_samples(cfg, paths):
    _check_csv(paths.samples, "sample", stage_hashes(cfg)["sample"])
    return sampler.read_samples_csv(paths.samples)


def load_samples_qoi(cfg, paths):
    _check_csv(paths.samples_qoi, "sample", stage_hashes(cfg)["sample"])
    return ingest.read_qoi_csv(paths.samples_qoi)[cfg.qoi.name]


def iter_profile_rows(cfg, paths, chunk=_CHUNK_ROWS):
    """Yield ordinate-row chunks from the sampled profile table."""
    _check_csv(paths.profiles, "sample", stage_hashes(cfg)["sample"])
    with open(paths.profiles, newline="") as fh:
        reader = csv.reader(fh)
        header = None
        block = []
        for row in reader:
            if not row or row[0].startswith("#"):
                continue
            if header is None:
                header = row
                continue
            block.append([float(v) for v in row[1:]])
            if len(block) >= chunk:
                yield np.asarray(block)
                block = []
        if block:
            yield np.asarray(block)


def run_envelope(cfg, paths):
    h = stage_hashes(cfg)["envelope"]
    baseline = geometry.synthetic_baseline(cfg.design.points_per_side)
    gate = env_mod.LogisticGate(
        beta1=cfg.envelope.beta1, beta2=cfg.envelope.beta2, beta3=cfg.envelope.beta3
    )
    env = env_mod.build_envelope_from_rows(
        baseline,
        iter_profile_rows(cfg, paths),
        gate=gate,
        provenance={"input": h, "source": "profiles.csv"},
    )
    if cfg.envelope.buffer == "chi2":
        env = env.with_gate(
            zeta_use=env_mod.chi2_threshold(env.rank, cfg.envelope.use_significance),
            zeta_scrap=env_mod.chi2_threshold(
                env.rank, cfg.envelope.scrap_significance
            ),
        )
    else:
        env = env.with_gate(
            zeta_use=cfg.envelope.zeta_use, zeta_scrap=cfg.envelope.zeta_scrap
        )
    _dump_json(paths.envelope, "envelope", h, env.to_dict())
    return env


def load_envelope(cfg, paths):
    payload = _load_json(paths.envelope, "envelope", stage_hashes(cfg)["envelope"])
    return env_mod.BladeEnvelope.from_dict(payload)


def _judge_rows(env, rows, source, start_id=0):
    out = []
    for i, row in enumerate(rows):
        report = env_mod.verdict(env, row)
        entry = report.to_dict()
        entry["id"] = start_id + i
        entry["source"] = source
        out.append(entry)
    return out


def run_gate(cfg, paths, profile_paths=()):
    """Judge ensemble members and optional measured profile files."""
    env = load_envelope(cfg, paths)
    h = stage_hashes(cfg)["gate"]
    entries = []
    for chunk in iter_profile_rows(cfg, paths):
        entries.extend(_judge_rows(env, chunk, "profiles.csv", start_id=len(entries)))
    template = env.mean_profile
    for path in profile_paths:
        prof = geometry.read_profile_csv(path)
        if not template.same_abscissae(prof):
            prof = geometry.resample(prof, template)
        entries.extend(
            _judge_rows(env, [prof.y], os.path.basename(path), start_id=len(entries))
        )
    summary = {"use": 0, "review": 0, "scrap": 0}
    for entry in entries:
        summary[entry["verdict"]] += 1
    payload = {"summary": summary, "verdicts": entries}
    _dump_json(paths.verdicts, "gate", h, payload)
    return payload


def load_verdicts(cfg, paths):
    return _load_json(paths.verdicts, "gate", stage_hashes(cfg)["gate"])


def run_all(cfg, paths, profile_paths=()):
    """Run every stage in order, then render the report."""
    from . import report as report_mod

    paths.ensure()
    write_resolved(cfg, paths)
    run_doe(cfg, paths)
    run_evaluate(cfg, paths)
    run_fit(cfg, paths)
    run_subspace(cfg, paths)
    run_sample(cfg, paths)
    run_envelope(cfg, paths)
    run_gate(cfg, paths, profile_paths=profile_paths)
    report_mod.run_report(cfg, paths)
