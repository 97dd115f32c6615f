"""Command-line interface over the pipeline stages.

Exit codes: 0 success, 2 invalid configuration or input data, 3
missing or stale artifacts, 4 numerical failure (non-convergence or
infeasible geometry).
"""

import argparse
import sys

from .config import PipelineConfig
from .errors import (
    ArtifactError,
    ConfigError,
    ConvergenceError,
    ExtrapolationError,
    InfeasibleRegionError,
    ValidationError,
)
from .kernels import USE_NUMBA, backend_name
from .pipeline import RunPaths, write_resolved
from . import pipeline
from . import report as report_mod

_EXIT_CONFIG = 2
_EXIT_ARTIFACT = 3
_EXIT_NUMERIC = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="bladenv",
        description=(
            "Discover performance-invariant blade deformations and "
            "synthesize manufacturing envelopes with a scrap-or-use gate."
        ),
    )
    parser.add_argument(
        "--config", default="bladenv.json", help="pipeline config file (JSON)"
    )
    parser.add_argument("--out", default="run", help="run directory for artifacts")
    parser.add_argument(
        "--seed", type=int, default=None, help="override the config's global seed"
    )
    parser.add_argument(
        "--jobs", type=int, default=None,
        help="compute threads for the accelerated backend",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("doe", "draw the design of experiments"),
        ("evaluate", "evaluate the response on the design of experiments"),
        ("fit", "fit the sparse polynomial surrogate"),
        ("subspace", "estimate the sensitivity partition"),
        ("sample", "sample the inactive polytope and build member profiles"),
        ("envelope", "synthesize the blade envelope"),
        ("gate", "judge profiles against the envelope"),
        ("report", "render figures and tables"),
        ("run-all", "run every stage in order"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        if name in ("gate", "run-all"):
            cmd.add_argument(
                "--profiles", nargs="*", default=[],
                help="measured profile csv files to judge",
            )
    return parser


def _dispatch(args):
    cfg = PipelineConfig.load(args.config, seed_override=args.seed)
    paths = RunPaths(args.out).ensure()
    write_resolved(cfg, paths)
    command = args.command
    if command == "doe":
        designs = pipeline.run_doe(cfg, paths)
        print(f"doe: wrote {designs.shape[0]} designs of dimension "
              f"{designs.shape[1]} -> {paths.designs}")
    elif command == "evaluate":
        values = pipeline.run_evaluate(cfg, paths)
        print(f"evaluate: wrote {values.shape[0]} responses -> {paths.qoi}")
    elif command == "fit":
        model = pipeline.run_fit(cfg, paths)
        diag = model.diagnostics
        print(
            f"fit: {model.basis.n_terms} terms, "
            f"{diag['n_nonzero']} nonzero, residual "
            f"{diag['residual_norm']:.3e} -> {paths.surrogate}"
        )
    elif command == "subspace":
        part = pipeline.run_subspace(cfg, paths)
        print(f"subspace: active rank {part.r} of {part.d} -> {paths.partition}")
    elif command == "sample":
        z = pipeline.run_sample(cfg, paths)
        print(f"sample: {z.shape[0]} invariant members -> {paths.profiles}")
    elif command == "envelope":
        env = pipeline.run_envelope(cfg, paths)
        print(
            f"envelope: {env.n_members} members, rank {env.rank}, "
            f"review band [{env.zeta_use:.3g}, {env.zeta_scrap:.3g}) "
            f"-> {paths.envelope}"
        )
    elif command == "gate":
        payload = pipeline.run_gate(cfg, paths, profile_paths=args.profiles)
        s = payload["summary"]
        print(
            f"gate: use {s['use']}, review {s['review']}, scrap {s['scrap']} "
            f"-> {paths.verdicts}"
        )
    elif command == "report":
        report_mod.run_report(cfg, paths)
        print(f"report: figures and tables -> {paths.report_dir}")
    elif command == "run-all":
        pipeline.run_all(cfg, paths, profile_paths=args.profiles)
        print(f"run-all: artifacts -> {paths.root} ({backend_name()} backend)")
    else:  # pragma: no cover - argparse enforces choices
        raise ConfigError(f"unknown command {command!r}")
    return 0


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.jobs is not None:
        if args.jobs < 1:
            print(f"error: --jobs must be positive, got {args.jobs}",
                  file=sys.stderr)
            return _EXIT_CONFIG
        if USE_NUMBA:
            import numba

            numba.set_num_threads(args.jobs)
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (ValidationError, ExtrapolationError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except ArtifactError as exc:
        print(f"artifact error: {exc}", file=sys.stderr)
        return _EXIT_ARTIFACT
    except (ConvergenceError, InfeasibleRegionError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return _EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
