"""Run report: figures with matching data tables.

Every figure is written as SVG with a fixed hash salt and no embedded
date, and every plotted series is also written as a csv table next to
it, so reruns are byte-identical and the numbers survive without a
plot viewer.
"""

import csv
import os

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "bladenv"

import matplotlib.pyplot as plt

from . import envelope as env_mod
from . import pipeline, subspace

_SAVEFIG = {"format": "svg", "metadata": {"Date": None}}


def _save(fig, path):
    fig.savefig(path, **_SAVEFIG)
    plt.close(fig)


def _write_csv(path, header, columns):
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(columns[0].shape[0]):
            row = []
            for c in columns:
                v = c[i]
                row.append(f"{float(v):.17g}" if np.issubdtype(c.dtype, np.floating)
                           else str(v))
            writer.writerow(row)


def _fig_spectrum(part, out_dir):
    vals = np.maximum(np.abs(part.eigenvalues), 1e-300)
    k = np.arange(1, vals.shape[0] + 1)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.semilogy(k, vals, "o-", ms=4)
    ax.axvline(part.r + 0.5, color="tab:red", ls="--", lw=1)
    ax.set_xlabel("eigenvalue index")
    ax.set_ylabel("gradient covariance eigenvalue")
    ax.set_title(f"sensitivity spectrum (active rank {part.r})")
    fig.tight_layout()
    _save(fig, os.path.join(out_dir, "spectrum.svg"))
    _write_csv(
        os.path.join(out_dir, "spectrum.csv"),
        ["index", "eigenvalue"],
        [k, part.eigenvalues],
    )


def _fig_summary(part, designs, outputs, qoi_name, out_dir):
    u = subspace.active_coordinate(part, designs)
    u1 = u[:, 0]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(u1, outputs, ".", ms=4, alpha=0.7)
    ax.set_xlabel("first active coordinate")
    ax.set_ylabel(qoi_name)
    ax.set_title("sufficient summary")
    fig.tight_layout()
    _save(fig, os.path.join(out_dir, "summary.svg"))
    _write_csv(
        os.path.join(out_dir, "summary.csv"),
        ["active_1", qoi_name],
        [u1, outputs],
    )


def _fig_envelope(env, out_dir):
    n_s = env.n_suction
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for sl, label in ((slice(0, n_s), "suction"), (slice(n_s, None), "pressure")):
        ax.fill_between(env.x[sl], env.lo[sl], env.hi[sl], alpha=0.3,
                        color="tab:blue", lw=0,
                        label="control zone" if label == "suction" else None)
        ax.plot(env.x[sl], env.mean[sl], color="tab:blue", lw=1,
                label="mean" if label == "suction" else None)
    ax.set_xlabel("axial chord")
    ax.set_ylabel("ordinate")
    ax.set_title(f"blade envelope ({env.n_members} members)")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, os.path.join(out_dir, "envelope.svg"))
    _write_csv(
        os.path.join(out_dir, "envelope.csv"),
        ["x", "mean", "lo", "hi"],
        [env.x, env.mean, env.lo, env.hi],
    )


def _fig_tolerance(env, out_dir):
    sigma = np.sqrt(np.maximum(np.diag(env.cov), 0.0))
    fig, ax = plt.subplots(figsize=(6, 3.5))
    n_s = env.n_suction
    ax.plot(env.x[:n_s], sigma[:n_s], lw=1, label="suction")
    ax.plot(env.x[n_s:], sigma[n_s:], lw=1, label="pressure")
    ax.set_xlabel("axial chord")
    ax.set_ylabel("ordinate tolerance (one sigma)")
    ax.set_title("pointwise tolerance")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, os.path.join(out_dir, "tolerance.svg"))
    _write_csv(
        os.path.join(out_dir, "tolerance.csv"),
        ["x", "sigma"],
        [env.x, sigma],
    )


def _fig_invariance(doe_outputs, sampled_outputs, qoi_name, out_dir):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(doe_outputs, bins=40, density=True, alpha=0.5,
            label="design-of-experiments")
    ax.hist(sampled_outputs, bins=40, density=True, alpha=0.5,
            label="invariant samples")
    ax.set_xlabel(qoi_name)
    ax.set_ylabel("density")
    ax.set_title("performance invariance of the sampled ensemble")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, os.path.join(out_dir, "invariance.svg"))
    n = max(doe_outputs.shape[0], sampled_outputs.shape[0])
    pad = np.full(n, np.nan)
    a = pad.copy()
    a[: doe_outputs.shape[0]] = doe_outputs
    b = pad.copy()
    b[: sampled_outputs.shape[0]] = sampled_outputs
    _write_csv(
        os.path.join(out_dir, "invariance.csv"),
        ["doe_output", "sampled_output"],
        [a, b],
    )


def _fig_gate(env, zetas, out_dir):
    grid = np.linspace(0.0, max(float(env.zeta_scrap) * 1.5, 10.0), 300)
    scores = env_mod.gate_score(env.gate, grid)
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(grid, scores, lw=1.5)
    ax.axvline(env.zeta_use, color="tab:green", ls="--", lw=1, label="use below")
    ax.axvline(env.zeta_scrap, color="tab:red", ls="--", lw=1, label="scrap above")
    ax.set_xlabel("tolerance distance")
    ax.set_ylabel("gate score")
    ax.set_title("scrap-or-use gate")
    ax.legend(loc="best")
    fig.tight_layout()
    _save(fig, os.path.join(out_dir, "gate.svg"))
    _write_csv(os.path.join(out_dir, "gate.csv"),
               ["zeta", "score"], [grid, scores])

    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.hist(zetas, bins=40, alpha=0.7)
    ax.axvline(env.zeta_use, color="tab:green", ls="--", lw=1)
    ax.axvline(env.zeta_scrap, color="tab:red", ls="--", lw=1)
    ax.set_xlabel("tolerance distance")
    ax.set_ylabel("member count")
    ax.set_title("ensemble distance distribution")
    fig.tight_layout()
    _save(fig, os.path.join(out_dir, "distances.svg"))
    _write_csv(os.path.join(out_dir, "distances.csv"), ["zeta"], [zetas])


def run_report(cfg, paths):
    """Render all figures and tables from the run artifacts."""
    os.makedirs(paths.report_dir, exist_ok=True)
    part = pipeline.load_partition(cfg, paths)
    designs = pipeline.load_designs(cfg, paths)
    outputs = pipeline.load_qoi(cfg, paths)
    env = pipeline.load_envelope(cfg, paths)
    sampled = pipeline.load_samples_qoi(cfg, paths)
    verdicts = pipeline.load_verdicts(cfg, paths)

    _fig_spectrum(part, paths.report_dir)
    _fig_summary(part, designs, outputs, cfg.qoi.name, paths.report_dir)
    _fig_envelope(env, paths.report_dir)
    _fig_tolerance(env, paths.report_dir)
    _fig_invariance(outputs, sampled, cfg.qoi.name, paths.report_dir)
    zetas = np.array([v["zeta"] for v in verdicts["verdicts"]])
    _fig_gate(env, zetas, paths.report_dir)

    with open(os.path.join(paths.report_dir, "verdict_summary.csv"), "w",
              newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["verdict", "count"])
        for key in ("use", "review", "scrap"):
            writer.writerow([key, verdicts["summary"][key]])
