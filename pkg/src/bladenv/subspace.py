"""Active and inactive subspace discovery from surrogate gradients.

The outer-product covariance of the response gradient, averaged over
the uniform measure on ``[-1, 1]^d``, concentrates on the directions
the response actually varies along.  Its leading eigenvectors span the
active subspace; the trailing ones span the inactive subspace that
tolerance design exploits.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .ingest import rng_from_seed
from .numerics import eigh_symmetric, symmetrize

_CHUNK = 4096


def estimate_covariance(surrogate, n_samples=100_000, seed=0):
    """Monte Carlo estimate of the gradient outer-product covariance.

    Draws ``n_samples`` points uniformly on ``[-1, 1]^d`` with the
    seeded counter-based generator and averages ``grad grad^T`` of the
    surrogate over them, in chunks.  The result is exactly symmetric.
    """
    if n_samples < 1:
        raise ValidationError(f"n_samples must be positive, got {n_samples}")
    d = surrogate.basis.d
    rng = rng_from_seed(seed)
    acc = np.zeros((d, d))
    remaining = int(n_samples)
    while remaining > 0:
        take = min(_CHUNK, remaining)
        pts = rng.uniform(-1.0, 1.0, size=(take, d))
        grads = surrogate.gradients(pts)
        acc += grads.T @ grads
        remaining -= take
    return symmetrize(acc / float(n_samples))


@dataclass(frozen=True)
class SubspacePartition:
    """Orthonormal split of the design space by response sensitivity.

    ``active`` holds the leading eigenvector columns (d, r) and
    ``inactive`` the trailing ones (d, d - r); stacked they form an
    orthogonal matrix.  ``eigenvalues`` keep the full descending
    spectrum for diagnostics.
    """

    active: np.ndarray
    inactive: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        d = self.active.shape[0]
        if self.active.ndim != 2 or self.inactive.ndim != 2:
            raise ValidationError("subspace blocks must be matrices")
        if self.inactive.shape[0] != d or self.eigenvalues.shape[0] != d:
            raise ValidationError("inconsistent subspace dimensions")
        if self.active.shape[1] + self.inactive.shape[1] != d:
            raise ValidationError("active and inactive blocks must partition R^d")
        q = np.hstack([self.active, self.inactive])
        if np.max(np.abs(q.T @ q - np.eye(d))) > 1e-8:
            raise ValidationError("subspace blocks are not orthonormal")

    @property
    def d(self):
        return self.active.shape[0]

    @property
    def r(self):
        return self.active.shape[1]

    def to_dict(self):
        return {
            "schema": 1,
            "kind": "subspace-partition",
            "active": [[float(v) for v in row] for row in self.active],
            "inactive": [[float(v) for v in row] for row in self.inactive],
            "eigenvalues": [float(v) for v in self.eigenvalues],
        }

    @classmethod
    def from_dict(cls, payload):
        try:
            active = np.asarray(payload["active"], dtype=float)
            inactive = np.asarray(payload["inactive"], dtype=float)
            eigenvalues = np.asarray(payload["eigenvalues"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed partition payload: {exc}") from exc
        return cls(active=active, inactive=inactive, eigenvalues=eigenvalues)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def partition(covariance, r="auto", min_keep=1, floor_ratio=1e-12):
    """Split eigenvectors of a gradient covariance into active/inactive.

    With ``r="auto"`` the split lands on the largest gap between
    consecutive nonzero-log eigenvalues: the index k maximizing
    ``log(lam_k) - log(lam_k+1)`` over ``k >= min_keep - 1``, where
    eigenvalues below ``floor_ratio`` times the largest count as zero
    and force the cut just before them.  An explicit integer ``r``
    bypasses the rule.
    """
    cov = symmetrize(covariance)
    d = cov.shape[0]
    vals, vecs = eigh_symmetric(cov)
    if r == "auto":
        lam_max = float(vals[0])
        if lam_max <= 0.0:
            raise ValidationError(
                "gradient covariance vanishes; the response is constant"
            )
        floor = floor_ratio * lam_max
        nonzero = int(np.sum(vals > floor))
        if nonzero >= d:
            logs = np.log(np.maximum(vals, floor))
            gaps = logs[:-1] - logs[1:]
            k = int(np.argmax(gaps[min_keep - 1 :])) + min_keep - 1
            r_eff = k + 1
        else:
            r_eff = max(nonzero, min_keep)
    else:
        r_eff = int(r)
        if not 1 <= r_eff <= d:
            raise ValidationError(f"r must lie in [1, {d}], got {r_eff}")
    return SubspacePartition(
        active=vecs[:, :r_eff].copy(),
        inactive=vecs[:, r_eff:].copy(),
        eigenvalues=vals,
    )


def active_coordinate(part, x):
    """Project design vectors onto the active subspace: ``W^T x``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != part.d:
        raise ValidationError(
            f"design dimension {x.shape[-1]} does not match partition d={part.d}"
        )
    return x @ part.active


def subspace_angle(a, b):
    """Largest principal angle (radians) between two column spans.

    Columns need not be orthonormal; both spans must share ambient
    dimension and column count.
    """
    qa, _ = np.linalg.qr(np.atleast_2d(np.asarray(a, dtype=float)))
    qb, _ = np.linalg.qr(np.atleast_2d(np.asarray(b, dtype=float)))
    if qa.shape != qb.shape:
        raise ValidationError(f"span shapes differ: {qa.shape} vs {qb.shape}")
    sing = np.linalg.svd(qa.T @ qb, compute_uv=False)
    return float(np.arccos(np.clip(sing.min(), -1.0, 1.0)))
