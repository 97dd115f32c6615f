"""Uniform sampling of the inactive polytope.

Fixing the active coordinate ``u`` of a design constrains the inactive
coordinate ``z`` to the polytope where the lifted design ``W u + V z``
stays inside the unit box.  A hit-and-run chain started at the
Chebyshev center draws asymptotically uniform samples from it; lifting
those samples yields design perturbations the response cannot see.
"""

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    EmptyPolytopeWarning,
    InfeasibleRegionError,
    ValidationError,
)
from .ingest import rng_from_seed
from .kernels import hit_and_run_chain
from .numerics import LinearProgram, lp_solve

_FEAS_TOL = 1e-9


@dataclass(frozen=True)
class InactivePolytope:
    """Constraint system ``a_mat @ z <= b`` for the inactive coordinate.

    Built from a subspace partition and an active coordinate ``u``; the
    rows stack ``V`` above ``-V`` so feasibility is exactly box
    membership of the lifted design.
    """

    a_mat: np.ndarray
    b: np.ndarray
    active_value: np.ndarray
    active_basis: np.ndarray
    inactive_basis: np.ndarray

    @property
    def dim(self):
        return self.a_mat.shape[1]


def build_polytope(part, u):
    """Constrain the inactive coordinate at a fixed active coordinate.

    Warns when ``|W u|`` already exceeds 1 in some component, since the
    polytope is then empty for every ``z``.
    """
    u = np.asarray(u, dtype=float).ravel()
    if u.shape[0] != part.r:
        raise ValidationError(
            f"active coordinate has {u.shape[0]} components, expected {part.r}"
        )
    if part.inactive.shape[1] == 0:
        raise ValidationError("partition has no inactive directions to sample")
    base = part.active @ u
    if np.any(np.abs(base) > 1.0):
        warnings.warn(
            "W u leaves the unit box; the inactive polytope is empty",
            EmptyPolytopeWarning,
            stacklevel=2,
        )
    a_mat = np.vstack([part.inactive, -part.inactive])
    b = np.concatenate([1.0 - base, 1.0 + base])
    return InactivePolytope(
        a_mat=a_mat,
        b=b,
        active_value=u,
        active_basis=part.active.copy(),
        inactive_basis=part.inactive.copy(),
    )


def chebyshev_center(poly):
    """Deepest interior point of the polytope, with deterministic ties.

    Maximizes the inscribed-ball radius by linear programming.  The
    optimal center can be a face rather than a point; a second pass
    locates the midpoint of that face along the coordinate-sum
    direction, so equal inputs always return the same center.

    Returns ``(center, radius)``; an empty polytope raises
    `InfeasibleRegionError`, and radius 0 means the interior is empty.
    """
    a, b = poly.a_mat, poly.b
    m, n = a.shape
    norms = np.linalg.norm(a, axis=1)
    c = np.zeros(n + 1)
    c[n] = 1.0
    a_ball = np.hstack([a, norms[:, None]])
    bounds = [(None, None)] * n + [(0.0, None)]
    res = lp_solve(
        LinearProgram(c=c, a_ub=a_ball, b_ub=b, bounds=bounds, maximize=True)
    )
    if res.status != "optimal":
        raise InfeasibleRegionError(f"chebyshev program is {res.status}")
    radius = float(res.x[n])

    # Pin down ties: among centers of maximal radius, take the midpoint
    # of the min and max coordinate-sum vertices of the optimal face.
    a_face = np.vstack([a_ball, -c])
    b_face = np.concatenate([b, [-(radius - 1e-12 * max(1.0, radius))]])
    ends = []
    for maximize in (False, True):
        cc = np.zeros(n + 1)
        cc[:n] = 1.0
        sub = lp_solve(
            LinearProgram(c=cc, a_ub=a_face, b_ub=b_face, bounds=bounds,
                          maximize=maximize)
        )
        if sub.status != "optimal":
            raise InfeasibleRegionError(f"chebyshev tie-break is {sub.status}")
        ends.append(sub.x[:n])
    center = 0.5 * (ends[0] + ends[1])
    return center, radius


def hit_and_run(poly, n_samples, seed, burn_in=100, thin=5, start=None):
    """Asymptotically uniform samples of the polytope interior.

    Directions are isotropic unit vectors and the step lands uniformly
    on the feasible chord; both random streams are pre-generated from
    the seeded counter-based generator, so the draw is reproducible
    and backend-independent.  The chain discards ``burn_in`` steps and
    keeps every ``thin``-th one after that.

    ``start`` defaults to the Chebyshev center and must be strictly
    interior.  Chains on polytopes with empty interior fail after the
    degenerate-chord retry budget.
    """
    if n_samples < 1:
        raise ValidationError(f"n_samples must be positive, got {n_samples}")
    if burn_in < 0 or thin < 1:
        raise ValidationError(f"bad chain settings burn_in={burn_in}, thin={thin}")
    n = poly.dim
    if start is None:
        start, radius = chebyshev_center(poly)
        if radius <= 0.0:
            raise InfeasibleRegionError(
                "polytope has empty interior; its chebyshev radius is 0"
            )
    start = np.asarray(start, dtype=float).ravel()
    if start.shape[0] != n:
        raise ValidationError(f"start point has {start.shape[0]} coords, need {n}")
    slack = poly.b - poly.a_mat @ start
    if np.any(slack <= 0):
        raise ValidationError("start point is not strictly interior")

    total = burn_in + thin * int(n_samples)
    rng = rng_from_seed(seed)
    directions = rng.standard_normal((total, n))
    norms = np.linalg.norm(directions, axis=1)
    norms[norms == 0.0] = 1.0
    directions /= norms[:, None]
    uniforms = rng.random(total)
    out = np.empty((int(n_samples), n))
    kept, degenerate, status = hit_and_run_chain(
        poly.a_mat, poly.b, start, directions, uniforms, burn_in, thin, out
    )
    if status != 0:
        raise InfeasibleRegionError("polytope is unbounded along a chain direction")
    if kept < n_samples:
        raise ConvergenceError(
            f"chain produced {kept}/{n_samples} samples; "
            f"{degenerate} degenerate chords suggest an empty interior"
        )
    worst = float(np.max(poly.a_mat @ out.T - poly.b[:, None]))
    if worst > _FEAS_TOL:
        raise ConvergenceError(
            f"chain left the polytope by {worst:.3e}; numerical failure"
        )
    return out


def lift(poly, z):
    """Map inactive coordinates back to full design vectors.

    ``z`` may be a single coordinate or a matrix of rows.  Lifted
    designs are validated against the unit box to ``1e-9``; violations
    mean ``z`` was not feasible for this polytope.
    """
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zz = np.atleast_2d(z)
    if zz.shape[1] != poly.dim:
        raise ValidationError(
            f"inactive coordinate has {zz.shape[1]} components, expected {poly.dim}"
        )
    base = poly.active_basis @ poly.active_value
    x = base[None, :] + zz @ poly.inactive_basis.T
    worst = float(np.max(np.abs(x))) if x.size else 0.0
    if worst > 1.0 + _FEAS_TOL:
        raise ValidationError(
            f"lifted design leaves [-1, 1] by {worst - 1.0:.3e}; "
            "the inactive coordinate is infeasible"
        )
    return x[0] if single else x


def write_samples_csv(path, samples, comment=None):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["sample_id"] + [f"z{j + 1}" for j in range(samples.shape[1])])
        for i, row in enumerate(samples):
            writer.writerow([i] + [f"{v:.17g}" for v in row])


def read_samples_csv(path):
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or rows[0][:1] != ["sample_id"]:
        raise ValidationError(f"{path}: expected a sample_id-led header")
    try:
        return np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric entry") from exc
