"""Sparse polynomial response surfaces on ``[-1, 1]^d``.

The basis is a tensor product of Legendre polynomials normalized to
unit weighted L2 norm against the uniform measure, indexed by a
multi-index set.  Coefficients come from an l1-minimizing fit subject
to a residual bound, which recovers sparse expansions from far fewer
evaluations than unknowns.
"""

import json
import warnings
from dataclasses import dataclass, field
from math import comb, isqrt, sqrt

import numpy as np

from .errors import ResidualInfeasibleWarning, ValidationError
from .ingest import rng_from_seed
from .kernels import basis_matrix_fill, ridge_gradients_fill
from .numerics import bpdn_solve

_INDEX_KINDS = ("tensorial", "total-order", "euclidean", "hyperbolic")
_MAX_TERMS = 1_000_000
_GRAD_CHUNK = 2048


@dataclass(frozen=True)
class MultiIndexSet:
    """Per-dimension polynomial degrees, one row per basis term.

    ``indices`` is an ``(n_terms, d)`` int array in ascending
    lexicographic order, which fixes the coefficient ordering
    everywhere downstream.
    """

    kind: str
    d: int
    p: int
    indices: np.ndarray

    @property
    def n_terms(self):
        return self.indices.shape[0]

    @property
    def max_degree(self):
        return int(self.indices.max()) if self.indices.size else 0


def build_index_set(kind, d, p, max_terms=_MAX_TERMS):
    """Enumerate a multi-index set.

    Kinds: ``tensorial`` caps each dimension's degree at ``p``;
    ``total-order`` caps the degree sum; ``euclidean`` caps the
    euclidean norm of the degree vector; ``hyperbolic`` caps the
    q = 1/2 quasi-norm, which favors interaction-free terms.
    Enumeration aborts once ``max_terms`` is exceeded.
    """
    if kind not in _INDEX_KINDS:
        raise ValidationError(f"unknown index set kind {kind!r}, want one of {_INDEX_KINDS}")
    if d < 1 or p < 0:
        raise ValidationError(f"need d >= 1 and p >= 0, got d={d}, p={p}")
    if kind == "tensorial":
        total = (p + 1) ** d
        if total > max_terms:
            raise ValidationError(
                f"tensorial set has {total} terms, above the {max_terms} cap"
            )
    if kind == "total-order":
        budget = float(p)
        cost = lambda i: float(i)
        max_next = lambda rem: int(rem + 1e-9)
    elif kind == "tensorial":
        budget = float(p * d)
        cost = lambda i: 0.0
        max_next = lambda rem: p
    elif kind == "euclidean":
        budget = float(p * p)
        cost = lambda i: float(i * i)
        max_next = lambda rem: isqrt(int(rem + 1e-9))
    else:  # hyperbolic, q = 1/2
        budget = sqrt(p) + 1e-12
        cost = lambda i: sqrt(i)
        max_next = lambda rem: int((rem * rem) * (1 + 1e-12)) if rem > 0 else 0

    out = []
    row = [0] * d

    def rec(j, rem):
        if j == d:
            out.append(tuple(row))
            if len(out) > max_terms:
                raise ValidationError(
                    f"{kind} set exceeds the {max_terms}-term cap at d={d}, p={p}"
                )
            return
        top = max_next(rem)
        for i in range(top + 1):
            row[j] = i
            rec(j + 1, rem - cost(i))
        row[j] = 0

    rec(0, budget)
    indices = np.array(out, dtype=np.int64)
    if kind == "total-order" and indices.shape[0] != comb(d + p, p):
        raise AssertionError("total-order enumeration lost terms")
    return MultiIndexSet(kind=kind, d=d, p=p, indices=indices)


def legendre_tables(x, p, deriv=False):
    """Univariate orthonormal Legendre values per point and dimension.

    Returns ``(n, d, p + 1)`` tables; with ``deriv`` a matching
    derivative table comes too.  The degree-n polynomial is scaled by
    ``sqrt(2 n + 1)`` so it has unit L2 norm under the uniform measure
    on ``[-1, 1]``; derivatives use the additive recurrence, which
    stays finite at the interval ends.
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    vals = np.empty((p + 1, n, d))
    vals[0] = 1.0
    if p >= 1:
        vals[1] = x
    for k in range(1, p):
        vals[k + 1] = ((2 * k + 1) * x * vals[k] - k * vals[k - 1]) / (k + 1)
    if deriv:
        der = np.empty((p + 1, n, d))
        der[0] = 0.0
        if p >= 1:
            der[1] = 1.0
        for k in range(1, p):
            der[k + 1] = der[k - 1] + (2 * k + 1) * vals[k]
    scale = np.sqrt(2.0 * np.arange(p + 1) + 1.0)
    vals *= scale[:, None, None]
    tables = np.ascontiguousarray(np.moveaxis(vals, 0, 2))
    if not deriv:
        return tables
    der *= scale[:, None, None]
    return tables, np.ascontiguousarray(np.moveaxis(der, 0, 2))


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    pts = np.atleast_2d(x)
    if pts.shape[1] != d:
        raise ValidationError(f"points have dimension {pts.shape[1]}, expected {d}")
    if not np.all(np.isfinite(pts)):
        raise ValidationError("points contain non-finite values")
    if np.any(np.abs(pts) > 1.0 + 1e-12):
        worst = float(np.abs(pts).max())
        raise ValidationError(
            f"points must lie in [-1, 1]^d, found magnitude {worst:.6g}"
        )
    return np.clip(pts, -1.0, 1.0), single


def eval_basis(basis, x):
    """Measurement matrix: one row per point, one column per basis term.

    Note the memory footprint is ``n_points * n_terms`` doubles; batch
    accordingly for large point sets.
    """
    pts, single = _as_points(x, basis.d)
    tables = legendre_tables(pts, basis.max_degree)
    psi = np.empty((pts.shape[0], basis.n_terms))
    basis_matrix_fill(basis.indices, tables, psi)
    return psi[0] if single else psi


@dataclass
class Surrogate:
    """Fitted polynomial response surface."""

    basis: MultiIndexSet
    coefficients: np.ndarray
    epsilon: float
    diagnostics: dict = field(default_factory=dict)

    def predict(self, x):
        psi = eval_basis(self.basis, x)
        return float(psi @ self.coefficients) if psi.ndim == 1 else psi @ self.coefficients

    def gradients(self, x):
        """Gradient rows of the surface at each point."""
        pts, single = _as_points(x, self.basis.d)
        active = np.nonzero(self.coefficients)[0]
        out = np.zeros((pts.shape[0], self.basis.d))
        if active.size:
            idx = np.ascontiguousarray(self.basis.indices[active])
            coeffs = np.ascontiguousarray(self.coefficients[active])
            deg = int(idx.max())
            for lo in range(0, pts.shape[0], _GRAD_CHUNK):
                chunk = pts[lo : lo + _GRAD_CHUNK]
                tables, deriv = legendre_tables(chunk, deg, deriv=True)
                ridge_gradients_fill(idx, tables, deriv, coeffs, out[lo : lo + chunk.shape[0]])
        return out[0] if single else out

    def gradient(self, x):
        return self.gradients(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def to_dict(self):
        return {
            "schema": 1,
            "kind": "surrogate",
            "basis": {"kind": self.basis.kind, "d": self.basis.d, "p": self.basis.p},
            "coefficients": [float(c) for c in self.coefficients],
            "epsilon": float(self.epsilon),
            "diagnostics": self.diagnostics,
        }

    @classmethod
    def from_dict(cls, payload):
        try:
            spec = payload["basis"]
            basis = build_index_set(spec["kind"], int(spec["d"]), int(spec["p"]))
            coeffs = np.asarray(payload["coefficients"], dtype=float)
            eps = float(payload["epsilon"])
            diagnostics = dict(payload.get("diagnostics", {}))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed surrogate payload: {exc}") from exc
        if coeffs.shape[0] != basis.n_terms:
            raise ValidationError(
                f"coefficient count {coeffs.shape[0]} does not match basis "
                f"size {basis.n_terms}"
            )
        return cls(basis=basis, coefficients=coeffs, epsilon=eps, diagnostics=diagnostics)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


_AUTO_GRID = tuple(np.logspace(-5, -1, 10))


def fit(basis, designs, outputs, epsilon="auto", cv_folds=5, cv_seed=0,
        admm_iters=5000):
    """Fit basis coefficients to an input-output database.

    With ``epsilon="auto"`` the residual bound is picked by k-fold
    cross-validation over a log-spaced grid, minimizing mean held-out
    squared error (ties go to the tighter bound).  Fold assignment is
    seeded and deterministic.

    Diagnostics record the training residual, training R^2, the count
    of nonzero coefficients, and the cross-validation table when auto
    selection ran.  An infeasible residual bound degrades to the
    least-squares fit and is flagged under ``residual_bound_infeasible``.
    """
    designs = np.atleast_2d(np.asarray(designs, dtype=float))
    outputs = np.asarray(outputs, dtype=float).ravel()
    if designs.shape[0] != outputs.shape[0]:
        raise ValidationError(
            f"{designs.shape[0]} designs against {outputs.shape[0]} outputs"
        )
    if designs.shape[1] != basis.d:
        raise ValidationError(
            f"designs have dimension {designs.shape[1]}, basis wants {basis.d}"
        )
    k = designs.shape[0]
    psi = eval_basis(basis, designs)
    diagnostics = {}

    if epsilon == "auto":
        if k < cv_folds:
            raise ValidationError(
                f"auto residual selection needs >= {cv_folds} samples, got {k}"
            )
        perm = rng_from_seed(cv_seed).permutation(k)
        fold_of = np.empty(k, dtype=int)
        fold_of[perm] = np.arange(k) % cv_folds
        grid = np.asarray(_AUTO_GRID)
        cv_err = np.zeros(grid.shape[0])
        for gi, eps in enumerate(grid):
            sq = 0.0
            for fold in range(cv_folds):
                hold = fold_of == fold
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", ResidualInfeasibleWarning)
                    coeffs = bpdn_solve(
                        psi[~hold], outputs[~hold], float(eps), max_iter=admm_iters
                    )
                resid = psi[hold] @ coeffs - outputs[hold]
                sq += float(resid @ resid)
            cv_err[gi] = sq / k
        chosen = float(grid[int(np.argmin(cv_err))])
        diagnostics["cv_grid"] = [float(g) for g in grid]
        diagnostics["cv_error"] = [float(e) for e in cv_err]
    else:
        chosen = float(epsilon)
        if chosen < 0:
            raise ValidationError(f"epsilon must be nonnegative, got {chosen}")

    infeasible = False
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ResidualInfeasibleWarning)
        coeffs = bpdn_solve(psi, outputs, chosen, max_iter=admm_iters)
        infeasible = any(
            issubclass(w.category, ResidualInfeasibleWarning) for w in caught
        )
    if infeasible:
        warnings.warn(
            f"residual bound {chosen:.3e} unachievable; kept least-squares fit",
            ResidualInfeasibleWarning,
            stacklevel=2,
        )
    resid = psi @ coeffs - outputs
    var = float(np.sum((outputs - outputs.mean()) ** 2))
    diagnostics.update(
        {
            "epsilon": chosen,
            "residual_norm": float(np.linalg.norm(resid)),
            "n_nonzero": int(np.count_nonzero(coeffs)),
            "train_r2": 1.0 - float(resid @ resid) / var if var > 0 else 1.0,
            "residual_bound_infeasible": infeasible,
        }
    )
    return Surrogate(basis=basis, coefficients=coeffs, epsilon=chosen,
                     diagnostics=diagnostics)


def r_squared(surrogate, designs, outputs):
    """Coefficient of determination on held-out data.

    Requires at least two points and nonconstant outputs; otherwise the
    statistic is undefined and a `ValidationError` raises.
    """
    outputs = np.asarray(outputs, dtype=float).ravel()
    if outputs.shape[0] < 2:
        raise ValidationError("r_squared needs at least two points")
    var = float(np.sum((outputs - outputs.mean()) ** 2))
    if var <= 0.0:
        raise ValidationError("outputs are constant; r_squared is undefined")
    pred = surrogate.predict(designs)
    resid = pred - outputs
    return 1.0 - float(resid @ resid) / var
