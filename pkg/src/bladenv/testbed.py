"""Synthetic response functions with known low-dimensional structure.

These stand in for a flow solver during development and validation:
each oracle exposes the exact active subspace it was built around, so
discovery algorithms can be scored without external data.  The
geometry-backed oracle evaluates a functional of the displacement
field itself, which makes its value independent of how the
deformation was parameterized; restrictions of one functional to two
different lattices are therefore directly comparable.
"""

import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .geometry import AirfoilProfile, displacement
from .ingest import rng_from_seed


def sparse_direction(d, n_nonzero=4, seed=7):
    """Unit vector with a few seeded nonzero components.

    Sparse directions keep low-order ridge responses representable by
    small coefficient sets, matching the sparsity the recovery fit
    relies on.
    """
    if not 1 <= n_nonzero <= d:
        raise ValidationError(f"need 1 <= n_nonzero <= {d}, got {n_nonzero}")
    rng = rng_from_seed(seed)
    support = rng.choice(d, size=n_nonzero, replace=False)
    w = np.zeros(d)
    w[np.sort(support)] = rng.standard_normal(n_nonzero)
    norm = np.linalg.norm(w)
    if norm == 0.0:
        w[int(np.sort(support)[0])] = 1.0
        norm = 1.0
    return w / norm


def _ridge_profile(t):
    return t**3 + 0.5 * t


_KINDS = ("linear", "ridge", "quadratic-ridge")


@dataclass(frozen=True)
class SyntheticOracle:
    """Closed-form response with a known active subspace.

    Kinds: ``linear`` is ``scale * w.x``; ``ridge`` composes the same
    projection with a strictly monotone cubic; ``quadratic-ridge``
    responds to two directions as ``(w1.x)^2 + 0.1 * (w2.x)``, all
    after ``scale``.  A positive ``noise`` adds a Gaussian perturbation
    that is a pure function of the design vector (hash-keyed), so
    repeated evaluations of one design agree exactly.
    """

    kind: str
    w: np.ndarray
    scale: float = 1.0
    noise: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValidationError(f"unknown oracle kind {self.kind!r}")
        w = np.atleast_2d(np.asarray(self.w, dtype=float))
        need = 2 if self.kind == "quadratic-ridge" else 1
        if w.shape[0] != need:
            raise ValidationError(
                f"{self.kind} oracle needs {need} direction rows, got {w.shape[0]}"
            )
        if self.noise < 0:
            raise ValidationError("noise amplitude must be nonnegative")
        object.__setattr__(self, "w", w)

    @property
    def d(self):
        return self.w.shape[1]

    def _noise_for(self, x):
        digest = hashlib.blake2b(
            np.ascontiguousarray(x, dtype=float).tobytes(), digest_size=8
        ).digest()
        counter = int.from_bytes(digest, "little")
        rng = np.random.Generator(
            np.random.Philox(key=np.array([self.noise_seed, counter], dtype=np.uint64))
        )
        return self.noise * rng.standard_normal()

    def evaluate(self, x):
        """Response at one design vector or each row of a design matrix."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = np.atleast_2d(x)
        if pts.shape[1] != self.d:
            raise ValidationError(
                f"design dimension {pts.shape[1]} does not match oracle d={self.d}"
            )
        proj = self.scale * (pts @ self.w.T)
        if self.kind == "linear":
            vals = proj[:, 0]
        elif self.kind == "ridge":
            vals = _ridge_profile(proj[:, 0])
        else:
            vals = proj[:, 0] ** 2 + 0.1 * proj[:, 1]
        if self.noise > 0.0:
            vals = vals + np.array([self._noise_for(row) for row in pts])
        return float(vals[0]) if single else vals

    def true_active_subspace(self):
        """Orthonormal basis of the directions the response varies along."""
        q, _ = np.linalg.qr(self.w.T)
        return q


def true_active_subspace(oracle):
    return oracle.true_active_subspace()


@dataclass(frozen=True)
class GeometryOracle:
    """Response defined on displacement fields rather than design vectors.

    The raw functional is ``g(phi . delta)`` where ``delta`` is the
    pitchwise displacement of a profile from the shared baseline and
    ``g`` follows the chosen oracle kind.  Restricting to a deformation
    lattice composes the functional with that lattice's blending, which
    yields an ordinary design-space oracle; restrictions to different
    lattices agree on any pair of deformations with matching
    displacement fields.
    """

    baseline: AirfoilProfile
    phi: np.ndarray
    kind: str = "ridge"
    scale: float = 1.0
    noise: float = 0.0
    noise_seed: int = 0

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).ravel()
        if phi.shape[0] != self.baseline.n_points:
            raise ValidationError(
                f"functional has {phi.shape[0]} weights for "
                f"{self.baseline.n_points} profile points"
            )
        if self.kind not in ("linear", "ridge"):
            raise ValidationError(
                f"geometry oracle supports linear and ridge kinds, not {self.kind!r}"
            )
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_design_direction(cls, lattice, baseline, w, kind="ridge",
                              unit_scale=True, noise=0.0, noise_seed=0):
        """Build the functional whose lattice restriction rides along ``w``.

        ``phi`` is chosen as the minimum-norm preimage of ``w`` under
        the lattice blending, so restricting back to the same lattice
        reproduces ``w`` exactly.  With ``unit_scale`` the restriction
        has unit effective scale regardless of the lattice amplitude.
        """
        w = np.asarray(w, dtype=float).ravel()
        if w.shape[0] != lattice.n_design:
            raise ValidationError(
                f"direction has {w.shape[0]} components for a "
                f"{lattice.n_design}-node lattice"
            )
        blend = lattice.weights(baseline)
        gram = blend.T @ blend
        phi = blend @ np.linalg.solve(gram, w)
        scale = 1.0
        if unit_scale:
            scale = 1.0 / (lattice.amplitude * float(np.linalg.norm(w)))
        return cls(baseline=baseline, phi=phi, kind=kind, scale=scale,
                   noise=noise, noise_seed=noise_seed)

    def evaluate_profile(self, profile):
        """Functional value on a deformed profile."""
        t = self.scale * float(self.phi @ displacement(profile, self.baseline))
        val = t if self.kind == "linear" else _ridge_profile(t)
        if self.noise > 0.0:
            helper = SyntheticOracle(
                kind="linear", w=np.ones((1, 1)), noise=self.noise,
                noise_seed=self.noise_seed,
            )
            val = val + helper._noise_for(profile.y)
        return val

    def restrict(self, lattice):
        """Design-space oracle equivalent to this functional on a lattice."""
        blend = lattice.weights(self.baseline)
        direction = blend.T @ self.phi
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            raise ValidationError(
                "functional is blind to every deformation of this lattice"
            )
        return SyntheticOracle(
            kind=self.kind,
            w=(direction / norm)[None, :],
            scale=self.scale * lattice.amplitude * norm,
            noise=self.noise,
            noise_seed=self.noise_seed,
        )
