"""Airfoil profiles and free-form deformation.

A profile is two open curves, suction and pressure side, sharing a
normalized axial chord.  Deformations displace ordinates only (pitchwise
moves), driven by a Bernstein-weighted control lattice: a design vector
in ``[-1, 1]^d`` scales per-node displacement bounds and the lattice
blends them smoothly along the chord.
"""

import csv
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import ExtrapolationError, ValidationError


def _check_side(x, y, label):
    if x.shape != y.shape or x.ndim != 1:
        raise ValidationError(f"{label} side arrays must be equal-length vectors")
    if x.shape[0] < 2:
        raise ValidationError(f"{label} side needs at least 2 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError(f"{label} side contains non-finite coordinates")
    if np.any(np.diff(x) <= 0):
        raise ValidationError(
            f"{label} side abscissae must be strictly increasing"
        )


@dataclass(frozen=True)
class AirfoilProfile:
    """Immutable two-sided profile sampled leading edge to trailing edge.

    ``x`` and ``y`` concatenate the suction side followed by the
    pressure side; ``n_suction`` marks the split.  Within each side the
    abscissae increase strictly.
    """

    x: np.ndarray
    y: np.ndarray
    n_suction: int

    def __post_init__(self):
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if not 2 <= self.n_suction <= x.shape[0] - 1:
            raise ValidationError(
                f"n_suction={self.n_suction} leaves an empty side "
                f"for {x.shape[0]} points"
            )
        _check_side(self.suction_x, self.suction_y, "suction")
        _check_side(self.pressure_x, self.pressure_y, "pressure")
        x.flags.writeable = False
        y.flags.writeable = False

    @property
    def n_points(self):
        return self.x.shape[0]

    @property
    def suction_x(self):
        return self.x[: self.n_suction]

    @property
    def suction_y(self):
        return self.y[: self.n_suction]

    @property
    def pressure_x(self):
        return self.x[self.n_suction :]

    @property
    def pressure_y(self):
        return self.y[self.n_suction :]

    def with_ordinates(self, y):
        y = np.asarray(y, dtype=float)
        if y.shape != self.y.shape:
            raise ValidationError(
                f"ordinate shape {y.shape} does not match profile {self.y.shape}"
            )
        return AirfoilProfile(self.x, y, self.n_suction)

    def same_abscissae(self, other):
        return (
            self.n_suction == other.n_suction
            and self.x.shape == other.x.shape
            and np.array_equal(self.x, other.x)
        )


def displacement(profile, baseline):
    """Pointwise ordinate difference ``profile - baseline``.

    Both profiles must share abscissae and side split exactly; the
    difference of resampled-but-unequal grids would silently mix
    interpolation error into tolerance statistics.
    """
    if not baseline.same_abscissae(profile):
        raise ValidationError("profiles do not share abscissae; resample first")
    return profile.y - baseline.y


def resample(profile, target):
    """Interpolate a profile onto new per-side abscissae.

    ``target`` is either a plain vector of abscissae applied to both
    sides, or another `AirfoilProfile` whose grid is adopted.  Piecewise
    linear interpolation runs per side; targets outside a side's span
    raise `ExtrapolationError` rather than extrapolate.
    """
    if isinstance(target, AirfoilProfile):
        ts, tp = target.suction_x, target.pressure_x
        n_s = target.n_suction
    else:
        ts = tp = np.asarray(target, dtype=float)
        if ts.ndim != 1 or ts.shape[0] < 2:
            raise ValidationError("target abscissae must be a vector of >= 2 points")
        n_s = ts.shape[0]
    out = []
    for tx, sx, sy, label in (
        (ts, profile.suction_x, profile.suction_y, "suction"),
        (tp, profile.pressure_x, profile.pressure_y, "pressure"),
    ):
        if tx[0] < sx[0] - 1e-12 or tx[-1] > sx[-1] + 1e-12:
            raise ExtrapolationError(
                f"{label} targets [{tx[0]:.6g}, {tx[-1]:.6g}] outside "
                f"span [{sx[0]:.6g}, {sx[-1]:.6g}]"
            )
        out.append(np.interp(np.clip(tx, sx[0], sx[-1]), sx, sy))
    x_new = np.concatenate([ts, tp])
    return AirfoilProfile(x_new, np.concatenate(out), n_s)


@dataclass(frozen=True)
class FFDLattice:
    """Two-row Bernstein control lattice driving pitchwise displacements.

    ``stations`` control columns span ``[x_lo, x_hi]`` axially; the two
    rows sit at ``y_lo`` and ``y_hi``.  Node ``k = row * stations + i``
    pairs design component ``k`` with axial Bernstein weight ``i`` and
    row weight ``(1 - v)`` (lower row 0) or ``v`` (upper row 1), where
    ``u, v`` are the box-normalized point coordinates.  Displacements
    are ``amplitude`` times the blended design components, pitchwise
    only.  The design dimension is ``2 * stations``.
    """

    stations: int
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    amplitude: float = 0.015

    def __post_init__(self):
        if self.stations < 2:
            raise ValidationError(f"need >= 2 stations, got {self.stations}")
        if not (self.x_lo < self.x_hi and self.y_lo < self.y_hi):
            raise ValidationError("lattice box is degenerate")
        if self.amplitude <= 0:
            raise ValidationError(f"amplitude must be positive, got {self.amplitude}")

    @property
    def n_design(self):
        return 2 * self.stations

    @classmethod
    def around(cls, profile, stations, margin_x=0.05, margin_y=0.15, amplitude=0.015):
        """Build a lattice box strictly containing a profile."""
        span_x = profile.x.max() - profile.x.min()
        span_y = max(profile.y.max() - profile.y.min(), 1e-3)
        return cls(
            stations=stations,
            x_lo=float(profile.x.min() - margin_x * span_x),
            x_hi=float(profile.x.max() + margin_x * span_x),
            y_lo=float(profile.y.min() - margin_y * span_y),
            y_hi=float(profile.y.max() + margin_y * span_y),
            amplitude=amplitude,
        )

    def weights(self, profile):
        """Blending matrix W of shape (n_points, n_design).

        Row k of ``W @ x`` gives the unit-amplitude pitchwise
        displacement of profile point k.  Every profile point must lie
        strictly inside the lattice box.
        """
        x, y = profile.x, profile.y
        if (
            x.min() <= self.x_lo
            or x.max() >= self.x_hi
            or y.min() <= self.y_lo
            or y.max() >= self.y_hi
        ):
            raise ValidationError("profile is not strictly inside the lattice box")
        u = (x - self.x_lo) / (self.x_hi - self.x_lo)
        v = (y - self.y_lo) / (self.y_hi - self.y_lo)
        deg = self.stations - 1
        bern = np.empty((x.shape[0], self.stations))
        for i in range(self.stations):
            bern[:, i] = comb(deg, i) * u**i * (1.0 - u) ** (deg - i)
        w = np.empty((x.shape[0], self.n_design))
        w[:, : self.stations] = bern * (1.0 - v)[:, None]
        w[:, self.stations :] = bern * v[:, None]
        return w


def check_design_vector(x, d):
    """Validate a design vector lies in ``[-1, 1]^d``; returns it as float."""
    x = np.asarray(x, dtype=float).ravel()
    if x.shape[0] != d:
        raise ValidationError(f"design vector has {x.shape[0]} components, expected {d}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("design vector contains non-finite components")
    over = np.nonzero(np.abs(x) > 1.0 + 1e-12)[0]
    if over.size:
        k = int(over[0])
        raise ValidationError(
            f"design component {k} = {x[k]:.6g} lies outside [-1, 1]"
        )
    return x


def deform(baseline, lattice, design, weights=None):
    """Apply a lattice deformation to a baseline profile.

    ``weights`` may carry a precomputed ``lattice.weights(baseline)``
    matrix when deforming many designs against one baseline.
    """
    design = check_design_vector(design, lattice.n_design)
    w = lattice.weights(baseline) if weights is None else weights
    return baseline.with_ordinates(baseline.y + lattice.amplitude * (w @ design))


def synthetic_baseline(points_per_side=120):
    """Cambered two-arc test profile on cosine-clustered abscissae.

    Each side is a cubic arc vanishing at both ends of the unit chord;
    the suction arc is taller than the pressure arc, giving a thin
    cambered section with sharp leading and trailing edges.
    """
    if points_per_side < 2:
        raise ValidationError("points_per_side must be >= 2")
    t = 0.5 * (1.0 - np.cos(np.linspace(0.0, np.pi, points_per_side)))
    suction = t * (1.0 - t) * (0.30 - 0.10 * t)
    pressure = -t * (1.0 - t) * (0.10 - 0.04 * t)
    return AirfoilProfile(
        np.concatenate([t, t]), np.concatenate([suction, pressure]), points_per_side
    )


# ---------------------------------------------------------------------------
# Persistence: one profile per csv file with a side,x,y layout.
# ---------------------------------------------------------------------------


def write_profile_csv(path, profile, comment=None):
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["side", "x", "y"])
        for i in range(profile.n_points):
            side = "suction" if i < profile.n_suction else "pressure"
            writer.writerow([side, f"{profile.x[i]:.17g}", f"{profile.y[i]:.17g}"])


def read_profile_csv(path):
    sides = {"suction": ([], []), "pressure": ([], [])}
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["side", "x", "y"]:
        raise ValidationError(f"{path}: expected a 'side,x,y' header")
    for row in rows[1:]:
        if len(row) != 3:
            raise ValidationError(f"{path}: malformed row {row!r}")
        side = row[0].strip()
        if side not in sides:
            raise ValidationError(f"{path}: unknown side label {side!r}")
        try:
            sides[side][0].append(float(row[1]))
            sides[side][1].append(float(row[2]))
        except ValueError as exc:
            raise ValidationError(f"{path}: non-numeric row {row!r}") from exc
    sx, sy = sides["suction"]
    px, py = sides["pressure"]
    return AirfoilProfile(
        np.array(sx + px), np.array(sy + py), len(sx)
    )
