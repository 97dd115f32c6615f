"""Blade envelopes: tolerance statistics and the scrap-or-use gate.

An envelope summarizes an ensemble of performance-equivalent profiles
by its coordinate-wise mean, the ordinate covariance, and a control
zone of coordinate-wise extremes.  A measured part is judged by where
it falls: inside the control zone and close to the mean in Mahalanobis
distance means accept, far means scrap, and a logistic gate grades the
band in between so borderline parts can be routed to review.
"""

import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import expit, gammainc

from .errors import ConvergenceError, InseparableDataWarning, ValidationError
from .geometry import AirfoilProfile
from .ingest import rng_from_seed
from .numerics import psd_spectrum, symmetrize

_ZONE_TOL = 1e-12
_RANK_TOL = 1e-10


class EnvelopeAccumulator:
    """Streaming mean/covariance/extremes over profile ordinate rows.

    Chunks are folded in with the pairwise merge rule, so the result
    matches a direct two-pass computation to round-off even for long
    ensembles.  Covariance uses the ``n - 1`` divisor.
    """

    def __init__(self, n_coords):
        if n_coords < 1:
            raise ValidationError("accumulator needs at least one coordinate")
        self.n_coords = int(n_coords)
        self.count = 0
        self._mean = np.zeros(self.n_coords)
        self._m2 = np.zeros((self.n_coords, self.n_coords))
        self._lo = np.full(self.n_coords, np.inf)
        self._hi = np.full(self.n_coords, -np.inf)

    def push(self, rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        if rows.shape[1] != self.n_coords:
            raise ValidationError(
                f"rows have {rows.shape[1]} coordinates, expected {self.n_coords}"
            )
        if not np.all(np.isfinite(rows)):
            raise ValidationError("ordinate rows contain non-finite values")
        nb = rows.shape[0]
        if nb == 0:
            return
        mb = rows.mean(axis=0)
        diff = rows - mb
        m2b = diff.T @ diff
        na = self.count
        n = na + nb
        delta = mb - self._mean
        self._mean = self._mean + delta * (nb / n)
        self._m2 = self._m2 + m2b + np.outer(delta, delta) * (na * nb / n)
        self.count = n
        np.minimum(self._lo, rows.min(axis=0), out=self._lo)
        np.maximum(self._hi, rows.max(axis=0), out=self._hi)

    def statistics(self):
        """Return ``(count, mean, covariance, lo, hi)``; needs >= 2 rows."""
        if self.count < 2:
            raise ValidationError(
                f"covariance needs at least 2 members, have {self.count}"
            )
        cov = symmetrize(self._m2 / (self.count - 1))
        return self.count, self._mean.copy(), cov, self._lo.copy(), self._hi.copy()


@dataclass(frozen=True)
class LogisticGate:
    """Logistic grading of the Mahalanobis distance.

    Scores follow ``beta1 / (1 + exp(-beta2 * (zeta - beta3)))``: an
    s-curve from 0 (deep inside tolerance) to ``beta1`` (far outside),
    centered at ``beta3`` with steepness ``beta2``.
    """

    beta1: float = 1.0
    beta2: float = 5.0
    beta3: float = 3.0

    def __post_init__(self):
        if not (self.beta1 > 0 and self.beta2 > 0):
            raise ValidationError(
                f"beta1 and beta2 must be positive, got {self.beta1}, {self.beta2}"
            )

    def to_dict(self):
        return {
            "beta1": float(self.beta1),
            "beta2": float(self.beta2),
            "beta3": float(self.beta3),
        }

    @classmethod
    def from_dict(cls, payload):
        return cls(
            beta1=float(payload["beta1"]),
            beta2=float(payload["beta2"]),
            beta3=float(payload["beta3"]),
        )


def gate_score(gate, zeta):
    """Evaluate the gate on one distance or an array of them."""
    zeta = np.asarray(zeta, dtype=float)
    score = gate.beta1 * expit(gate.beta2 * (zeta - gate.beta3))
    return float(score) if score.ndim == 0 else score


@dataclass(frozen=True)
class BladeEnvelope:
    """Manufacturing envelope synthesized from equivalent profiles.

    Holds the shared abscissae grid, the ensemble mean ordinates, the
    ordinate covariance, the control-zone bounds, and the gating
    policy.  ``zeta_use`` and ``zeta_scrap`` bracket the review band of
    Mahalanobis distances.
    """

    x: np.ndarray
    n_suction: int
    mean: np.ndarray
    cov: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_members: int
    gate: LogisticGate = field(default_factory=LogisticGate)
    zeta_use: float = 3.5
    zeta_scrap: float = 7.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        n = self.x.shape[0]
        for name in ("mean", "lo", "hi"):
            if getattr(self, name).shape != (n,):
                raise ValidationError(f"{name} does not match the grid size {n}")
        if self.cov.shape != (n, n):
            raise ValidationError("covariance does not match the grid size")
        if self.n_members < 2:
            raise ValidationError("an envelope needs at least 2 members")
        if not 0 < self.zeta_use <= self.zeta_scrap:
            raise ValidationError(
                f"need 0 < zeta_use <= zeta_scrap, got "
                f"{self.zeta_use}, {self.zeta_scrap}"
            )
        if np.any(self.lo > self.mean + _ZONE_TOL) or np.any(
            self.hi < self.mean - _ZONE_TOL
        ):
            raise ValidationError("control zone does not bracket the mean")

    @property
    def mean_profile(self):
        return AirfoilProfile(self.x, self.mean, self.n_suction)

    @property
    def rank(self):
        return self._spectrum()[2]

    def _spectrum(self):
        cached = getattr(self, "_spectrum_cache", None)
        if cached is None:
            cached = psd_spectrum(self.cov, rel_tol=_RANK_TOL)
            object.__setattr__(self, "_spectrum_cache", cached)
        return cached

    def with_gate(self, gate=None, zeta_use=None, zeta_scrap=None):
        return replace(
            self,
            gate=self.gate if gate is None else gate,
            zeta_use=self.zeta_use if zeta_use is None else float(zeta_use),
            zeta_scrap=self.zeta_scrap if zeta_scrap is None else float(zeta_scrap),
        )

    def to_dict(self):
        return {
            "schema": 1,
            "kind": "envelope",
            "x": [float(v) for v in self.x],
            "n_suction": int(self.n_suction),
            "mean": [float(v) for v in self.mean],
            "cov": [[float(v) for v in row] for row in self.cov],
            "lo": [float(v) for v in self.lo],
            "hi": [float(v) for v in self.hi],
            "n_members": int(self.n_members),
            "gate": self.gate.to_dict(),
            "zeta_use": float(self.zeta_use),
            "zeta_scrap": float(self.zeta_scrap),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, payload):
        try:
            return cls(
                x=np.asarray(payload["x"], dtype=float),
                n_suction=int(payload["n_suction"]),
                mean=np.asarray(payload["mean"], dtype=float),
                cov=np.asarray(payload["cov"], dtype=float),
                lo=np.asarray(payload["lo"], dtype=float),
                hi=np.asarray(payload["hi"], dtype=float),
                n_members=int(payload["n_members"]),
                gate=LogisticGate.from_dict(payload["gate"]),
                zeta_use=float(payload["zeta_use"]),
                zeta_scrap=float(payload["zeta_scrap"]),
                provenance=dict(payload.get("provenance", {})),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed envelope payload: {exc}") from exc

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _member_rows(profiles, template=None):
    for prof in profiles:
        if template is None:
            template = prof
        elif not template.same_abscissae(prof):
            raise ValidationError("ensemble members do not share abscissae")
        yield template, prof.y


def build_envelope(profiles, gate=None, zeta_use=3.5, zeta_scrap=7.0,
                   provenance=None):
    """Synthesize an envelope from an ensemble of equivalent profiles.

    All members must share abscissae and side split exactly.  The
    covariance uses the unbiased ``H - 1`` divisor; the control zone is
    the coordinate-wise min/max over members.
    """
    template = None
    acc = None
    for template, row in _member_rows(profiles):
        if acc is None:
            acc = EnvelopeAccumulator(template.n_points)
        acc.push(row[None, :])
    if acc is None:
        raise ValidationError("no profiles supplied")
    count, mean, cov, lo, hi = acc.statistics()
    return BladeEnvelope(
        x=template.x,
        n_suction=template.n_suction,
        mean=mean,
        cov=cov,
        lo=lo,
        hi=hi,
        n_members=count,
        gate=gate if gate is not None else LogisticGate(),
        zeta_use=zeta_use,
        zeta_scrap=zeta_scrap,
        provenance=provenance or {},
    )


def build_envelope_from_rows(template, row_chunks, gate=None, zeta_use=3.5,
                             zeta_scrap=7.0, provenance=None):
    """Streaming variant of `build_envelope` over ordinate-row chunks."""
    acc = EnvelopeAccumulator(template.n_points)
    for chunk in row_chunks:
        acc.push(chunk)
    count, mean, cov, lo, hi = acc.statistics()
    return BladeEnvelope(
        x=template.x,
        n_suction=template.n_suction,
        mean=mean,
        cov=cov,
        lo=lo,
        hi=hi,
        n_members=count,
        gate=gate if gate is not None else LogisticGate(),
        zeta_use=zeta_use,
        zeta_scrap=zeta_scrap,
        provenance=provenance or {},
    )


def _ordinates(env, profile):
    if isinstance(profile, AirfoilProfile):
        if not env.mean_profile.same_abscissae(profile):
            raise ValidationError(
                "profile does not share the envelope grid; resample first"
            )
        return profile.y
    y = np.asarray(profile, dtype=float).ravel()
    if y.shape[0] != env.x.shape[0]:
        raise ValidationError(
            f"ordinate vector has {y.shape[0]} points, envelope has {env.x.shape[0]}"
        )
    return y


def in_control_zone(env, profile):
    """Per-coordinate zone membership and the overall verdict.

    Returns ``(inside, ok)`` where ``inside`` flags each coordinate
    within ``[lo, hi]`` to a 1e-12 slack and ``ok`` is their
    conjunction.
    """
    y = _ordinates(env, profile)
    inside = (y >= env.lo - _ZONE_TOL) & (y <= env.hi + _ZONE_TOL)
    return inside, bool(inside.all())


def mahalanobis(env, profile):
    """Distance of a profile from the envelope mean, scaled by tolerance.

    The covariance is inverted on its numerical range; deviation
    components outside that range (directions the ensemble never
    moved along) are penalized at the smallest retained eigenvalue,
    the tightest tolerance the envelope exhibits, so out-of-span
    deviations rank at least as severe as in-span ones of equal size.
    """
    y = _ordinates(env, profile)
    delta = y - env.mean
    vals, vecs, rank = env._spectrum()
    if rank == 0:
        return 0.0 if float(np.abs(delta).max(initial=0.0)) == 0.0 else np.inf
    q = vecs[:, :rank]
    lam = vals[:rank]
    t = q.T @ delta
    in_span = float(np.sum(t * t / lam))
    resid = delta - q @ t
    out_span = float(resid @ resid) / float(lam[rank - 1])
    return float(np.sqrt(in_span + out_span))


def chi2_quantile(dof, prob):
    """Quantile of the chi-squared distribution by monotone bisection."""
    if dof < 1:
        raise ValidationError(f"dof must be >= 1, got {dof}")
    if not 0.0 < prob < 1.0:
        raise ValidationError(f"probability must lie in (0, 1), got {prob}")
    half = 0.5 * float(dof)
    hi = float(max(dof, 1.0))
    for _ in range(200):
        if gammainc(half, 0.5 * hi) >= prob:
            break
        hi *= 2.0
    else:
        raise ConvergenceError("chi-squared quantile bracket did not close")
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if gammainc(half, 0.5 * mid) < prob:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def chi2_threshold(dof, significance):
    """Distance threshold: the square root of the chi-squared quantile.

    Under a Gaussian tolerance model with ``dof`` effective directions,
    a part inside this distance is within the ``significance`` mass of
    in-tolerance variation.
    """
    return float(np.sqrt(chi2_quantile(dof, significance)))


@dataclass(frozen=True)
class VerdictReport:
    verdict: str  # "use" | "review" | "scrap"
    zeta: float
    score: float
    in_zone: bool
    zone_violations: np.ndarray

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "zeta": float(self.zeta),
            "score": float(self.score),
            "in_zone": bool(self.in_zone),
            "zone_violations": [int(i) for i in self.zone_violations],
        }


def verdict(env, profile):
    """Scrap-or-use decision for one measured profile.

    A part is scrapped when it leaves the control zone or its distance
    reaches ``zeta_scrap``; used when it stays in zone below
    ``zeta_use``; routed to review in between.  The gate score is
    reported alongside for dashboards and thresholding policies.
    """
    inside, ok = in_control_zone(env, profile)
    zeta = mahalanobis(env, profile)
    score = gate_score(env.gate, zeta)
    if not ok or zeta >= env.zeta_scrap:
        label = "scrap"
    elif zeta < env.zeta_use:
        label = "use"
    else:
        label = "review"
    return VerdictReport(
        verdict=label,
        zeta=zeta,
        score=score,
        in_zone=ok,
        zone_violations=np.nonzero(~inside)[0],
    )


def _logistic_loss_grad(log_b2, b3, zeta, labels):
    b2 = np.exp(log_b2)
    arg = b2 * (zeta - b3)
    p = expit(arg)
    pc = np.clip(p, 1e-12, 1.0 - 1e-12)
    loss = -float(np.mean(labels * np.log(pc) + (1 - labels) * np.log(1 - pc)))
    err = p - labels
    d_b2 = float(np.mean(err * (zeta - b3)))
    d_b3 = float(np.mean(err * -b2))
    return loss, np.array([d_b2 * b2, d_b3])


def calibrate_gate(use_distances, scrap_distances, seed=0, restarts=8,
                   iters=400, beta1=1.0):
    """Fit gate steepness and center to labeled distance data.

    ``use_distances`` carries parts judged acceptable, ``scrap_distances``
    parts judged defective.  Cross-entropy is minimized over the
    steepness (in log space) and center with seeded multi-start
    backtracking gradient descent; ``beta1`` stays fixed since binary
    labels carry no scale information.  If the final fit beats a
    constant predictor by nothing, the data is inseparable and an
    `InseparableDataWarning` reports it alongside the best gate found.
    """
    d_use = np.asarray(use_distances, dtype=float).ravel()
    d_scrap = np.asarray(scrap_distances, dtype=float).ravel()
    if d_use.size == 0 or d_scrap.size == 0:
        raise ValidationError("both labeled groups must be nonempty")
    zeta = np.concatenate([d_use, d_scrap])
    if not np.all(np.isfinite(zeta)) or np.any(zeta < 0):
        raise ValidationError("distances must be finite and nonnegative")
    labels = np.concatenate([np.zeros(d_use.size), np.ones(d_scrap.size)])

    rng = rng_from_seed(seed)
    z_lo, z_hi = float(zeta.min()), float(zeta.max())
    best_loss = np.inf
    best_theta = None
    for _ in range(restarts):
        log_b2 = float(rng.uniform(np.log(0.5), np.log(50.0)))
        b3 = float(rng.uniform(z_lo, z_hi)) if z_hi > z_lo else z_lo
        step = 0.5
        loss, grad = _logistic_loss_grad(log_b2, b3, zeta, labels)
        for _ in range(iters):
            gnorm2 = float(grad @ grad)
            if gnorm2 < 1e-20:
                break
            while step > 1e-12:
                cand = (log_b2 - step * grad[0], b3 - step * grad[1])
                cand_loss, cand_grad = _logistic_loss_grad(*cand, zeta, labels)
                if cand_loss <= loss - 1e-4 * step * gnorm2:
                    break
                step *= 0.5
            else:
                break
            log_b2, b3 = cand
            loss, grad = cand_loss, cand_grad
            step = min(step * 1.3, 10.0)
        if loss < best_loss:
            best_loss = loss
            best_theta = (log_b2, b3)

    rate = labels.mean()
    base = -(rate * np.log(rate) + (1 - rate) * np.log(1 - rate))
    if best_loss >= base - 1e-9:
        warnings.warn(
            "labeled distances are inseparable; returning the best gate found",
            InseparableDataWarning,
            stacklevel=2,
        )
    log_b2, b3 = best_theta
    return LogisticGate(beta1=float(beta1), beta2=float(np.exp(log_b2)), beta3=b3)
