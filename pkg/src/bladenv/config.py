"""Pipeline configuration: schema, defaults, validation, canonical form.

A config file is JSON with one object per stage.  Unknown keys are
rejected rather than ignored, so typos fail loudly.  ``resolve``
returns the fully defaulted canonical dictionary; its serialization is
what stage hashing and artifact staleness checks run on, so resolved
configs are the unit of reproducibility.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Union

from .errors import ConfigError

_INDEX_KINDS = ("tensorial", "total-order", "euclidean", "hyperbolic")
_QOI_KINDS = ("linear", "ridge")
_BUFFER_MODES = ("fixed", "chi2")


def derive_seed(global_seed, stage):
    """Stable per-stage seed from the run seed and the stage name."""
    digest = hashlib.blake2b(
        f"{int(global_seed)}:{stage}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little") >> 1


def _take(section, raw, key, kind, default=None, required=False):
    if key not in raw:
        if required:
            raise ConfigError(f"{section}: missing required key {key!r}")
        return default
    value = raw.pop(key)
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        value = float(value)
    if kind is not None and not isinstance(value, kind):
        raise ConfigError(
            f"{section}.{key}: expected {getattr(kind, '__name__', kind)}, "
            f"got {type(value).__name__}"
        )
    return value


def _done(section, raw):
    if raw:
        raise ConfigError(f"{section}: unknown keys {sorted(raw)}")


def _positive(section, key, value, minimum=0):
    if value <= minimum:
        raise ConfigError(f"{section}.{key}: must exceed {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class DesignConfig:
    stations: int = 10
    amplitude: float = 0.015
    points_per_side: int = 120
    margin_x: float = 0.05
    margin_y: float = 0.15

    @property
    def d(self):
        return 2 * self.stations

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        out = cls(
            stations=_take("design", raw, "stations", int, 10),
            amplitude=_take("design", raw, "amplitude", float, 0.015),
            points_per_side=_take("design", raw, "points_per_side", int, 120),
            margin_x=_take("design", raw, "margin_x", float, 0.05),
            margin_y=_take("design", raw, "margin_y", float, 0.15),
        )
        _done("design", raw)
        if out.stations < 2:
            raise ConfigError(f"design.stations: need >= 2, got {out.stations}")
        _positive("design", "amplitude", out.amplitude)
        if out.points_per_side < 2:
            raise ConfigError("design.points_per_side: need >= 2")
        return out


@dataclass(frozen=True)
class DoeConfig:
    count: int = 300
    seed: Optional[int] = None

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        out = cls(
            count=_take("doe", raw, "count", int, 300),
            seed=_take("doe", raw, "seed", int, None),
        )
        _done("doe", raw)
        _positive("doe", "count", out.count)
        return out


@dataclass(frozen=True)
class QoiConfig:
    kind: str = "ridge"
    name: str = "loss"
    direction_nonzero: int = 4
    direction_seed: int = 7
    noise: float = 0.0

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        out = cls(
            kind=_take("qoi", raw, "kind", str, "ridge"),
            name=_take("qoi", raw, "name", str, "loss"),
            direction_nonzero=_take("qoi", raw, "direction_nonzero", int, 4),
            direction_seed=_take("qoi", raw, "direction_seed", int, 7),
            noise=_take("qoi", raw, "noise", float, 0.0),
        )
        _done("qoi", raw)
        if out.kind not in _QOI_KINDS:
            raise ConfigError(f"qoi.kind: want one of {_QOI_KINDS}, got {out.kind!r}")
        if not out.name or any(c in out.name for c in ",\n\r"):
            raise ConfigError(f"qoi.name: invalid column name {out.name!r}")
        _positive("qoi", "direction_nonzero", out.direction_nonzero)
        if out.noise < 0:
            raise ConfigError("qoi.noise: must be nonnegative")
        return out


@dataclass(frozen=True)
class SurrogateConfig:
    index_set: str = "total-order"
    order: int = 3
    epsilon: Union[str, float] = 1e-6
    cv_folds: int = 5
    admm_iters: int = 5000

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        eps = raw.pop("epsilon", 1e-6)
        if isinstance(eps, int) and not isinstance(eps, bool):
            eps = float(eps)
        if not (eps == "auto" or isinstance(eps, float)):
            raise ConfigError("surrogate.epsilon: expected a number or 'auto'")
        if isinstance(eps, float) and eps < 0:
            raise ConfigError("surrogate.epsilon: must be nonnegative")
        out = cls(
            index_set=_take("surrogate", raw, "index_set", str, "total-order"),
            order=_take("surrogate", raw, "order", int, 3),
            epsilon=eps,
            cv_folds=_take("surrogate", raw, "cv_folds", int, 5),
            admm_iters=_take("surrogate", raw, "admm_iters", int, 5000),
        )
        _done("surrogate", raw)
        if out.index_set not in _INDEX_KINDS:
            raise ConfigError(
                f"surrogate.index_set: want one of {_INDEX_KINDS}, got {out.index_set!r}"
            )
        if out.order < 0:
            raise ConfigError("surrogate.order: must be nonnegative")
        if out.cv_folds < 2:
            raise ConfigError("surrogate.cv_folds: need >= 2")
        _positive("surrogate", "admm_iters", out.admm_iters)
        return out


@dataclass(frozen=True)
class SubspaceConfig:
    samples: int = 100_000
    seed: Optional[int] = None
    rank: Union[str, int] = "auto"

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        rank = raw.pop("rank", "auto")
        if not (rank == "auto" or isinstance(rank, int)):
            raise ConfigError("subspace.rank: expected an integer or 'auto'")
        out = cls(
            samples=_take("subspace", raw, "samples", int, 100_000),
            seed=_take("subspace", raw, "seed", int, None),
            rank=rank,
        )
        _done("subspace", raw)
        _positive("subspace", "samples", out.samples)
        if isinstance(out.rank, int) and out.rank < 1:
            raise ConfigError("subspace.rank: must be >= 1")
        return out


@dataclass(frozen=True)
class SamplerConfig:
    count: int = 500
    seed: Optional[int] = None
    burn_in: int = 100
    thin: int = 5
    active_value: float = 0.0

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        out = cls(
            count=_take("sampler", raw, "count", int, 500),
            seed=_take("sampler", raw, "seed", int, None),
            burn_in=_take("sampler", raw, "burn_in", int, 100),
            thin=_take("sampler", raw, "thin", int, 5),
            active_value=_take("sampler", raw, "active_value", float, 0.0),
        )
        _done("sampler", raw)
        _positive("sampler", "count", out.count)
        if out.burn_in < 0:
            raise ConfigError("sampler.burn_in: must be nonnegative")
        _positive("sampler", "thin", out.thin)
        if abs(out.active_value) > 1:
            raise ConfigError("sampler.active_value: must lie in [-1, 1]")
        return out


@dataclass(frozen=True)
class EnvelopeConfig:
    buffer: str = "fixed"
    zeta_use: float = 3.5
    zeta_scrap: float = 7.0
    use_significance: float = 0.995
    scrap_significance: float = 0.9999
    beta1: float = 1.0
    beta2: float = 5.0
    beta3: float = 3.0

    @classmethod
    def from_dict(cls, raw):
        raw = dict(raw or {})
        gate = dict(_take("envelope", raw, "gate", dict, {}))
        out = cls(
            buffer=_take("envelope", raw, "buffer", str, "fixed"),
            zeta_use=_take("envelope", raw, "zeta_use", float, 3.5),
            zeta_scrap=_take("envelope", raw, "zeta_scrap", float, 7.0),
            use_significance=_take("envelope", raw, "use_significance", float, 0.995),
            scrap_significance=_take(
                "envelope", raw, "scrap_significance", float, 0.9999
            ),
            beta1=_take("envelope.gate", gate, "beta1", float, 1.0),
            beta2=_take("envelope.gate", gate, "beta2", float, 5.0),
            beta3=_take("envelope.gate", gate, "beta3", float, 3.0),
        )
        _done("envelope.gate", gate)
        _done("envelope", raw)
        if out.buffer not in _BUFFER_MODES:
            raise ConfigError(
                f"envelope.buffer: want one of {_BUFFER_MODES}, got {out.buffer!r}"
            )
        if not 0 < out.zeta_use <= out.zeta_scrap:
            raise ConfigError("envelope: need 0 < zeta_use <= zeta_scrap")
        for key in ("use_significance", "scrap_significance"):
            val = getattr(out, key)
            if not 0 < val < 1:
                raise ConfigError(f"envelope.{key}: must lie in (0, 1)")
        if out.use_significance > out.scrap_significance:
            raise ConfigError(
                "envelope: use_significance must not exceed scrap_significance"
            )
        _positive("envelope", "beta1", out.beta1)
        _positive("envelope", "beta2", out.beta2)
        return out


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    design: DesignConfig = field(default_factory=DesignConfig)
    doe: DoeConfig = field(default_factory=DoeConfig)
    qoi: QoiConfig = field(default_factory=QoiConfig)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    subspace: SubspaceConfig = field(default_factory=SubspaceConfig)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    envelope: EnvelopeConfig = field(default_factory=EnvelopeConfig)

    @classmethod
    def from_dict(cls, raw):
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        raw = dict(raw)
        seed = _take("config", raw, "seed", int, 0)
        sections = {}
        for name, sub in (
            ("design", DesignConfig),
            ("doe", DoeConfig),
            ("qoi", QoiConfig),
            ("surrogate", SurrogateConfig),
            ("subspace", SubspaceConfig),
            ("sampler", SamplerConfig),
            ("envelope", EnvelopeConfig),
        ):
            part = raw.pop(name, {})
            if not isinstance(part, dict):
                raise ConfigError(f"{name}: expected a JSON object")
            sections[name.replace("-", "_")] = sub.from_dict(part)
        _done("config", raw)
        return cls(seed=seed, **sections)

    @classmethod
    def load(cls, path, seed_override=None):
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        cfg = cls.from_dict(raw)
        if seed_override is not None:
            cfg = cfg.with_seed(int(seed_override))
        return cfg

    def with_seed(self, seed):
        return PipelineConfig(
            seed=seed,
            design=self.design,
            doe=self.doe,
            qoi=self.qoi,
            surrogate=self.surrogate,
            subspace=self.subspace,
            sampler=self.sampler,
            envelope=self.envelope,
        )

    def seed_for(self, stage):
        explicit = {
            "doe": self.doe.seed,
            "subspace": self.subspace.seed,
            "sample": self.sampler.seed,
        }.get(stage)
        if explicit is not None:
            return explicit
        return derive_seed(self.seed, stage)

    def resolve(self):
        """Fully defaulted canonical dictionary, the hashing substrate."""
        return {
            "schema": 1,
            "seed": self.seed,
            "design": {
                "stations": self.design.stations,
                "amplitude": self.design.amplitude,
                "points_per_side": self.design.points_per_side,
                "margin_x": self.design.margin_x,
                "margin_y": self.design.margin_y,
            },
            "doe": {"count": self.doe.count, "seed": self.seed_for("doe")},
            "qoi": {
                "kind": self.qoi.kind,
                "name": self.qoi.name,
                "direction_nonzero": self.qoi.direction_nonzero,
                "direction_seed": self.qoi.direction_seed,
                "noise": self.qoi.noise,
            },
            "surrogate": {
                "index_set": self.surrogate.index_set,
                "order": self.surrogate.order,
                "epsilon": self.surrogate.epsilon,
                "cv_folds": self.surrogate.cv_folds,
                "admm_iters": self.surrogate.admm_iters,
            },
            "subspace": {
                "samples": self.subspace.samples,
                "seed": self.seed_for("subspace"),
                "rank": self.subspace.rank,
            },
            "sampler": {
                "count": self.sampler.count,
                "seed": self.seed_for("sample"),
                "burn_in": self.sampler.burn_in,
                "thin": self.sampler.thin,
                "active_value": self.sampler.active_value,
            },
            "envelope": {
                "buffer": self.envelope.buffer,
                "zeta_use": self.envelope.zeta_use,
                "zeta_scrap": self.envelope.zeta_scrap,
                "use_significance": self.envelope.use_significance,
                "scrap_significance": self.envelope.scrap_significance,
                "gate": {
                    "beta1": self.envelope.beta1,
                    "beta2": self.envelope.beta2,
                    "beta3": self.envelope.beta3,
                },
            },
        }


def canonical_json(obj):
    """Deterministic JSON text: sorted keys, no whitespace drift."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))
