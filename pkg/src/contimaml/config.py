"""Experiment configuration: one JSON document for every stage of a run.

Unknown keys are rejected at every level. The top-level ``seed`` is the
master seed; component seeds (MAML, GAN) are always set from it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .cgan import GanConfig
from .errors import ConfigError
from .meta import MamlConfig
from .plant import PlantConfig, SectionParams

SIM_LOADS = tuple(round(0.1 * i, 1) for i in range(11))
REAL_LOADS = tuple(round(0.05 * i, 2) for i in range(11))
CGAN_LOADS = tuple(round(0.1 * i, 1) for i in range(6))
EXPERIMENT_TENDON_RADIUS = 0.05
# the 14-D robot samples collapse the generator within one epoch at the library default of 1e-3
EXPERIMENT_GAN_LR = 2e-4


def experiment_plant() -> PlantConfig:
    """Single 0.77 m section with the tendon radius used for experiments."""
    return PlantConfig(sections=(SectionParams(rest_length=0.77, tendon_radius=EXPERIMENT_TENDON_RADIUS),))


def experiment_gan() -> GanConfig:
    return GanConfig(lr=EXPERIMENT_GAN_LR)


@dataclass(frozen=True)
class DataConfig:
    n_per_load: int = 1000
    sim_loads: tuple = SIM_LOADS
    constraint_fraction: float = 0.1
    real_waypoints: int = 101
    real_interp: int = 20
    real_loads: tuple = REAL_LOADS
    split: tuple = (0.70, 0.15, 0.15)


@dataclass(frozen=True)
class BpnnConfig:
    epochs: int = 100
    lr: float = 1e-3
    batch_size: int = 64


@dataclass(frozen=True)
class EvalConfig:
    adapt_steps: int = 5
    samples_per_step: int = 50
    adapt_alpha: float = 0.01
    adapt_load: float = 0.2
    n_points: int = 30
    traj_load: float = 0.2
    unknown_load: float = 0.25


@dataclass(frozen=True)
class CganRunConfig:
    real_waypoints: int = 14
    real_interp: int = 30
    real_loads: tuple = CGAN_LOADS
    factor: int = 6
    enc_jitter: int = 50_000
    tip_jitter: float = 0.01
    n_fake: int = 8000
    n_probe: int = 500


@dataclass(frozen=True)
class InputPaths:
    """Optional overrides for stage inputs; None means the file in the output directory."""

    sim_data: str | None = None
    real_data: str | None = None
    model: str | None = None
    gan: str | None = None


SECTIONS = {
    "data": DataConfig,
    "bpnn": BpnnConfig,
    "eval": EvalConfig,
    "cgan_run": CganRunConfig,
    "inputs": InputPaths,
}


@dataclass(frozen=True)
class ExperimentConfig:
    plant: PlantConfig = field(default_factory=experiment_plant)
    maml: MamlConfig = field(default_factory=MamlConfig)
    gan: GanConfig = field(default_factory=experiment_gan)
    data: DataConfig = field(default_factory=DataConfig)
    bpnn: BpnnConfig = field(default_factory=BpnnConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    cgan_run: CganRunConfig = field(default_factory=CganRunConfig)
    inputs: InputPaths = field(default_factory=InputPaths)
    seed: int = 0
    out: str = "runs/default"

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool) or not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.maml.seed != self.seed or self.gan.seed != self.seed:
            object.__setattr__(self, "maml", replace(self.maml, seed=self.seed))
            object.__setattr__(self, "gan", replace(self.gan, seed=self.seed))

    def with_overrides(self, seed=None, out=None, steps=None, load=None) -> ExperimentConfig:
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=int(seed))
        if out is not None:
            cfg = replace(cfg, out=str(out))
        if steps is not None:
            cfg = replace(cfg, eval=replace(cfg.eval, adapt_steps=int(steps)))
        if load is not None:
            cfg = replace(cfg, eval=replace(cfg.eval, adapt_load=float(load)))
        return cfg

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def digest(self) -> str:
        """sha256 of the canonical JSON form; ``out`` is excluded so moving a run keeps its hash."""
        d = self.to_dict()
        d.pop("out")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        if not isinstance(d, dict):
            raise ConfigError("experiment config must be a JSON object")
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = {}
        try:
            if "plant" in d:
                kw["plant"] = PlantConfig.from_dict(_obj(d["plant"], "plant"))
            if "maml" in d:
                kw["maml"] = MamlConfig(**_strict(MamlConfig, d["maml"], "maml"))
            if "gan" in d:
                kw["gan"] = replace(experiment_gan(), **_tuples(_strict(GanConfig, d["gan"], "gan")))
            for name, typ in SECTIONS.items():
                if name in d:
                    kw[name] = typ(**_tuples(_strict(typ, d[name], name)))
            for name in ("seed", "out"):
                if name in d:
                    kw[name] = d[name]
            return cls(**kw)
        except ConfigError:
            raise
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> ExperimentConfig:
        path = Path(path)
        try:
            d = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        return cls.from_dict(d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _obj(v, where):
    if not isinstance(v, dict):
        raise ConfigError(f"{where} must be a JSON object")
    return v


def _strict(cls, d, where) -> dict:
    d = _obj(d, where)
    unknown = set(d) - {f.name for f in fields(cls)}
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    return dict(d)


def _tuples(d: dict) -> dict:
    return {k: tuple(v) if isinstance(v, list) else v for k, v in d.items()}
