"""Piecewise-constant-curvature model of a tendon-driven continuum manipulator.

Each section bends as a circular arc. Four tendons sit at 0/90/180/270 degrees
around the backbone at radius ``d``. Pulling tendon ``i`` by ``q_i`` meters
gives the arc parameters

    theta_x = (q0 - q2) / (2 d),   theta_y = (q1 - q3) / (2 d)
    theta   = hypot(theta_x, theta_y),   phi = atan2(theta_y, theta_x)
    L       = L0 - c_ax * mean(q)

External load only adds tension, so it enters as an equal displacement
offset ``c_load * w / 4`` on every tendon. A two-section arm holds the
proximal section at a fixed actuation and chains the distal arc onto the
proximal end frame.

The "virtual-real" plant is the same model with scaled geometry, tendon
backlash and Gaussian tip-sensing noise; it stands in for hardware.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DomainError

SMALL_ANGLE = 1e-7
COUNTS_PER_METER = 1_000_000
N_TENDONS = 4


@dataclass(frozen=True)
class SectionParams:
    rest_length: float = 0.77
    tendon_radius: float = 0.02
    axial_share: float = 0.5
    load_coeff: float = 0.05
    max_stroke: float = 0.25
    tendon_count: int = N_TENDONS

    def __post_init__(self):
        if not self.rest_length > 0:
            raise DomainError(f"rest_length must be > 0, got {self.rest_length}")
        if not self.tendon_radius > 0:
            raise DomainError(f"tendon_radius must be > 0, got {self.tendon_radius}")
        if not 0.0 <= self.axial_share <= 1.0:
            raise DomainError(f"axial_share must lie in [0, 1], got {self.axial_share}")
        if not self.load_coeff >= 0:
            raise DomainError(f"load_coeff must be >= 0, got {self.load_coeff}")
        if not self.max_stroke > 0:
            raise DomainError(f"max_stroke must be > 0, got {self.max_stroke}")
        if self.tendon_count != N_TENDONS:
            raise DomainError(f"tendon_count must be {N_TENDONS}, got {self.tendon_count}")


@dataclass(frozen=True)
class PerturbationSpec:
    """Multipliers and defects that turn the nominal plant into the virtual-real one."""

    tendon_radius_scale: float = 1.10
    load_coeff_scale: float = 0.85
    rest_length_scale: float = 0.98
    backlash: float = 0.003
    sensor_noise_sigma: float = 0.001

    def __post_init__(self):
        for name in ("tendon_radius_scale", "load_coeff_scale", "rest_length_scale"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.backlash < 0 or self.sensor_noise_sigma < 0:
            raise DomainError("backlash and sensor_noise_sigma must be >= 0")

    @classmethod
    def identity(cls) -> PerturbationSpec:
        return cls(1.0, 1.0, 1.0, 0.0, 0.0)


@dataclass(frozen=True)
class PlantConfig:
    sections: tuple[SectionParams, ...] = (SectionParams(),)
    proximal_hold: tuple[float, ...] = (0.0, 0.0, 0.0, 0.0)
    perturbation: PerturbationSpec | None = None
    sensor_noise_sigma: float = 0.0
    backlash: float = 0.0
    rng_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sections", tuple(self.sections))
        object.__setattr__(self, "proximal_hold", tuple(float(v) for v in self.proximal_hold))
        if not 1 <= len(self.sections) <= 2:
            raise DomainError(f"a plant has 1 or 2 sections, got {len(self.sections)}")
        if self.sensor_noise_sigma < 0:
            raise DomainError("sensor_noise_sigma must be >= 0")
        if self.backlash < 0:
            raise DomainError("backlash must be >= 0")
        if len(self.proximal_hold) != N_TENDONS:
            raise DomainError("proximal_hold needs 4 entries")
        if len(self.sections) == 2:
            a_max = self.sections[0].max_stroke
            for i, v in enumerate(self.proximal_hold):
                if not 0.0 <= v <= a_max:
                    raise DomainError(f"proximal_hold[{i}] = {v} outside [0, {a_max}]")

    @property
    def controlled(self) -> SectionParams:
        """The section driven by the controller (the distal one)."""
        return self.sections[-1]

    @property
    def max_stroke(self) -> float:
        return self.controlled.max_stroke

    @property
    def total_length(self) -> float:
        return sum(s.rest_length for s in self.sections)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> PlantConfig:
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise DomainError(f"unknown plant config keys: {sorted(unknown)}")
        sections = tuple(SectionParams(**s) for s in d.pop("sections", [asdict(SectionParams())]))
        pert = d.pop("perturbation", None)
        pert = PerturbationSpec(**pert) if pert is not None else None
        return cls(sections=sections, perturbation=pert, **d)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> PlantConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))


def single_section() -> PlantConfig:
    return PlantConfig(sections=(SectionParams(rest_length=0.77),))


def two_section(proximal_hold=(0.0, 0.0, 0.0, 0.0)) -> PlantConfig:
    return PlantConfig(
        sections=(SectionParams(rest_length=0.38), SectionParams(rest_length=0.38)),
        proximal_hold=tuple(proximal_hold),
    )


def make_virtual_real(base: PlantConfig, preset: PerturbationSpec | None = None) -> PlantConfig:
    """Apply a perturbation preset (default: the standard one) to a nominal plant."""
    if base.perturbation is not None:
        raise DomainError("plant already carries a perturbation")
    preset = PerturbationSpec() if preset is None else preset
    sections = tuple(
        replace(
            s,
            tendon_radius=s.tendon_radius * preset.tendon_radius_scale,
            load_coeff=s.load_coeff * preset.load_coeff_scale,
            rest_length=s.rest_length * preset.rest_length_scale,
        )
        for s in base.sections
    )
    return replace(
        base,
        sections=sections,
        perturbation=preset,
        backlash=preset.backlash,
        sensor_noise_sigma=preset.sensor_noise_sigma,
    )


def arc_parameters(q: np.ndarray, sec: SectionParams):
    """Return (theta_x, theta_y, L) for tendon displacements ``q`` (..., 4)."""
    two_d = 2.0 * sec.tendon_radius
    theta_x = (q[..., 0] - q[..., 2]) / two_d
    theta_y = (q[..., 1] - q[..., 3]) / two_d
    # pairwise sum keeps the rotation/mirror symmetries exact in floating point
    mean_q = ((q[..., 0] + q[..., 2]) + (q[..., 1] + q[..., 3])) / 4.0
    length = sec.rest_length - sec.axial_share * mean_q
    return theta_x, theta_y, length


def _arc_end(theta_x, theta_y, length, small_angle=SMALL_ANGLE):
    """Tip position and end-frame rotation of one constant-curvature arc."""
    theta = np.hypot(theta_x, theta_y)
    bent = theta >= small_angle
    safe = np.where(theta > 0, theta, 1.0)
    cos_phi = np.where(theta > 0, theta_x / safe, 1.0)
    sin_phi = np.where(theta > 0, theta_y / safe, 0.0)

    half_sin = np.sin(0.5 * theta)
    one_minus_cos = 2.0 * half_sin * half_sin
    sin_t = np.sin(theta)
    t2 = theta * theta
    # second-order series below the threshold keeps both branches continuous
    radial = np.where(bent, length * one_minus_cos / safe, 0.5 * length * theta * (1.0 - t2 / 12.0))
    axial = np.where(bent, length * sin_t / safe, length * (1.0 - t2 / 6.0))
    pos = np.stack([radial * cos_phi, radial * sin_phi, axial], axis=-1)

    # Rodrigues rotation by theta about k = (-sin phi, cos phi, 0)
    kx, ky = -sin_phi, cos_phi
    s = np.where(bent, sin_t, theta)
    c1 = np.where(bent, one_minus_cos, 0.5 * t2)
    rot = np.empty(theta.shape + (3, 3))
    rot[..., 0, 0] = 1.0 - c1 * ky * ky
    rot[..., 0, 1] = c1 * kx * ky
    rot[..., 0, 2] = s * ky
    rot[..., 1, 0] = c1 * kx * ky
    rot[..., 1, 1] = 1.0 - c1 * kx * kx
    rot[..., 1, 2] = -s * kx
    rot[..., 2, 0] = -s * ky
    rot[..., 2, 1] = s * kx
    rot[..., 2, 2] = 1.0 - c1
    return pos, rot


def check_actuation(a, a_max: float) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.shape[-1:] != (N_TENDONS,):
        raise DomainError(f"actuation must have 4 channels, got shape {a.shape}")
    bad = ~((a >= 0.0) & (a <= a_max))
    if bad.any():
        idx = np.argwhere(bad)[0]
        ch = int(idx[-1])
        raise DomainError(
            f"actuation channel {ch} = {float(a[tuple(idx)])!r} outside [0, {a_max}]"
        )
    return a


def _tendon_offsets(config: PlantConfig, a: np.ndarray, load: np.ndarray, sec: SectionParams):
    q = np.maximum(a - config.backlash, 0.0)
    return q + (sec.load_coeff * load / 4.0)[..., None]


def forward(config: PlantConfig, a, load=0.0, noisy: bool = False, rng=None) -> np.ndarray:
    """Tip position (..., 3) for actuation ``a`` (..., 4) in meters under ``load`` kg.

    With ``noisy`` the reading gets per-axis Gaussian noise of
    ``config.sensor_noise_sigma``; pass a caller-owned ``rng`` to continue a
    stream, otherwise a fresh generator seeded by ``config.rng_seed`` is used.
    """
    a = check_actuation(a, config.max_stroke)
    load = np.asarray(load, dtype=float)
    if (load < 0).any():
        raise DomainError(f"load must be >= 0 kg, got {float(load.min())!r}")
    load = np.broadcast_to(load, a.shape[:-1])

    pos = np.zeros(a.shape[:-1] + (3,))
    frame = None
    n = len(config.sections)
    for i, sec in enumerate(config.sections):
        act = a if i == n - 1 else np.broadcast_to(np.asarray(config.proximal_hold), a.shape)
        q = _tendon_offsets(config, act, load, sec)
        p_i, r_i = _arc_end(*arc_parameters(q, sec))
        if frame is None:
            pos, frame = p_i, r_i
        else:
            pos = pos + np.einsum("...ij,...j->...i", frame, p_i)
            frame = frame @ r_i

    if noisy and config.sensor_noise_sigma > 0:
        rng = np.random.default_rng(config.rng_seed) if rng is None else rng
        pos = pos + rng.normal(0.0, config.sensor_noise_sigma, size=pos.shape)
    return pos


def encoder_counts(a, a_max: float = 0.25) -> np.ndarray:
    a = check_actuation(a, a_max)
    return np.rint(a * COUNTS_PER_METER).astype(np.int64)


def counts_to_meters(counts) -> np.ndarray:
    return np.asarray(counts, dtype=np.int64) / COUNTS_PER_METER


def random_actuation(rng, size, a_max: float = 0.25) -> np.ndarray:
    shape = (size, N_TENDONS) if np.isscalar(size) else tuple(size) + (N_TENDONS,)
    return rng.uniform(0.0, a_max, size=shape)
