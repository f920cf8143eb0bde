"""Closed-loop controller runs on a plant: adaptation, random targets, trajectories.

A controller maps ``(p_target, a_curr, p_curr, load)`` to a raw actuation in
meters. The executed command is clamped to the stroke and the achieved tip is
read from the plant, with sensor noise when the plant has any.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import least_squares

from . import datagen
from . import plant as plant_mod
from .errors import DomainError
from .gradcore import mse_grad, predict
from .mlp import MlpParams, sgd_step
from .plant import PlantConfig

ARM_LENGTH = 0.77
START_ACTUATION = 0.125
LINE_PLANE_Z = 0.655
LINE_SPACING = 0.03
LINE_POINTS = 20
ARC_PLANE_Z = 0.60
ARC_RADIUS = 0.30
ARC_STEP_DEG = 10.0


# ---------------------------------------------------------------- controllers


class NetController:
    """Wraps controller network weights; inputs are scaled with the fixed bounds."""

    def __init__(self, params: MlpParams):
        self.params = params

    def __call__(self, p_target, a_curr, p_curr, load):
        x = datagen.encode_inputs(p_target, a_curr, p_curr, load)
        return datagen.decode_actuation(predict(self.params, x))[0]


class ConstantController:
    def __init__(self, value=START_ACTUATION):
        self.value = np.broadcast_to(np.asarray(value, dtype=float), (4,)).copy()

    def __call__(self, p_target, a_curr, p_curr, load):
        return self.value.copy()


class OracleController:
    """Numeric inverse of the noiseless plant.

    A coarse grid over the stroke seeds a coordinate descent, which is then
    polished by bounded least squares.
    """

    def __init__(self, config: PlantConfig, grid: int = 7, sweeps: int = 30):
        self.config = config
        self.a_max = config.max_stroke
        g = np.linspace(0.0, self.a_max, grid)
        self.grid = np.stack(np.meshgrid(g, g, g, g, indexing="ij"), axis=-1).reshape(-1, 4)
        self.sweeps = sweeps

    def _tip(self, a, load):
        return plant_mod.forward(self.config, a, load)

    def solve(self, p_target, load):
        p_target = np.asarray(p_target, dtype=float)
        err = np.linalg.norm(self._tip(self.grid, load) - p_target, axis=1)
        a = self.grid[np.argmin(err)].copy()
        best = err.min()
        h = self.a_max / 8
        for _ in range(self.sweeps):
            for i in range(4):
                cand = np.repeat(a[None], 5, axis=0)
                cand[:, i] = np.clip(a[i] + h * np.array([-2, -1, 0, 1, 2]), 0.0, self.a_max)
                e = np.linalg.norm(self._tip(cand, load) - p_target, axis=1)
                j = int(np.argmin(e))
                if e[j] < best:
                    a, best = cand[j], e[j]
            h *= 0.5
        res = least_squares(
            lambda v: self._tip(v, load) - p_target,
            a,
            bounds=(0.0, self.a_max),
            method="dogbox",
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
        )
        return res.x if np.linalg.norm(res.fun) <= best else a

    def __call__(self, p_target, a_curr, p_curr, load):
        return self.solve(p_target, load)


def as_controller(model):
    if isinstance(model, MlpParams):
        return NetController(model)
    if callable(model):
        return model
    raise DomainError(f"not a controller: {type(model).__name__}")


def step_controller(model, config: PlantConfig, p_target, a_curr, p_curr, load: float, rng=None):
    """Command one target. Returns ``(a_next, p_achieved, error)``."""
    ctrl = as_controller(model)
    for name, val in (("p_next", p_target), ("a_curr", a_curr), ("p_curr", p_curr), ("load", load)):
        datagen.scale(name, val)
    a_next = np.clip(np.asarray(ctrl(p_target, a_curr, p_curr, load), dtype=float), 0.0, config.max_stroke)
    noisy = config.sensor_noise_sigma > 0
    if noisy and rng is None:
        rng = np.random.default_rng(config.rng_seed)
    p = plant_mod.forward(config, a_next, load, noisy=noisy, rng=rng)
    return a_next, p, float(np.linalg.norm(np.asarray(p_target, dtype=float) - p))


# ---------------------------------------------------------------- reports


@dataclass
class EvalReport:
    targets: np.ndarray
    achieved: np.ndarray
    errors: np.ndarray
    load: float
    curve: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.errors))

    @property
    def std(self) -> float:
        return float(np.std(self.errors))

    @property
    def relative_pct(self) -> float:
        """Mean error as a percentage of the 0.77 m arm length."""
        return 100.0 * self.mean / ARM_LENGTH

    def summary(self) -> dict:
        return {
            "n": int(len(self.errors)),
            "load": self.load,
            "mean": self.mean,
            "std": self.std,
            "relative_pct": self.relative_pct,
            "curve": self.curve,
            "provenance": self.provenance,
        }

    def write_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "target_x", "target_y", "target_z", "achieved_x", "achieved_y", "achieved_z", "error"])
            for i, (t, a, e) in enumerate(zip(self.targets, self.achieved, self.errors)):
                w.writerow([i, *map(repr, map(float, t)), *map(repr, map(float, a)), repr(float(e))])

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")


def write_curve_csv(rows, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "mean", "std"])
        for r in rows:
            w.writerow([r["step"], repr(r["mean"]), repr(r["std"])])


def _run_targets(model, config, targets, load, rng, provenance):
    a = np.full(4, START_ACTUATION)
    p = plant_mod.forward(config, a, load, noisy=config.sensor_noise_sigma > 0, rng=rng)
    achieved, errors = [], []
    for tgt in targets:
        a, p, e = step_controller(model, config, tgt, a, p, load, rng)
        achieved.append(p)
        errors.append(e)
    return EvalReport(
        np.asarray(targets, dtype=float), np.asarray(achieved), np.asarray(errors), float(load), provenance=provenance
    )


def random_point_test(model, config: PlantConfig, n_points: int = 30, load: float = 0.2, seed: int = 0) -> EvalReport:
    """Command ``n_points`` reachable random targets in sequence from the mid-stroke pose."""
    if n_points < 1:
        raise DomainError("n_points must be >= 1")
    rng = np.random.default_rng(seed)
    targets = plant_mod.forward(config, plant_mod.random_actuation(rng, n_points, config.max_stroke), load)
    return _run_targets(model, config, targets, load, rng, {"test": "random_point", "seed": seed})


# ---------------------------------------------------------------- adaptation


def collect_transitions(config: PlantConfig, n: int, load: float, rng, a0=None, p0=None):
    """Random-actuation walk on the plant; returns ``(dataset, a_last, p_last)``."""
    a_max = config.max_stroke
    noisy = config.sensor_noise_sigma > 0
    a0 = rng.uniform(0.0, a_max, 4) if a0 is None else np.asarray(a0, dtype=float)
    p0 = plant_mod.forward(config, a0, load, noisy=noisy, rng=rng) if p0 is None else np.asarray(p0, dtype=float)
    acts = np.vstack([a0, rng.uniform(0.0, a_max, (n, 4))])
    tips = np.vstack([p0, plant_mod.forward(config, acts[1:], load, noisy=noisy, rng=rng)])
    ds = datagen.Dataset(
        tips[1:], acts[:-1], tips[:-1], np.full(n, float(load)), acts[1:],
        provenance="virtual-real" if config.perturbation is not None else "sim",
    )
    return ds, acts[-1], tips[-1]


@dataclass
class AdaptResult:
    models: list
    curve: list
    reports: list


def adapt(
    params: MlpParams,
    config: PlantConfig,
    k_steps: int,
    samples_per_step: int = 50,
    alpha: float = 0.01,
    seed: int = 0,
    load: float = 0.2,
    n_eval: int = 30,
    eval_seed: int | None = None,
    reduction: str = "mean",
) -> AdaptResult:
    """Collect ``samples_per_step`` transitions and take one SGD step, ``k_steps`` times.

    The random-point error is measured on the same targets after every step,
    step 0 being the unadapted model.
    """
    if k_steps < 0:
        raise DomainError("k_steps must be >= 0")
    eval_seed = seed + 1_000_003 if eval_seed is None else eval_seed
    rng = np.random.default_rng(seed)
    models = [params]
    reports = [random_point_test(params, config, n_eval, load, eval_seed)]
    a = p = None
    for _ in range(k_steps):
        batch, a, p = collect_transitions(config, samples_per_step, load, rng, a, p)
        x, y = datagen.xy(batch)
        _, g = mse_grad(models[-1], x, y, reduction)
        models.append(sgd_step(models[-1], g, alpha))
        reports.append(random_point_test(models[-1], config, n_eval, load, eval_seed))
    curve = [{"step": i, "mean": r.mean, "std": r.std} for i, r in enumerate(reports)]
    return AdaptResult(models, curve, reports)


def steps_to_reach(curve, threshold: float):
    """First step whose mean error is at or below ``threshold``; None if never."""
    for row in curve:
        if row["mean"] <= threshold:
            return row["step"]
    return None


# ---------------------------------------------------------------- trajectories


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str
    points: np.ndarray
    load: float = 0.2

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) < 2:
            raise DomainError("a trajectory needs at least 2 points of 3 coordinates")
        if self.kind not in ("line", "semicircle", "custom"):
            raise DomainError(f"unknown trajectory kind {self.kind!r}")
        datagen.scale("p_next", pts)
        object.__setattr__(self, "points", pts)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "points": self.points.tolist(), "load": self.load}


def make_specs(load: float = 0.2):
    """Canonical line and semicircle in horizontal planes.

    A horizontal slice of the workspace is an annulus about the axis, so each
    shape sits where it clears the annulus with margin on both the nominal and
    the perturbed plant. Line: 20 points 0.03 m apart along x through the axis
    at z = 0.655 m. Semicircle: radius 0.3 m about the axis at z = 0.60 m,
    every 10 degrees.
    """
    xs = (np.arange(LINE_POINTS) - (LINE_POINTS - 1) / 2) * LINE_SPACING
    line = np.column_stack([xs, np.zeros(LINE_POINTS), np.full(LINE_POINTS, LINE_PLANE_Z)])
    t = np.deg2rad(np.arange(0.0, 180.0 + ARC_STEP_DEG / 2, ARC_STEP_DEG))
    arc = np.column_stack([ARC_RADIUS * np.cos(t), ARC_RADIUS * np.sin(t), np.full(len(t), ARC_PLANE_Z)])
    return TrajectorySpec("line", line, load), TrajectorySpec("semicircle", arc, load)


def follow_trajectory(model, config: PlantConfig, spec: TrajectorySpec, seed: int = 0) -> EvalReport:
    """Visit the control points in order, carrying the sensed state forward."""
    rng = np.random.default_rng(seed)
    return _run_targets(model, config, spec.points, spec.load, rng, {"test": spec.kind, "seed": seed})
