"""Few-shot sine regression, the usual sanity benchmark for MAML.

Tasks are ``y = A sin(x + phase)`` with A in [0.1, 5], phase in [0, pi] and
x in [-5, 5]. The regressor is a 1-40-40-1 ReLU network.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gradcore import mse_grad
from .meta import MamlConfig, inner_adapt, maml
from .mlp import MlpParams, init

SINE_WIDTHS = (1, 40, 40, 1)


@dataclass(frozen=True)
class SineTask:
    amplitude: float
    phase: float

    def __call__(self, x):
        return self.amplitude * np.sin(x + self.phase)


def draw_task(rng) -> SineTask:
    return SineTask(rng.uniform(0.1, 5.0), rng.uniform(0.0, np.pi))


def draw_points(rng, task: SineTask, n: int):
    x = rng.uniform(-5.0, 5.0, (n, 1))
    return x, task(x)


class SineTaskSampler:
    """Support and query sets of ``k`` points from a freshly drawn task."""

    def __init__(self, k: int = 10):
        self.k = k

    def __call__(self, rng):
        task = draw_task(rng)
        xs, ys = draw_points(rng, task, self.k)
        xq, yq = draw_points(rng, task, self.k)
        return xs, ys, xq, yq


def default_config(**kw) -> MamlConfig:
    base = dict(inner_lr=0.01, meta_lr=1e-3, k=10, meta_batch=25, epochs=150, steps_per_epoch=50)
    base.update(kw)
    return MamlConfig(**base)


def meta_train_sine(cfg: MamlConfig | None = None, params: MlpParams | None = None):
    cfg = default_config() if cfg is None else cfg
    params = init(SINE_WIDTHS, cfg.seed) if params is None else params
    return maml(SineTaskSampler(cfg.k), cfg, params, cfg.steps_per_epoch or 50)


def evaluate(params: MlpParams, n_tasks: int = 20, k: int = 10, alpha: float = 0.01, steps: int = 1, seed: int = 0, n_query: int = 100):
    """Per-task query MSE before and after ``steps`` gradient steps on ``k`` points.

    Returns an array of shape (n_tasks, 2): columns are pre- and post-adaptation MSE.
    """
    rng = np.random.default_rng(seed)
    out = np.empty((n_tasks, 2))
    for i in range(n_tasks):
        task = draw_task(rng)
        xs, ys = draw_points(rng, task, k)
        xq, yq = draw_points(rng, task, n_query)
        adapted = inner_adapt(params, (xs, ys), alpha, steps, "mean")
        out[i] = mse_grad(params, xq, yq, "mean")[0], mse_grad(adapted, xq, yq, "mean")[0]
    return out
