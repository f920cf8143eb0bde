"""MAML over loading-condition tasks, and the pooled supervised baseline.

A task is one external-load value. Its support and query sets are disjoint
draws of ``k`` transitions recorded at that load. Task losses are squared
errors in normalized units, averaged over every output element by default;
with the summed loss a 0.01 inner step overshoots on a freshly initialised
128-wide network.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import datagen
from .datagen import Dataset
from .errors import DomainError
from .gradcore import mse_grad, mse_hvp
from .mlp import CONTROLLER_WIDTHS, MlpParams, adam_init, adam_step, init, sgd_step


@dataclass(frozen=True)
class MamlConfig:
    inner_lr: float = 0.01
    meta_lr: float = 0.01
    k: int = 10
    meta_batch: int = 20
    epochs: int = 200
    inner_steps: int = 1
    second_order: bool = False
    outer_optimizer: str = "adam"
    seed: int = 0
    loss_reduction: str = "mean"
    # meta-updates per epoch; None means one pass over the pool, |pool| / (meta_batch * 2k)
    steps_per_epoch: int | None = None

    def __post_init__(self):
        if self.inner_lr < 0 or self.meta_lr <= 0:
            raise DomainError("inner_lr must be >= 0 and meta_lr > 0")
        for name in ("k", "meta_batch", "epochs", "inner_steps"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")
        if self.loss_reduction not in ("sum", "mean"):
            raise DomainError(f"loss_reduction must be 'sum' or 'mean', got {self.loss_reduction!r}")
        if self.outer_optimizer not in ("adam", "sgd"):
            raise DomainError(f"outer_optimizer must be 'adam' or 'sgd', got {self.outer_optimizer!r}")
        if self.steps_per_epoch is not None and self.steps_per_epoch < 1:
            raise DomainError("steps_per_epoch must be >= 1")


@dataclass(frozen=True)
class TaskBatch:
    load: float
    support: Dataset
    query: Dataset


def sample_task(ds: Dataset, load: float, k: int, seed) -> TaskBatch:
    pool = ds.at_load(load)
    if len(pool) < 2 * k:
        raise DomainError(f"load {load}: need {2 * k} samples for k={k}, have {len(pool)}")
    idx = np.random.default_rng(seed).choice(len(pool), size=2 * k, replace=False)
    return TaskBatch(float(load), pool.take(idx[:k]), pool.take(idx[k:]))


def _arrays(data):
    if isinstance(data, Dataset):
        return datagen.xy(data)
    return data


def inner_adapt(params: MlpParams, support, alpha: float, steps: int = 1, reduction: str = "mean") -> MlpParams:
    """``steps`` plain gradient steps on the support loss."""
    if steps < 1:
        raise DomainError("steps must be >= 1")
    x, y = _arrays(support)
    for _ in range(steps):
        _, g = mse_grad(params, x, y, reduction)
        params = sgd_step(params, g, alpha)
    return params


def task_meta_gradient(
    params: MlpParams, task, alpha: float, steps: int = 1, second_order: bool = False, reduction: str = "mean"
):
    """Query loss after adaptation and its gradient w.r.t. the initial parameters.

    First order returns the query gradient at the adapted parameters. Second
    order back-propagates it through each inner step, multiplying by
    ``(I - alpha * H_support)`` via Hessian-vector products.
    """
    xs, ys, xq, yq = task
    trail = [params]
    for _ in range(steps):
        _, g = mse_grad(trail[-1], xs, ys, reduction)
        trail.append(sgd_step(trail[-1], g, alpha))
    loss, grad = mse_grad(trail[-1], xq, yq, reduction)
    if second_order:
        for phi in reversed(trail[:-1]):
            grad = grad - alpha * mse_hvp(phi, xs, ys, grad, reduction)
    return loss, grad


class LoadTaskSampler:
    """Draws (support, query) arrays for a uniformly chosen load."""

    def __init__(self, ds_by_load, k: int):
        if isinstance(ds_by_load, Dataset):
            ds_by_load = {w: ds_by_load.at_load(w) for w in ds_by_load.loads()}
        self.k = k
        self.pools = {}
        for w, ds in sorted(ds_by_load.items()):
            if len(ds) >= 2 * k:
                self.pools[float(w)] = datagen.xy(ds)
        if not self.pools:
            raise DomainError(f"empty task pool: no load has {2 * k} samples")
        self.loads = list(self.pools)
        self.size = sum(len(x) for x, _ in self.pools.values())

    def __call__(self, rng):
        w = self.loads[rng.integers(len(self.loads))]
        x, y = self.pools[w]
        idx = rng.choice(len(x), size=2 * self.k, replace=False)
        s, q = idx[: self.k], idx[self.k :]
        return x[s], y[s], x[q], y[q]


def maml(sampler, cfg: MamlConfig, params: MlpParams, steps_per_epoch: int, progress=None):
    """Generic MAML loop over tasks drawn by ``sampler(rng)``."""
    rng = np.random.default_rng(cfg.seed)
    opt = adam_init(params, lr=cfg.meta_lr) if cfg.outer_optimizer == "adam" else None
    log = []
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        losses = []
        for _ in range(steps_per_epoch):
            total = None
            for _ in range(cfg.meta_batch):
                task = sampler(rng)
                loss, g = task_meta_gradient(
                    params, task, cfg.inner_lr, cfg.inner_steps, cfg.second_order, cfg.loss_reduction
                )
                losses.append(loss)
                total = g if total is None else total + g
            if opt is None:
                params = sgd_step(params, total, cfg.meta_lr)
            else:
                params, opt = adam_step(opt, params, total)
        row = {
            "epoch": epoch,
            "mean_query_loss": float(np.mean(losses)),
            "wall_ms": round(1000.0 * (time.perf_counter() - t0), 3),
        }
        log.append(row)
        if progress is not None:
            progress(row)
    return params, log


def meta_train(ds_by_load, cfg: MamlConfig, params: MlpParams | None = None, progress=None):
    """MAML on load tasks. Returns ``(params, log)``; log rows hold the epoch's mean query loss."""
    sampler = LoadTaskSampler(ds_by_load, cfg.k)
    if params is None:
        params = init(CONTROLLER_WIDTHS, cfg.seed)
    spe = cfg.steps_per_epoch or max(1, sampler.size // (cfg.meta_batch * 2 * cfg.k))
    return maml(sampler, cfg, params, spe, progress)


def train_bpnn(
    train: Dataset,
    val: Dataset | None = None,
    arch=CONTROLLER_WIDTHS,
    epochs: int = 100,
    lr: float = 1e-3,
    seed: int = 0,
    batch_size: int = 64,
    params: MlpParams | None = None,
):
    """Plain supervised Adam training on pooled data; returns the best-validation weights."""
    if len(train) == 0:
        raise DomainError("empty training set")
    x, y = datagen.xy(train)
    xv, yv = datagen.xy(val) if val is not None and len(val) else (x, y)
    rng = np.random.default_rng(seed)
    if params is None:
        params = init(arch, seed)
    opt = adam_init(params, lr=lr)

    def per_sample(p, xs, ys):
        return mse_grad(p, xs, ys)[0] / len(xs)

    best, best_val = params, per_sample(params, xv, yv)
    log = [{"epoch": -1, "train_loss": per_sample(params, x, y), "val_loss": best_val}]
    for epoch in range(epochs):
        perm = rng.permutation(len(x))
        for start in range(0, len(x), batch_size):
            b = perm[start : start + batch_size]
            _, g = mse_grad(params, x[b], y[b])
            params, opt = adam_step(opt, params, g)
        val_loss = per_sample(params, xv, yv)
        log.append({"epoch": epoch, "train_loss": per_sample(params, x, y), "val_loss": val_loss})
        if val_loss < best_val:
            best, best_val = params, val_loss
    return best, log
