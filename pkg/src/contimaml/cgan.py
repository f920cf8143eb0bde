"""Conditional GAN over controller samples, jitter augmentation and a fidelity check.

A sample without its load is a 14-vector (p_next, a_curr, p_curr, a_next)
scaled to [-1, 1]; the load is the condition, scaled the same way and
appended to the input of both networks. The generator ends in tanh, the
discriminator in a sigmoid. The generator minimises ``-log D(G(z))``
rather than ``log(1 - D(G(z)))``, which gives it usable gradients early on.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import datagen
from . import mlp as mlp_mod
from . import plant as plant_mod
from .datagen import Dataset
from .errors import DomainError, StateError
from .gradcore import mlp_backward, mlp_forward
from .mlp import MlpParams, adam_init, adam_step, bce_loss

SAMPLE_FIELDS = ("p_next", "a_curr", "p_curr", "a_next")
SAMPLE_DIM = 14
CHECKPOINT_FORMAT = "contimaml.gan/1"


@dataclass(frozen=True)
class GanConfig:
    latent_dim: int = 50
    hidden: tuple = (256, 256)
    epochs: int = 200
    lr: float = 1e-3
    beta1: float = 0.5
    batch_size: int = 64
    d_steps: int = 1
    g_steps: int = 1
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        for name in ("latent_dim", "epochs", "batch_size", "d_steps", "g_steps"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be >= 1")
        if not self.hidden or min(self.hidden) < 1:
            raise DomainError("hidden widths must be >= 1")
        if not self.lr > 0:
            raise DomainError("lr must be > 0")
        if not 0.0 <= self.beta1 < 1.0:
            raise DomainError("beta1 must lie in [0, 1)")

    @classmethod
    def from_dict(cls, d: dict) -> GanConfig:
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise DomainError(f"unknown GAN config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass
class GanPair:
    generator: MlpParams
    discriminator: MlpParams
    config: GanConfig
    data_dim: int = SAMPLE_DIM
    trained: bool = False
    cond_range: tuple = (0.0, 0.0)  # physical load range seen in training
    log: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "config": asdict(self.config),
            "data_dim": self.data_dim,
            "trained": self.trained,
            "cond_range": list(self.cond_range),
            "generator": mlp_mod.to_json(self.generator),
            "discriminator": mlp_mod.to_json(self.discriminator),
        }

    @classmethod
    def from_json(cls, d: dict) -> GanPair:
        if d.get("format") != CHECKPOINT_FORMAT:
            raise DomainError(f"not a GAN checkpoint: format={d.get('format')!r}")
        cfg = dict(d["config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        return cls(
            mlp_mod.from_json(d["generator"]),
            mlp_mod.from_json(d["discriminator"]),
            GanConfig(**cfg),
            d["data_dim"],
            d["trained"],
            tuple(d["cond_range"]),
        )

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json()) + "\n")

    @classmethod
    def load(cls, path) -> GanPair:
        return cls.from_json(json.loads(Path(path).read_text()))


def new_pair(cfg: GanConfig, data_dim: int = SAMPLE_DIM) -> GanPair:
    g_seed, d_seed = np.random.SeedSequence(cfg.seed).generate_state(2)
    g = mlp_mod.init((cfg.latent_dim + 1, *cfg.hidden, data_dim), int(g_seed), "tanh")
    d = mlp_mod.init((data_dim + 1, *cfg.hidden, 1), int(d_seed), "sigmoid")
    return GanPair(g, d, cfg, data_dim)


def _gen(pair: GanPair, z, c):
    return mlp_forward(pair.generator, np.column_stack([z, c]))


def _disc(pair: GanPair, x, c):
    return mlp_forward(pair.discriminator, np.column_stack([x, c]))


def gan_train_arrays(x, c, cfg: GanConfig, pair: GanPair | None = None) -> GanPair:
    """Train on rows ``x`` (n, dim) in [-1, 1] with scalar conditions ``c`` (n,)."""
    x = np.asarray(x, dtype=float)
    c = np.asarray(c, dtype=float).reshape(-1)
    if x.ndim != 2 or len(x) == 0:
        raise DomainError("need a nonempty (n, dim) training array")
    if len(c) != len(x):
        raise DomainError(f"{len(c)} conditions for {len(x)} rows")
    pair = new_pair(cfg, x.shape[1]) if pair is None else pair
    g_opt = adam_init(pair.generator, lr=cfg.lr, beta1=cfg.beta1)
    d_opt = adam_init(pair.discriminator, lr=cfg.lr, beta1=cfg.beta1)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).generate_state(3)[2])
    dim = x.shape[1]
    log = []
    for epoch in range(cfg.epochs):
        d_losses, g_losses, d_real, d_fake = [], [], [], []
        perm = rng.permutation(len(x))
        for start in range(0, len(x), cfg.batch_size):
            b = perm[start : start + cfg.batch_size]
            xr, cb = x[b], c[b]
            n = len(b)
            for _ in range(cfg.d_steps):
                xf, _ = _gen(pair, rng.standard_normal((n, cfg.latent_dim)), cb)
                pr, tr = _disc(pair, xr, cb)
                pf, tf = _disc(pair, xf, cb)
                lr_, gr = bce_loss(pr, 1.0)
                lf, gf = bce_loss(pf, 0.0)
                grad = mlp_backward(pair.discriminator, tr, gr, logits=True) + mlp_backward(
                    pair.discriminator, tf, gf, logits=True
                )
                pair.discriminator, d_opt = adam_step(d_opt, pair.discriminator, grad)
                d_losses.append(lr_ + lf)
                d_real.append(float(pr.mean()))
                d_fake.append(float(pf.mean()))
            for _ in range(cfg.g_steps):
                xf, tg = _gen(pair, rng.standard_normal((n, cfg.latent_dim)), cb)
                pf, tf = _disc(pair, xf, cb)
                lg, gl = bce_loss(pf, 1.0)
                _, gin = mlp_backward(pair.discriminator, tf, gl, logits=True, input_grad=True)
                grad = mlp_backward(pair.generator, tg, gin[:, :dim])
                pair.generator, g_opt = adam_step(g_opt, pair.generator, grad)
                g_losses.append(lg)
        log.append(
            {
                "epoch": epoch,
                "d_loss": float(np.mean(d_losses)),
                "g_loss": float(np.mean(g_losses)),
                "d_real": float(np.mean(d_real)),
                "d_fake": float(np.mean(d_fake)),
            }
        )
    pair.trained = True
    pair.log = log
    return pair


def sample_arrays(ds: Dataset):
    """Scaled (n, 14) sample rows and scaled load conditions."""
    x = np.column_stack([datagen.scale(f, getattr(ds, f)) for f in SAMPLE_FIELDS])
    return x, datagen.scale("load", ds.load)


def gan_train(data: Dataset, cfg: GanConfig) -> GanPair:
    """Fit one conditional model across all loads of a physical-units dataset."""
    if len(data) == 0:
        raise DomainError("empty training set")
    if data.normalized:
        data = datagen.denormalize(data)
    x, c = sample_arrays(data)
    pair = gan_train_arrays(x, c, cfg)
    pair.cond_range = (float(data.load.min()), float(data.load.max()))
    return pair


def gan_sample(pair: GanPair, cond, seed: int) -> np.ndarray:
    """Raw generator output rows for scaled conditions ``cond``."""
    if not pair.trained:
        raise StateError("generator has not been trained")
    cond = np.asarray(cond, dtype=float).reshape(-1)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((len(cond), pair.config.latent_dim))
    return _gen(pair, z, cond)[0] if len(cond) else np.zeros((0, pair.data_dim))


def gan_generate(pair: GanPair, n: int, load, seed: int = 0) -> Dataset:
    """``n`` synthetic samples in physical units; a list of loads is cycled."""
    if not pair.trained:
        raise StateError("generator has not been trained")
    if n < 0:
        raise DomainError("n must be >= 0")
    loads = np.atleast_1d(np.asarray(load, dtype=float))
    lo, hi = pair.cond_range
    if loads.size == 0 or loads.min() < lo - 1e-9 or loads.max() > hi + 1e-9:
        raise DomainError(f"load {load} outside the training range [{lo}, {hi}]")
    if n == 0:
        return Dataset.empty("cgan", rng_seed=seed)
    w = np.resize(loads, n)
    raw = np.clip(gan_sample(pair, datagen.scale("load", w), seed), -1.0, 1.0)
    cols, pos = {}, 0
    for f in SAMPLE_FIELDS:
        width = 3 if f.startswith("p_") else 4
        cols[f] = datagen.unscale(f, raw[:, pos : pos + width])
        pos += width
    for f in ("a_curr", "a_next"):
        cols[f] = np.clip(cols[f], 0.0, datagen.BOUNDS[f][1])
    return Dataset(
        cols["p_next"], cols["a_curr"], cols["p_curr"], w, cols["a_next"],
        provenance="cgan", rng_seed=seed, info={"generator": "cgan", "n": n},
    )


def augment(
    real: Dataset,
    factor: int = 6,
    enc_jitter: int = 50_000,
    tip_jitter: float = 0.01,
    seed: int = 0,
    a_max: float = 0.25,
) -> Dataset:
    """Original samples followed by ``factor - 1`` jittered copies.

    Each copy adds uniform integer encoder jitter to every channel of
    ``a_curr`` and ``a_next`` (clamped to the stroke) and uniform jitter to
    every axis of ``p_curr`` and ``p_next``.
    """
    if factor < 1:
        raise DomainError("factor must be >= 1")
    if real.normalized:
        real = datagen.denormalize(real)
    rng = np.random.default_rng(seed)
    lim = int(round(a_max * plant_mod.COUNTS_PER_METER))
    p_lo, p_hi = datagen.BOUNDS["p_next"]
    parts = [real]
    n = len(real)
    for _ in range(factor - 1):
        cols = {}
        for f in ("a_curr", "a_next"):
            counts = plant_mod.encoder_counts(getattr(real, f), a_max)
            counts = np.clip(counts + rng.integers(-enc_jitter, enc_jitter, size=(n, 4), endpoint=True), 0, lim)
            cols[f] = plant_mod.counts_to_meters(counts)
        for f in ("p_curr", "p_next"):
            cols[f] = np.clip(getattr(real, f) + rng.uniform(-tip_jitter, tip_jitter, (n, 3)), p_lo, p_hi)
        parts.append(Dataset(cols["p_next"], cols["a_curr"], cols["p_curr"], real.load, cols["a_next"]))
    out = datagen.concat(parts, provenance="augmented")
    info = {"generator": "augment", "factor": factor, "enc_jitter": enc_jitter, "tip_jitter": tip_jitter, "source_n": n}
    return Dataset(*(getattr(out, f) for f in datagen.FIELDS), provenance="augmented", rng_seed=seed, info=info)


def fidelity_score(fake: Dataset, config, n_probe: int, seed: int = 0):
    """Mean and std of ``|claimed p_next - tip reached by a_next|`` over sampled rows."""
    if n_probe < 1 or n_probe > len(fake):
        raise DomainError(f"n_probe must lie in [1, {len(fake)}], got {n_probe}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(len(fake), size=n_probe, replace=False))
    noisy = config.sensor_noise_sigma > 0
    reached = plant_mod.forward(config, fake.a_next[idx], fake.load[idx], noisy=noisy, rng=rng)
    err = np.linalg.norm(fake.p_next[idx] - reached, axis=1)
    return float(err.mean()), float(err.std())
