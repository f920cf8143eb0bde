"""Experiment stages that read and write artifacts in an output directory.

Every stage is a plain function of an ``ExperimentConfig``; the CLI wires
them to subcommands. File names are fixed so stages can be chained.
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path

import numpy as np
import scipy

from . import __version__, cgan, datagen, evaluate, meta, mlp
from . import plant as plant_mod
from .config import ExperimentConfig
from .errors import DomainError

SIM_DATA = "sim.jsonl"
REAL_DATA = "real.jsonl"
AUG_DATA = "augmented.jsonl"
FAKE_DATA = "fake.jsonl"
MAML_MODEL = "maml.json"
BPNN_MODEL = "bpnn.json"
ADAPTED_MODEL = "adapted.json"
GAN_MODEL = "cgan.json"


class Run:
    """An output directory plus the list of artifacts written into it."""

    def __init__(self, cfg: ExperimentConfig, out=None):
        self.cfg = cfg
        self.out = Path(out if out is not None else cfg.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.unhashed: list[str] = []

    def path(self, name) -> Path:
        return self.out / name

    def wrote(self, name, hashed: bool = True) -> Path:
        (self.outputs if hashed else self.unhashed).append(str(name))
        return self.path(name)

    def input(self, override, default) -> Path:
        p = Path(override) if override else self.path(default)
        if not p.exists():
            raise FileNotFoundError(f"missing input file: {p}")
        return p

    def manifest(self, command: str) -> Path:
        files = {name: _sha256(self.path(name)) for name in sorted(set(self.outputs))}
        config = self.cfg.to_dict()
        config.pop("out")  # the directory itself does not affect any output
        doc = {
            "command": command,
            "config": config,
            "config_hash": self.cfg.digest(),
            "seed": self.cfg.seed,
            "versions": {
                "contimaml": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "outputs": files,
            "unhashed_outputs": sorted(set(self.unhashed)),
        }
        path = self.path(f"manifest-{command.replace(' ', '-')}.json")
        path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return path


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _write_rows(path, rows, columns) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(r[c]) if isinstance(r[c], float) else r[c] for c in columns])


def nominal_plant(cfg: ExperimentConfig):
    return cfg.plant


def real_plant(cfg: ExperimentConfig):
    return plant_mod.make_virtual_real(cfg.plant)


# ---------------------------------------------------------------- data


def gen_sim(run: Run) -> datagen.Dataset:
    c = run.cfg
    ds = datagen.gen_sim(nominal_plant(c), c.data.n_per_load, c.data.sim_loads, c.data.constraint_fraction, c.seed)
    datagen.write_jsonl(ds, run.wrote(SIM_DATA))
    run.wrote(datagen.header_path(SIM_DATA).name)
    return ds


def gen_real(run: Run, waypoints=None, interp=None, loads=None) -> datagen.Dataset:
    c = run.cfg
    ds = datagen.gen_protocol_real(
        real_plant(c),
        waypoints or c.data.real_waypoints,
        interp or c.data.real_interp,
        loads or c.data.real_loads,
        c.seed,
    )
    datagen.write_jsonl(ds, run.wrote(REAL_DATA))
    run.wrote(datagen.header_path(REAL_DATA).name)
    return ds


def augment(run: Run) -> datagen.Dataset:
    c = run.cfg.cgan_run
    real = datagen.read_jsonl(run.input(run.cfg.inputs.real_data, REAL_DATA))
    ds = cgan.augment(real, c.factor, c.enc_jitter, c.tip_jitter, run.cfg.seed, run.cfg.plant.max_stroke)
    datagen.write_jsonl(ds, run.wrote(AUG_DATA))
    run.wrote(datagen.header_path(AUG_DATA).name)
    return ds


# ---------------------------------------------------------------- training


def _train_split(run: Run, ds):
    return datagen.split(ds, run.cfg.data.split, run.cfg.seed)


def train_maml(run: Run, data_files=None) -> mlp.MlpParams:
    """Meta-train on the training split of the given datasets (default: the sim set)."""
    files = data_files or [run.input(run.cfg.inputs.sim_data, SIM_DATA)]
    ds = datagen.concat([datagen.read_jsonl(f) for f in files])
    train, _, _ = _train_split(run, ds)
    params, log = meta.meta_train(train, run.cfg.maml)
    mlp.save(params, run.wrote(MAML_MODEL))
    _write_rows(run.wrote("maml_log.csv", hashed=False), log, ["epoch", "mean_query_loss", "wall_ms"])
    return params


def train_bpnn(run: Run) -> mlp.MlpParams:
    c = run.cfg
    ds = datagen.read_jsonl(run.input(c.inputs.sim_data, SIM_DATA))
    train, val, _ = _train_split(run, ds)
    params, log = meta.train_bpnn(train, val, epochs=c.bpnn.epochs, lr=c.bpnn.lr, seed=c.seed, batch_size=c.bpnn.batch_size)
    mlp.save(params, run.wrote(BPNN_MODEL))
    _write_rows(run.wrote("bpnn_log.csv"), log, ["epoch", "train_loss", "val_loss"])
    return params


def train_cgan(run: Run) -> cgan.GanPair:
    data = datagen.read_jsonl(run.input(None, AUG_DATA))
    pair = cgan.gan_train(data, run.cfg.gan)
    pair.save(run.wrote(GAN_MODEL))
    _write_rows(run.wrote("cgan_log.csv"), pair.log, ["epoch", "d_loss", "g_loss", "d_real", "d_fake"])
    return pair


def gen_fake(run: Run) -> datagen.Dataset:
    c = run.cfg
    pair = cgan.GanPair.load(run.input(c.inputs.gan, GAN_MODEL))
    ds = cgan.gan_generate(pair, c.cgan_run.n_fake, list(c.cgan_run.real_loads), c.seed)
    datagen.write_jsonl(ds, run.wrote(FAKE_DATA))
    run.wrote(datagen.header_path(FAKE_DATA).name)
    n_probe = min(c.cgan_run.n_probe, len(ds))
    if n_probe:
        mean, std = cgan.fidelity_score(ds, real_plant(c), n_probe, c.seed)
        path = run.wrote("fidelity.json")
        path.write_text(json.dumps({"mean": mean, "std": std, "n_probe": n_probe}, indent=2, sort_keys=True) + "\n")
    return ds


# ---------------------------------------------------------------- evaluation


def adapt(run: Run, model_path=None) -> evaluate.AdaptResult:
    c = run.cfg
    params = mlp.load(model_path or run.input(c.inputs.model, MAML_MODEL))
    e = c.eval
    res = evaluate.adapt(
        params, real_plant(c), e.adapt_steps, e.samples_per_step, e.adapt_alpha, c.seed, e.adapt_load, e.n_points
    )
    evaluate.write_curve_csv(res.curve, run.wrote("adapt_curve.csv"))
    mlp.save(res.models[-1], run.wrote(ADAPTED_MODEL))
    return res


def eval_random(run: Run, model_path=None, load=None) -> evaluate.EvalReport:
    c = run.cfg
    params = mlp.load(model_path or run.input(c.inputs.model, ADAPTED_MODEL))
    load = c.eval.adapt_load if load is None else load
    rep = evaluate.random_point_test(params, real_plant(c), c.eval.n_points, load, c.seed)
    rep.write_csv(run.wrote("random_points.csv"))
    rep.write_json(run.wrote("random_points.json"))
    return rep


def eval_traj(run: Run, model_path=None, load=None) -> dict:
    c = run.cfg
    params = mlp.load(model_path or run.input(c.inputs.model, ADAPTED_MODEL))
    load = c.eval.traj_load if load is None else load
    reports = {}
    for spec in evaluate.make_specs(load):
        rep = evaluate.follow_trajectory(params, real_plant(c), spec, c.seed)
        rep.write_csv(run.wrote(f"traj_{spec.kind}.csv"))
        rep.write_json(run.wrote(f"traj_{spec.kind}.json"))
        reports[spec.kind] = rep
    return reports


# ---------------------------------------------------------------- pipelines


def sim2real(run: Run) -> dict:
    gen_sim(run)
    train_maml(run)
    res = adapt(run)
    rep = eval_random(run)
    traj = eval_traj(run)
    return {"curve": res.curve, "random": rep.summary(), **{k: v.summary() for k, v in traj.items()}}


def cgan_pipeline(run: Run) -> dict:
    c = run.cfg.cgan_run
    gen_real(run, c.real_waypoints, c.real_interp, c.real_loads)
    augment(run)
    train_cgan(run)
    gen_fake(run)
    train_maml(run, [run.path(REAL_DATA), run.path(FAKE_DATA)])
    res = adapt(run)
    rep = eval_random(run)
    traj = eval_traj(run)
    return {"curve": res.curve, "random": rep.summary(), **{k: v.summary() for k, v in traj.items()}}


PIPELINES = {"sim2real": sim2real, "cgan": cgan_pipeline}


def run_pipeline(name: str, cfg: ExperimentConfig, out=None) -> dict:
    if name not in PIPELINES:
        raise DomainError(f"unknown pipeline {name!r}; choose from {sorted(PIPELINES)}")
    run = Run(cfg, out)
    summary = PIPELINES[name](run)
    (run.wrote("summary.json")).write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    run.manifest(f"pipeline {name}")
    return summary
