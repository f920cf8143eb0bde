"""Command-line entry point: ``contimaml <command> [options]``.

Options may also come from environment variables named ``CMAML_<OPTION>``
(for example ``CMAML_SEED=7``); an explicit flag wins over the environment,
which wins over the config file.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import pipeline as pl
from . import plant as plant_mod
from .config import ExperimentConfig
from .errors import ConfigError, DimensionError, DomainError, StateError

ENV_PREFIX = "CMAML_"
ENV_OPTIONS = ("config", "out", "seed", "steps", "load", "jobs")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_MISSING_FILE = 4
EXIT_DOMAIN = 5
EXIT_STATE = 6

STAGES = {
    "gen-sim": pl.gen_sim,
    "gen-real": pl.gen_real,
    "train-maml": pl.train_maml,
    "train-bpnn": pl.train_bpnn,
    "adapt": None,
    "eval-random": None,
    "eval-traj": None,
    "augment": pl.augment,
    "train-cgan": pl.train_cgan,
    "gen-fake": pl.gen_fake,
}


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--steps", type=int, help="adaptation gradient steps")
    p.add_argument("--load", type=float, help="load in kg for adaptation and evaluation")
    p.add_argument("--jobs", type=int, help="parallel workers for multi-seed sweeps")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="contimaml", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name)
        _common(p)
        if name in ("adapt", "eval-random", "eval-traj"):
            p.add_argument("--model", help="controller checkpoint to use")
    p = sub.add_parser("pipeline")
    p.add_argument("name", choices=sorted(pl.PIPELINES))
    p.add_argument("--seeds", help="comma-separated seeds; each run goes to <out>/seed-<s>")
    _common(p)
    p = sub.add_parser("plant")
    p.add_argument("action", choices=["probe"])
    p.add_argument("--actuation", required=True, help="four tendon displacements in meters, comma-separated")
    p.add_argument("--real", action="store_true", help="probe the perturbed plant instead of the nominal one")
    _common(p)
    return parser


def _env(name):
    return os.environ.get(ENV_PREFIX + name.upper())


def resolve_config(args) -> ExperimentConfig:
    config = args.config or _env("config")
    cfg = ExperimentConfig.load(config) if config else ExperimentConfig()
    vals = {}
    for name, conv in (("seed", int), ("out", str), ("steps", int), ("load", float)):
        v = getattr(args, name, None)
        if v is None and _env(name) is not None:
            try:
                v = conv(_env(name))
            except ValueError as exc:
                raise ConfigError(f"{ENV_PREFIX}{name.upper()}: {exc}") from exc
        vals[name] = v
    return cfg.with_overrides(**vals)


def _jobs(args) -> int:
    v = args.jobs if args.jobs is not None else _env("jobs")
    try:
        return max(1, int(v)) if v is not None else 1
    except ValueError as exc:
        raise ConfigError(f"{ENV_PREFIX}JOBS: {exc}") from exc


def _sweep_one(args):
    name, cfg_dict, out = args
    return pl.run_pipeline(name, ExperimentConfig.from_dict(cfg_dict), out)


def run_command(args) -> dict:
    if args.command == "plant":
        cfg = resolve_config(args)
        a = np.array([float(v) for v in args.actuation.split(",")])
        config = pl.real_plant(cfg) if args.real else cfg.plant
        load = 0.0 if args.load is None else args.load
        p = plant_mod.forward(config, a, load, noisy=args.real)
        print("x,y,z")
        print(",".join(repr(float(v)) for v in p))
        return {}

    cfg = resolve_config(args)
    if args.command == "pipeline":
        if not args.seeds:
            return pl.run_pipeline(args.name, cfg)
        seeds = [int(s) for s in args.seeds.split(",")]
        jobs = [(args.name, cfg.with_overrides(seed=s).to_dict(), str(Path(cfg.out) / f"seed-{s}")) for s in seeds]
        n = _jobs(args)
        if n == 1:
            results = [_sweep_one(j) for j in jobs]
        else:
            with ProcessPoolExecutor(max_workers=n) as ex:
                results = list(ex.map(_sweep_one, jobs))
        return {str(s): r for s, r in zip(seeds, results)}

    run = pl.Run(cfg)
    model = getattr(args, "model", None)
    if args.command == "adapt":
        res = pl.adapt(run, model)
        out = {"curve": res.curve}
    elif args.command == "eval-random":
        out = pl.eval_random(run, model, args.load).summary()
    elif args.command == "eval-traj":
        out = {k: v.summary() for k, v in pl.eval_traj(run, model, args.load).items()}
    else:
        STAGES[args.command](run)
        out = {"outputs": run.outputs}
    run.manifest(args.command)
    return out


def _error_code(exc) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, FileNotFoundError):
        return EXIT_MISSING_FILE
    if isinstance(exc, (DomainError, DimensionError)):
        return EXIT_DOMAIN
    if isinstance(exc, StateError):
        return EXIT_STATE
    return EXIT_INTERNAL


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run_command(args)
    except Exception as exc:  # reported as JSON with a distinct exit code
        code = _error_code(exc)
        err = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(err), file=sys.stderr)
        return code
    if result:
        print(json.dumps(result, sort_keys=True))
    return EXIT_OK
