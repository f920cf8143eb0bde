"""Controller datasets: generation, normalisation, splitting and JSONL storage.

A sample is one transition ``(p_next, a_curr, p_curr, load) -> a_next``:
given where the tip is, where it should go, the current tendon displacements
and the load, predict the displacements that take it there.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import plant as plant_mod
from .errors import DomainError
from .plant import PlantConfig

FIELDS = ("p_next", "a_curr", "p_curr", "load", "a_next")
PROVENANCES = ("sim", "virtual-real", "cgan", "augmented", "mixed")

# fixed physical bounds shared by every dataset, so sim and real data live in one input space
BOUNDS = {
    "p_next": (-0.8, 0.8),
    "a_curr": (0.0, 0.25),
    "p_curr": (-0.8, 0.8),
    "load": (0.0, 1.0),
    "a_next": (0.0, 0.25),
}


@dataclass(frozen=True)
class Sample:
    p_next: tuple
    a_curr: tuple
    p_curr: tuple
    load: float
    a_next: tuple

    def to_json(self) -> str:
        return json.dumps(
            {
                "p_next": list(self.p_next),
                "a_curr": list(self.a_curr),
                "p_curr": list(self.p_curr),
                "load": self.load,
                "a_next": list(self.a_next),
            }
        )

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()


@dataclass(frozen=True)
class Dataset:
    p_next: np.ndarray
    a_curr: np.ndarray
    p_curr: np.ndarray
    load: np.ndarray
    a_next: np.ndarray
    provenance: str = "sim"
    rng_seed: int | None = None
    normalized: bool = False
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.load)
        for name, width in (("p_next", 3), ("a_curr", 4), ("p_curr", 3), ("a_next", 4)):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1, width)
            if len(arr) != n:
                raise DomainError(f"field {name} has {len(arr)} rows, load has {n}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "load", np.asarray(self.load, dtype=float).reshape(-1))
        if self.provenance not in PROVENANCES:
            raise DomainError(f"unknown provenance {self.provenance!r}")

    def __len__(self) -> int:
        return len(self.load)

    def __getitem__(self, idx) -> Sample:
        return Sample(
            tuple(self.p_next[idx].tolist()),
            tuple(self.a_curr[idx].tolist()),
            tuple(self.p_curr[idx].tolist()),
            float(self.load[idx]),
            tuple(self.a_next[idx].tolist()),
        )

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    def take(self, idx) -> Dataset:
        idx = np.asarray(idx, dtype=int)
        return replace(
            self,
            p_next=self.p_next[idx],
            a_curr=self.a_curr[idx],
            p_curr=self.p_curr[idx],
            load=self.load[idx],
            a_next=self.a_next[idx],
            info=dict(self.info),
        )

    def loads(self) -> list[float]:
        return sorted({round(float(w), 9) for w in self.load})

    def at_load(self, load: float) -> Dataset:
        return self.take(np.flatnonzero(np.abs(self.load - load) < 1e-9))

    def digests(self) -> list[str]:
        return [s.digest() for s in self]

    @classmethod
    def empty(cls, provenance="sim", **kw) -> Dataset:
        return cls(np.zeros((0, 3)), np.zeros((0, 4)), np.zeros((0, 3)), np.zeros(0), np.zeros((0, 4)), provenance, **kw)


def concat(parts, provenance: str | None = None) -> Dataset:
    parts = list(parts)
    if not parts:
        raise DomainError("nothing to concatenate")
    if provenance is None:
        provs = {p.provenance for p in parts}
        provenance = provs.pop() if len(provs) == 1 else "mixed"
    return Dataset(
        *(np.concatenate([getattr(p, f) for p in parts]) for f in FIELDS),
        provenance=provenance,
        rng_seed=parts[0].rng_seed,
        normalized=parts[0].normalized,
        info={"parts": [p.info for p in parts]},
    )


def _transitions(acts: np.ndarray, tips: np.ndarray, load: float):
    n = len(acts) - 1
    return {
        "p_next": tips[1:],
        "a_curr": acts[:-1],
        "p_curr": tips[:-1],
        "load": np.full(n, float(load)),
        "a_next": acts[1:],
    }


def _check_loads(loads):
    loads = [float(w) for w in loads]
    if not loads:
        raise DomainError("loads must be nonempty")
    for w in loads:
        if w < 0:
            raise DomainError(f"load must be >= 0, got {w}")
    return loads


def _run_plant(config, acts, load, noisy, rng, li):
    try:
        return plant_mod.forward(config, acts, load, noisy=noisy, rng=rng)
    except DomainError as exc:
        raise DomainError(f"load index {li}: {exc}") from exc


def gen_sim(config: PlantConfig, n_per_load: int, loads, constraint_fraction: float = 0.1, seed: int = 0) -> Dataset:
    """Random-walk actuation on the noiseless plant, ``n_per_load`` transitions per load.

    For the first ``constraint_fraction`` of each load's walk, every channel
    moves by at most 10% of the stroke per step; afterwards ``a_next`` is
    drawn uniformly over the full stroke.
    """
    loads = _check_loads(loads)
    if n_per_load <= 0:
        raise DomainError("n_per_load must be > 0")
    a_max = config.max_stroke
    max_step = 0.1 * a_max
    n_constrained = int(round(constraint_fraction * n_per_load))
    parts = []
    for li, w in enumerate(loads):
        rng = np.random.default_rng([seed, li])
        acts = np.empty((n_per_load + 1, 4))
        acts[0] = rng.uniform(0.0, a_max, 4)
        for i in range(n_per_load):
            if i < n_constrained:
                step = rng.uniform(-max_step, max_step, 4)
                acts[i + 1] = np.clip(acts[i] + step, 0.0, a_max)
            else:
                acts[i + 1] = rng.uniform(0.0, a_max, 4)
        tips = _run_plant(config, acts, w, False, None, li)
        parts.append(_transitions(acts, tips, w))
    return Dataset(
        *(np.concatenate([p[f] for p in parts]) for f in FIELDS),
        provenance="sim",
        rng_seed=seed,
        info={
            "generator": "gen_sim",
            "n_per_load": n_per_load,
            "loads": loads,
            "constraint_fraction": constraint_fraction,
        },
    )


def gen_protocol_real(
    config: PlantConfig,
    waypoints_per_load: int = 101,
    interp_points: int = 20,
    loads=None,
    seed: int = 0,
) -> Dataset:
    """Prototype collection protocol run against a (noisy) plant.

    Per load: draw random waypoints, visit ``interp_points`` evenly spaced
    actuations on each segment between consecutive waypoints (start point
    excluded) and record every measured transition.
    """
    if loads is None:
        loads = [round(0.05 * i, 2) for i in range(11)]
    loads = _check_loads(loads)
    if waypoints_per_load < 2 or interp_points < 1:
        raise DomainError("need >= 2 waypoints and >= 1 interpolation point")
    a_max = config.max_stroke
    frac = np.arange(1, interp_points + 1)[:, None] / interp_points
    parts = []
    for li, w in enumerate(loads):
        rng = np.random.default_rng([seed, li])
        way = rng.uniform(0.0, a_max, size=(waypoints_per_load, 4))
        seq = [way[:1]]
        for k in range(waypoints_per_load - 1):
            seq.append(way[k] + frac * (way[k + 1] - way[k]))
        acts = np.clip(np.concatenate(seq), 0.0, a_max)
        tips = _run_plant(config, acts, w, True, rng, li)
        parts.append(_transitions(acts, tips, w))
    return Dataset(
        *(np.concatenate([p[f] for p in parts]) for f in FIELDS),
        provenance="virtual-real" if config.perturbation is not None else "sim",
        rng_seed=seed,
        info={
            "generator": "gen_protocol_real",
            "waypoints_per_load": waypoints_per_load,
            "interp_points": interp_points,
            "loads": loads,
        },
    )


def split_sizes(n: int, ratios) -> list[int]:
    """Largest-remainder apportionment; ties go to the later split."""
    exact = [n * r for r in ratios]
    sizes = [int(np.floor(e)) for e in exact]
    rest = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda i: (-(exact[i] - sizes[i]), -i))
    for i in order[:rest]:
        sizes[i] += 1
    return sizes


def split(ds: Dataset, ratios=(0.70, 0.15, 0.15), seed: int = 0):
    ratios = tuple(float(r) for r in ratios)
    if abs(sum(ratios) - 1.0) > 1e-9 or any(r < 0 for r in ratios):
        raise DomainError(f"split ratios must be >= 0 and sum to 1, got {ratios}")
    perm = np.random.default_rng(seed).permutation(len(ds))
    out, start = [], 0
    for size in split_sizes(len(ds), ratios):
        part = ds.take(perm[start : start + size])
        out.append(replace(part, info={**part.info, "split_ratios": list(ratios), "split_seed": seed}))
        start += size
    return tuple(out)


def _check_bounds(name, values):
    lo, hi = BOUNDS[name]
    bad = (values < lo) | (values > hi)
    if np.any(bad):
        v = float(values[bad].flat[0])
        raise DomainError(f"field {name} value {v!r} outside physical bound [{lo}, {hi}]")


def scale(name: str, values):
    """Map a physical field onto [-1, 1]."""
    values = np.asarray(values, dtype=float)
    _check_bounds(name, values)
    lo, hi = BOUNDS[name]
    return (values - lo) * (2.0 / (hi - lo)) - 1.0


def unscale(name: str, values):
    lo, hi = BOUNDS[name]
    return (np.asarray(values, dtype=float) + 1.0) * ((hi - lo) / 2.0) + lo


def norm_stats() -> dict:
    return {name: {"low": lo, "high": hi} for name, (lo, hi) in BOUNDS.items()}


def normalize(ds: Dataset):
    """Return ``(normalized_dataset, stats)``."""
    if len(ds) == 0:
        raise DomainError("cannot normalize an empty dataset")
    if ds.normalized:
        raise DomainError("dataset is already normalized")
    fields = {f: scale(f, getattr(ds, f)) for f in FIELDS}
    return replace(ds, **fields, normalized=True), norm_stats()


def denormalize(ds: Dataset) -> Dataset:
    if not ds.normalized:
        raise DomainError("dataset is not normalized")
    fields = {f: unscale(f, getattr(ds, f)) for f in FIELDS}
    return replace(ds, **fields, normalized=False)


def encode_inputs(p_next, a_curr, p_curr, load) -> np.ndarray:
    """Controller input rows (n, 11) in normalized units; accepts single samples too."""
    p_next = np.atleast_2d(p_next)
    load = np.atleast_1d(np.asarray(load, dtype=float))
    load = np.broadcast_to(load, (len(p_next),))
    return np.concatenate(
        [
            scale("p_next", p_next),
            scale("a_curr", np.atleast_2d(a_curr)),
            scale("p_curr", np.atleast_2d(p_curr)),
            scale("load", load)[:, None],
        ],
        axis=1,
    )


def xy(ds: Dataset):
    """Network inputs (n, 11) and targets (n, 4) for a physical-units dataset."""
    return (
        encode_inputs(ds.p_next, ds.a_curr, ds.p_curr, ds.load),
        scale("a_next", ds.a_next),
    )


def decode_actuation(y) -> np.ndarray:
    return unscale("a_next", y)


def write_jsonl(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        for s in ds:
            fh.write(s.to_json() + "\n")
    header = {
        "provenance": ds.provenance,
        "rng_seed": ds.rng_seed,
        "n": len(ds),
        "normalized": ds.normalized,
        "normalization": norm_stats(),
        "info": ds.info,
    }
    header_path(path).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")


def header_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".header.json")


def read_jsonl(path) -> Dataset:
    path = Path(path)
    rows = [json.loads(line) for line in path.read_text().splitlines() if line.strip()]
    hp = header_path(path)
    header = json.loads(hp.read_text()) if hp.exists() else {}
    if not rows:
        return Dataset.empty(header.get("provenance", "sim"), rng_seed=header.get("rng_seed"))
    return Dataset(
        *(np.array([r[f] for r in rows], dtype=float) for f in FIELDS),
        provenance=header.get("provenance", "sim"),
        rng_seed=header.get("rng_seed"),
        normalized=header.get("normalized", False),
        info=header.get("info", {}),
    )


def write_csv(ds: Dataset, path) -> None:
    cols = (
        [f"p_next_{c}" for c in "xyz"]
        + [f"a_curr_{i}" for i in range(4)]
        + [f"p_curr_{c}" for c in "xyz"]
        + ["load"]
        + [f"a_next_{i}" for i in range(4)]
    )
    with Path(path).open("w") as fh:
        fh.write(",".join(cols) + "\n")
        for s in ds:
            vals = [*s.p_next, *s.a_curr, *s.p_curr, s.load, *s.a_next]
            fh.write(",".join(repr(float(v)) for v in vals) + "\n")
