"""Dense network parameters, initialisation, losses and optimisers.

Parameters are value-semantic: every operation returns a new object and the
arrays of an existing ``MlpParams`` are never written to.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DimensionError, DomainError

CONTROLLER_WIDTHS = (11, 128, 128, 128, 4)
OUTPUT_ACTIVATIONS = ("linear", "sigmoid", "tanh")
CHECKPOINT_FORMAT = "contimaml.mlp/1"


@dataclass(frozen=True)
class MlpParams:
    """Layer weights ``W_l`` of shape (out, in) and biases ``b_l`` of shape (out,)."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    out_act: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(self.weights))
        object.__setattr__(self, "biases", tuple(self.biases))
        if self.out_act not in OUTPUT_ACTIVATIONS:
            raise DomainError(f"unknown output activation {self.out_act!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise DimensionError("need one bias per weight matrix and at least one layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise DimensionError(f"layer {i}: weight {w.shape} and bias {b.shape} disagree")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise DimensionError(f"layer {i} input {w.shape[1]} != previous output")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def size(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self):
        for w, b in zip(self.weights, self.biases):
            yield w
            yield b

    def _check(self, other: MlpParams):
        if self.widths != other.widths:
            raise DimensionError(f"shape mismatch: {self.widths} vs {other.widths}")

    def map(self, fn, *others: MlpParams) -> MlpParams:
        for o in others:
            self._check(o)
        ws = tuple(fn(w, *(o.weights[i] for o in others)) for i, w in enumerate(self.weights))
        bs = tuple(fn(b, *(o.biases[i] for o in others)) for i, b in enumerate(self.biases))
        return replace(self, weights=ws, biases=bs)

    def __add__(self, other: MlpParams) -> MlpParams:
        return self.map(np.add, other)

    def __sub__(self, other: MlpParams) -> MlpParams:
        return self.map(np.subtract, other)

    def __mul__(self, c: float) -> MlpParams:
        return self.map(lambda a: a * c)

    __rmul__ = __mul__

    def __neg__(self) -> MlpParams:
        return self.map(np.negative)

    def dot(self, other: MlpParams) -> float:
        self._check(other)
        return float(sum(np.vdot(a, b) for a, b in zip(self.arrays(), other.arrays())))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, vec) -> MlpParams:
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (self.size,):
            raise DimensionError(f"flat vector has {vec.size} entries, expected {self.size}")
        out, pos = [], 0
        for a in self.arrays():
            out.append(vec[pos : pos + a.size].reshape(a.shape).copy())
            pos += a.size
        return replace(self, weights=tuple(out[0::2]), biases=tuple(out[1::2]))

    def zeros_like(self) -> MlpParams:
        return self.map(np.zeros_like)

    def allclose(self, other: MlpParams, **kw) -> bool:
        return self.widths == other.widths and all(
            np.allclose(a, b, **kw) for a, b in zip(self.arrays(), other.arrays())
        )

    def equal(self, other: MlpParams) -> bool:
        return (
            self.widths == other.widths
            and self.out_act == other.out_act
            and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))
        )


def init(widths, seed: int, out_act: str = "linear") -> MlpParams:
    """He-uniform weights (bound sqrt(6 / fan_in)) and zero biases."""
    widths = tuple(int(w) for w in widths)
    if len(widths) < 2:
        raise DomainError("need at least input and output widths")
    rng = np.random.default_rng(seed)
    ws, bs = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = np.sqrt(6.0 / fan_in)
        ws.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return MlpParams(tuple(ws), tuple(bs), out_act)


def controller(seed: int) -> MlpParams:
    return init(CONTROLLER_WIDTHS, seed)


def mse_loss(pred, target):
    """Sum over the batch of squared L2 errors, and its cotangent 2 (pred - target)."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape:
        raise DimensionError(f"pred {pred.shape} vs target {target.shape}")
    diff = pred - target
    return float(np.sum(diff * diff)), 2.0 * diff


BCE_CLAMP = 1e-7


def bce_loss(prob, labels):
    """Mean binary cross-entropy of probabilities, and its cotangent w.r.t. the logits.

    Probabilities are clamped to [1e-7, 1 - 1e-7] before the log so the value
    stays finite; the logit cotangent ``(p - y) / n`` is exact.
    """
    prob = np.asarray(prob, dtype=float)
    labels = np.broadcast_to(np.asarray(labels, dtype=float), prob.shape)
    p = np.clip(prob, BCE_CLAMP, 1.0 - BCE_CLAMP)
    n = prob.shape[0] if prob.ndim else 1
    loss = -np.sum(labels * np.log(p) + (1.0 - labels) * np.log1p(-p)) / n
    return float(loss), (prob - labels) / n


def sgd_step(params: MlpParams, grad: MlpParams, lr: float) -> MlpParams:
    return params.map(lambda p, g: p - lr * g, grad)


@dataclass(frozen=True)
class AdamState:
    m: MlpParams
    v: MlpParams
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_init(params: MlpParams, lr: float = 1e-3, **kw) -> AdamState:
    z = params.zeros_like()
    return AdamState(m=z, v=z, lr=lr, **kw)


def adam_step(state: AdamState, params: MlpParams, grad: MlpParams):
    """One bias-corrected Adam update. Returns ``(new_params, new_state)``."""
    params._check(grad)
    params._check(state.m)
    b1, b2 = state.beta1, state.beta2
    t = state.t + 1
    m = state.m.map(lambda m_, g: b1 * m_ + (1.0 - b1) * g, grad)
    v = state.v.map(lambda v_, g: b2 * v_ + (1.0 - b2) * g * g, grad)
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new = params.map(
        lambda p, m_, v_: p - state.lr * (m_ / c1) / (np.sqrt(v_ / c2) + state.eps), m, v
    )
    return new, replace(state, m=m, v=v, t=t)


def to_json(params: MlpParams) -> dict:
    return {
        "format": CHECKPOINT_FORMAT,
        "widths": list(params.widths),
        "out_act": params.out_act,
        "weights": [w.ravel().tolist() for w in params.weights],
        "biases": [b.tolist() for b in params.biases],
    }


def from_json(d: dict) -> MlpParams:
    if d.get("format") != CHECKPOINT_FORMAT:
        raise DomainError(f"not an MLP checkpoint: format={d.get('format')!r}")
    widths = d["widths"]
    ws = tuple(
        np.asarray(w, dtype=float).reshape(o, i)
        for w, i, o in zip(d["weights"], widths[:-1], widths[1:])
    )
    bs = tuple(np.asarray(b, dtype=float) for b in d["biases"])
    return MlpParams(ws, bs, d.get("out_act", "linear"))


def save(params: MlpParams, path) -> None:
    Path(path).write_text(json.dumps(to_json(params)) + "\n")


def load(path) -> MlpParams:
    return from_json(json.loads(Path(path).read_text()))
