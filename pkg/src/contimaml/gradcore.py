"""Exact first and second order derivatives of fully connected ReLU networks.

Hidden layers use ReLU; the output layer applies ``params.out_act``. Inputs
may be a single vector ``(in,)`` or a batch ``(n, in)``; parameter gradients
are summed over the batch.

The ReLU derivative at exactly zero is taken as 0 and its second derivative
as 0 everywhere, so Hessian-vector products ignore the kinks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .mlp import MlpParams


@dataclass(frozen=True)
class GradTape:
    inputs: tuple[np.ndarray, ...]  # input to each layer
    pre: tuple[np.ndarray, ...]  # pre-activation of each layer
    output: np.ndarray
    widths: tuple[int, ...]
    single: bool


def _as_batch(params: MlpParams, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = x[None, :] if single else x
    if xb.ndim != 2 or xb.shape[1] != params.widths[0]:
        raise DimensionError(f"input shape {x.shape} does not match width {params.widths[0]}")
    return xb, single


def _out(z, act):
    if act == "linear":
        return z
    if act == "tanh":
        return np.tanh(z)
    return 0.5 * (1.0 + np.tanh(0.5 * z))  # sigmoid without overflow


def _out_deriv(y, act):
    if act == "linear":
        return 1.0
    if act == "tanh":
        return 1.0 - y * y
    return y * (1.0 - y)


def mlp_forward(params: MlpParams, x):
    """Return ``(y, tape)``."""
    h, single = _as_batch(params, x)
    inputs, pre = [], []
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        inputs.append(h)
        z = h @ w.T + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else _out(z, params.out_act)
    tape = GradTape(tuple(inputs), tuple(pre), h, params.widths, single)
    return (h[0] if single else h), tape


def predict(params: MlpParams, x):
    return mlp_forward(params, x)[0]


def _cotangent_batch(tape: GradTape, g):
    g = np.asarray(g, dtype=float)
    gb = g[None, :] if tape.single and g.ndim == 1 else g
    if gb.shape != tape.output.shape:
        raise DimensionError(f"cotangent shape {g.shape} does not match output {tape.output.shape}")
    return gb


def mlp_backward(params: MlpParams, tape: GradTape, dL_dy, logits: bool = False, input_grad: bool = False):
    """Reverse-mode gradient of ``<dL_dy, y>`` with respect to the parameters.

    With ``logits=True`` the cotangent is taken w.r.t. the output
    pre-activation, bypassing the output nonlinearity. With ``input_grad``
    the cotangent of the network input is returned as a second value.
    """
    if tape.widths != params.widths:
        raise DimensionError(f"tape widths {tape.widths} do not match params {params.widths}")
    g = _cotangent_batch(tape, dL_dy)
    if not logits:
        g = g * _out_deriv(tape.output, params.out_act)
    n = len(params.weights)
    gw, gb = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        gw[i] = g.T @ tape.inputs[i]
        gb[i] = g.sum(axis=0)
        g = g @ params.weights[i]
        if i > 0:
            g = g * (tape.pre[i - 1] > 0)
    grads = MlpParams(tuple(gw), tuple(gb), params.out_act)
    if input_grad:
        return grads, (g[0] if tape.single else g)
    return grads


def mlp_jvp_grad(params: MlpParams, x, dL_dy, direction: MlpParams, out_curvature=0.0) -> MlpParams:
    """Directional derivative of the parameter gradient along ``direction``.

    Runs the forward pass on dual numbers (value, tangent) and then the
    backward pass on dual numbers, i.e. forward-over-reverse.

    ``dL_dy`` is either a fixed output cotangent or a callable ``y -> g``;
    ``out_curvature`` is d(g)/d(y) (a scalar or an (out, out) matrix), which
    supplies the tangent of the cotangent. For the summed squared error use
    ``dL_dy=lambda y: 2 * (y - target)`` and ``out_curvature=2.0``.
    """
    if params.out_act != "linear":
        raise DomainError("second-order products are only defined for linear-output networks")
    if direction.widths != params.widths:
        raise DimensionError(f"direction widths {direction.widths} vs params {params.widths}")
    h, single = _as_batch(params, x)
    dh = np.zeros_like(h)
    n = len(params.weights)
    inputs, dinputs, masks = [], [], []
    for i in range(n):
        w, b = params.weights[i], params.biases[i]
        dw, db = direction.weights[i], direction.biases[i]
        inputs.append(h)
        dinputs.append(dh)
        z = h @ w.T + b
        dz = dh @ w.T + h @ dw.T + db
        if i < n - 1:
            mask = z > 0
            masks.append(mask)
            h, dh = z * mask, dz * mask
        else:
            h, dh = z, dz

    g = dL_dy(h[0] if single else h) if callable(dL_dy) else dL_dy
    g = np.asarray(g, dtype=float)
    g = g[None, :] if single and g.ndim == 1 else g
    if g.shape != h.shape:
        raise DimensionError(f"cotangent shape {g.shape} does not match output {h.shape}")
    curv = np.asarray(out_curvature, dtype=float)
    dg = dh @ curv.T if curv.ndim == 2 else curv * dh

    gw, gb = [None] * n, [None] * n
    for i in range(n - 1, -1, -1):
        w, dw = params.weights[i], direction.weights[i]
        gw[i] = dg.T @ inputs[i] + g.T @ dinputs[i]
        gb[i] = dg.sum(axis=0)
        g, dg = g @ w, dg @ w + g @ dw
        if i > 0:
            m = masks[i - 1]
            g, dg = g * m, dg * m
    return MlpParams(tuple(gw), tuple(gb), params.out_act)


def _batch_scale(y, reduction):
    if reduction == "sum":
        return 1.0
    if reduction == "mean":
        return 1.0 / y.size
    raise DomainError(f"reduction must be 'sum' or 'mean', got {reduction!r}")


def mse_grad(params: MlpParams, x, target, reduction: str = "sum"):
    """Squared L2 error over a batch and its parameter gradient.

    ``reduction="sum"`` adds the per-sample errors; ``"mean"`` averages over
    every output element (batch size times output width).
    """
    y, tape = mlp_forward(params, x)
    diff = y - np.asarray(target, dtype=float)
    if diff.shape != y.shape:
        raise DimensionError(f"target shape does not match output {y.shape}")
    c = _batch_scale(y, reduction)
    return c * float(np.sum(diff * diff)), mlp_backward(params, tape, (2.0 * c) * diff)


def mse_hvp(params: MlpParams, x, target, direction: MlpParams, reduction: str = "sum") -> MlpParams:
    """Hessian of the squared error loss times ``direction``."""
    target = np.asarray(target, dtype=float)
    c = 2.0 * _batch_scale(target, reduction)
    return mlp_jvp_grad(params, x, lambda y: c * (y - target), direction, out_curvature=c)
