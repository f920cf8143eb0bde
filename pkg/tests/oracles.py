"""Independent reference computations used by the tests."""

import numpy as np
from scipy.spatial.transform import Rotation

from contimaml import gradcore, mlp


def rigid_chain_tip(sections, q_list, n_links=1000):
    """Tip of a chain of ``n_links`` equal rigid links per section.

    ``sections`` is a list of (length, tendon_radius); ``q_list`` the tendon
    displacements of each section. Link j of a section points along the
    backbone tangent at the middle of its arc segment; the bending axis is
    fixed in the section's base frame.
    """
    pos = np.zeros(3)
    frame = Rotation.identity()
    for (length, d), q in zip(sections, q_list):
        tx = (q[0] - q[2]) / (2 * d)
        ty = (q[1] - q[3]) / (2 * d)
        theta = np.hypot(tx, ty)
        axis = np.array([-ty, tx, 0.0]) / theta if theta > 0 else np.array([0.0, 1.0, 0.0])
        mid = (np.arange(n_links) + 0.5) * theta / n_links
        links = Rotation.from_rotvec(mid[:, None] * axis[None, :])
        dirs = (frame * links).apply(np.array([0.0, 0.0, length / n_links]))
        pos = pos + dirs.sum(axis=0)
        frame = frame * Rotation.from_rotvec(theta * axis)
    return pos


def tendon_q(a, load, backlash, load_coeff):
    return np.maximum(np.asarray(a, dtype=float) - backlash, 0.0) + load_coeff * load / 4.0


def straight_mlp(params, x):
    """Forward pass written as explicit per-layer loops."""
    h = np.asarray(x, dtype=float)
    n = len(params.weights)
    for i in range(n):
        w, b = params.weights[i], params.biases[i]
        z = np.array([sum(w[r, c] * h[c] for c in range(w.shape[1])) + b[r] for r in range(w.shape[0])])
        h = np.maximum(z, 0.0) if i < n - 1 else z
    return h


def random_case(seed, widths=(4, 6, 5, 3), batch=3, margin=1e-3):
    """Random net, inputs and cotangent whose pre-activations stay away from the ReLU kink."""
    rng = np.random.default_rng(seed)
    while True:
        p = mlp.init(widths, int(rng.integers(1 << 30)))
        p = p.map(lambda a: a + 0.1 * rng.standard_normal(a.shape))
        x = rng.standard_normal((batch, widths[0]))
        _, tape = gradcore.mlp_forward(p, x)
        if min(np.abs(z).min() for z in tape.pre[:-1]) > margin:
            return p, x, rng.standard_normal((batch, widths[-1])), rng


def fd_grad(f, params, h):
    flat = params.flat()
    g = np.empty_like(flat)
    for i in range(flat.size):
        e = np.zeros_like(flat)
        e[i] = h
        g[i] = (f(params.with_flat(flat + e)) - f(params.with_flat(flat - e))) / (2 * h)
    return g


def rel_err(a, b, floor=1e-6):
    return np.max(np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), floor))
