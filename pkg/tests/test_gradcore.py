import numpy as np
import pytest

from contimaml import gradcore, mlp
from contimaml.errors import DimensionError, DomainError
from contimaml.mlp import MlpParams
from oracles import fd_grad, random_case, rel_err, straight_mlp


def test_zero_net_gives_zero():
    p = mlp.init((3, 4, 2), 0).zeros_like()
    assert np.array_equal(gradcore.predict(p, np.ones(3)), np.zeros(2))


def test_identity_net_passes_positive_inputs():
    eye = np.eye(2)
    p = MlpParams((eye, eye), (np.zeros(2), np.zeros(2)))
    assert np.array_equal(gradcore.predict(p, np.array([0.3, 2.0])), [0.3, 2.0])


def test_controller_forward_matches_loops():
    p = mlp.controller(4)
    x = np.random.default_rng(4).uniform(-1, 1, 11)
    assert np.max(np.abs(gradcore.predict(p, x) - straight_mlp(p, x))) < 1e-12


def test_batch_matches_rows():
    p = mlp.init((3, 7, 2), 1)
    x = np.random.default_rng(0).standard_normal((5, 3))
    rows = np.stack([gradcore.predict(p, r) for r in x])
    assert np.allclose(gradcore.predict(p, x), rows, atol=1e-14)


def test_scalar_net_gradient():
    p = MlpParams((np.array([[1.5]]),), (np.array([0.0]),))
    _, tape = gradcore.mlp_forward(p, np.array([2.0]))
    g, gx = gradcore.mlp_backward(p, tape, np.array([1.0]), input_grad=True)
    assert g.weights[0][0, 0] == 2.0 and g.biases[0][0] == 1.0
    assert gx[0] == 1.5


def test_zero_cotangent_gives_zero_gradient():
    p, x, _, _ = random_case(0)
    _, tape = gradcore.mlp_forward(p, x)
    g = gradcore.mlp_backward(p, tape, np.zeros((3, 3)))
    assert not np.any(g.flat())


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    p, x, ct, _ = random_case(seed)
    _, tape = gradcore.mlp_forward(p, x)
    g = gradcore.mlp_backward(p, tape, ct).flat()
    fd = fd_grad(lambda q: float(np.sum(gradcore.predict(q, x) * ct)), p, 1e-6)
    assert rel_err(g, fd) < 1e-4


def test_backward_is_linear_in_cotangent():
    p, x, ct, rng = random_case(7)
    ct2 = rng.standard_normal(ct.shape)
    _, tape = gradcore.mlp_forward(p, x)
    lhs = gradcore.mlp_backward(p, tape, 2.0 * ct - 3.0 * ct2).flat()
    rhs = 2.0 * gradcore.mlp_backward(p, tape, ct).flat() - 3.0 * gradcore.mlp_backward(p, tape, ct2).flat()
    assert np.allclose(lhs, rhs, atol=1e-12)


def test_output_activations_gradient():
    for act in ("tanh", "sigmoid"):
        p, x, ct, _ = random_case(11)
        p = MlpParams(p.weights, p.biases, act)
        _, tape = gradcore.mlp_forward(p, x)
        g = gradcore.mlp_backward(p, tape, ct).flat()
        fd = fd_grad(lambda q: float(np.sum(gradcore.predict(q, x) * ct)), p, 1e-6)
        assert rel_err(g, fd) < 1e-4


def test_shape_errors():
    p = mlp.init((3, 4, 2), 0)
    with pytest.raises(DimensionError):
        gradcore.mlp_forward(p, np.ones(4))
    _, tape = gradcore.mlp_forward(p, np.ones(3))
    with pytest.raises(DimensionError):
        gradcore.mlp_backward(p, tape, np.ones(3))
    with pytest.raises(DimensionError):
        gradcore.mlp_backward(mlp.init((3, 5, 2), 0), tape, np.ones(2))
    with pytest.raises(DimensionError):
        gradcore.mlp_jvp_grad(p, np.ones(3), np.ones(2), mlp.init((3, 5, 2), 0))
    with pytest.raises(DomainError):
        gradcore.mlp_jvp_grad(MlpParams(p.weights, p.biases, "tanh"), np.ones(3), np.ones(2), p)


def test_hvp_zero_direction():
    p, x, _, rng = random_case(1)
    y = rng.standard_normal((3, 3))
    assert not np.any(gradcore.mse_hvp(p, x, y, p.zeros_like()).flat())


def test_hvp_scalar_quadratic():
    # y = w x, L = (w x - t)^2, so H = 2 x^2
    p = MlpParams((np.array([[0.7]]),), (np.array([0.0]),))
    v = MlpParams((np.array([[1.0]]),), (np.array([0.0]),))
    hv = gradcore.mse_hvp(p, np.array([[3.0]]), np.array([[1.0]]), v)
    assert hv.weights[0][0, 0] == pytest.approx(18.0)
    assert hv.biases[0][0] == pytest.approx(6.0)


@pytest.mark.parametrize("seed", range(3))
def test_hvp_matches_gradient_differences(seed):
    p, x, _, rng = random_case(seed, margin=1e-2)
    y = rng.standard_normal((3, 3))
    v = p.map(lambda a: rng.standard_normal(a.shape))
    h = 1e-5
    gp = gradcore.mse_grad(p + h * v, x, y)[1].flat()
    gm = gradcore.mse_grad(p - h * v, x, y)[1].flat()
    fd = (gp - gm) / (2 * h)
    hv = gradcore.mse_hvp(p, x, y, v).flat()
    assert np.linalg.norm(hv - fd) / np.linalg.norm(fd) < 1e-3


def test_hvp_symmetry():
    p, x, _, rng = random_case(5)
    y = rng.standard_normal((3, 3))
    u = p.map(lambda a: rng.standard_normal(a.shape))
    v = p.map(lambda a: rng.standard_normal(a.shape))
    assert v.dot(gradcore.mse_hvp(p, x, y, u)) == pytest.approx(u.dot(gradcore.mse_hvp(p, x, y, v)), abs=1e-8)


def test_mean_reduction_scales_sum():
    p, x, _, rng = random_case(2)
    y = rng.standard_normal((3, 3))
    ls, gs = gradcore.mse_grad(p, x, y, "sum")
    lm, gm = gradcore.mse_grad(p, x, y, "mean")
    assert lm == pytest.approx(ls / 9)
    assert np.allclose(gm.flat(), gs.flat() / 9)
    with pytest.raises(DomainError):
        gradcore.mse_grad(p, x, y, "median")
