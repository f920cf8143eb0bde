import numpy as np
import pytest

from contimaml import datagen, gradcore, meta, mlp
from contimaml.config import experiment_plant
from contimaml.errors import DomainError
from contimaml.mlp import MlpParams


def scalar(v):
    return MlpParams((np.array([[float(v)]]),), (np.array([0.0]),))


@pytest.fixture(scope="module")
def small_sim():
    return datagen.gen_sim(experiment_plant(), 60, [0.0, 0.5, 1.0], seed=2)


def test_sample_task(small_sim):
    t = meta.sample_task(small_sim, 0.5, 10, seed=1)
    assert len(t.support) == len(t.query) == 10
    assert np.all(t.support.load == 0.5) and np.all(t.query.load == 0.5)
    assert not set(t.support.digests()) & set(t.query.digests())
    assert meta.sample_task(small_sim, 0.5, 10, seed=1).support.digests() == t.support.digests()
    with pytest.raises(DomainError):
        meta.sample_task(small_sim, 0.5, 31, seed=1)


def test_inner_adapt_one_step():
    # L = (w - 3)^2, dL/dw = -4 at w = 1
    out = meta.inner_adapt(scalar(1.0), (np.array([[1.0]]), np.array([[3.0]])), alpha=0.01)
    assert out.weights[0][0, 0] == pytest.approx(1.04)


def test_two_steps_compose():
    support = (np.array([[1.0], [2.0]]), np.array([[3.0], [1.0]]))
    p = mlp.init((1, 5, 1), 3)
    twice = meta.inner_adapt(meta.inner_adapt(p, support, 0.05), support, 0.05)
    assert meta.inner_adapt(p, support, 0.05, steps=2).equal(twice)


def test_zero_alpha_is_identity(small_sim):
    p = mlp.controller(0)
    assert meta.inner_adapt(p, small_sim.take(range(10)), 0.0).equal(p)


def test_first_and_second_order_agree_for_tiny_alpha():
    rng = np.random.default_rng(0)
    p = mlp.init((3, 8, 2), 1)
    task = tuple(rng.standard_normal(s) for s in ((5, 3), (5, 2), (5, 3), (5, 2)))
    _, g1 = meta.task_meta_gradient(p, task, 1e-5, second_order=False)
    _, g2 = meta.task_meta_gradient(p, task, 1e-5, second_order=True)
    assert np.linalg.norm((g1 - g2).flat()) / np.linalg.norm(g2.flat()) < 1e-4
    _, g0 = gradcore.mse_grad(p, task[2], task[3], "mean")
    _, gz = meta.task_meta_gradient(p, task, 0.0, second_order=True)
    assert np.allclose(gz.flat(), g0.flat())


def test_second_order_matches_finite_differences():
    rng = np.random.default_rng(1)
    p = mlp.init((2, 6, 1), 2).map(lambda a: a + 0.1 * rng.standard_normal(a.shape))
    task = tuple(rng.standard_normal(s) for s in ((4, 2), (4, 1), (4, 2), (4, 1)))
    alpha = 0.3
    _, g = meta.task_meta_gradient(p, task, alpha, steps=2, second_order=True)

    def f(q):
        return meta.task_meta_gradient(q, task, alpha, steps=2)[0]

    flat, h = p.flat(), 1e-6
    fd = np.array(
        [(f(p.with_flat(flat + h * e)) - f(p.with_flat(flat - h * e))) / (2 * h) for e in np.eye(flat.size)]
    )
    assert np.linalg.norm(fd - g.flat()) / np.linalg.norm(fd) < 1e-4


def test_config_validation():
    with pytest.raises(DomainError):
        meta.MamlConfig(k=0)
    with pytest.raises(DomainError):
        meta.MamlConfig(loss_reduction="max")
    with pytest.raises(DomainError):
        meta.MamlConfig(outer_optimizer="rmsprop")


def test_meta_train_deterministic_and_learns(small_sim):
    cfg = meta.MamlConfig(k=5, meta_batch=4, epochs=8, steps_per_epoch=5, meta_lr=1e-3)
    p1, log1 = meta.meta_train(small_sim, cfg)
    p2, log2 = meta.meta_train(small_sim, cfg)
    assert p1.equal(p2)
    assert [r["mean_query_loss"] for r in log1] == [r["mean_query_loss"] for r in log2]
    assert log1[-1]["mean_query_loss"] < log1[0]["mean_query_loss"]
    sgd = meta.MamlConfig(k=5, meta_batch=2, epochs=1, steps_per_epoch=2, outer_optimizer="sgd")
    assert not meta.meta_train(small_sim, sgd)[0].equal(mlp.controller(0))


def test_bpnn_zero_lr_and_decreasing(small_sim):
    train, val, _ = datagen.split(small_sim)
    p, _ = meta.train_bpnn(train, val, epochs=2, lr=1e-30)
    assert np.allclose(p.flat(), mlp.controller(0).flat(), atol=1e-20)
    _, log = meta.train_bpnn(train, val, epochs=10, lr=1e-3)
    assert log[-1]["train_loss"] < log[0]["train_loss"]
    with pytest.raises(DomainError):
        meta.train_bpnn(datagen.Dataset.empty())
