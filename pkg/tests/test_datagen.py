import numpy as np
import pytest

from contimaml import datagen, plant
from contimaml.config import SIM_LOADS, experiment_plant
from contimaml.errors import DomainError


@pytest.fixture(scope="module")
def sim():
    return datagen.gen_sim(experiment_plant(), 1000, SIM_LOADS, seed=0)


def test_sim_counts(sim):
    assert len(sim) == 11000
    assert all(len(sim.at_load(w)) == 1000 for w in SIM_LOADS)
    assert sim.provenance == "sim"


def test_constrained_prefix(sim):
    for w in SIM_LOADS:
        part = sim.at_load(w)
        steps = np.abs(part.a_next[:100] - part.a_curr[:100])
        assert steps.max() <= 0.025 + 1e-15
        assert np.all(part.a_curr[1:] == part.a_next[:-1])


def test_labels_match_plant(sim):
    cfg = experiment_plant()
    idx = np.random.default_rng(0).choice(len(sim), 50, replace=False)
    for i in idx:
        s = sim[i]
        assert np.array_equal(plant.forward(cfg, np.array(s.a_next), s.load), s.p_next)
        assert np.array_equal(plant.forward(cfg, np.array(s.a_curr), s.load), s.p_curr)


def test_sim_reproducible_and_seed_sensitive(sim):
    again = datagen.gen_sim(experiment_plant(), 1000, SIM_LOADS, seed=0)
    assert again.digests() == sim.digests()
    other = datagen.gen_sim(experiment_plant(), 10, [0.0], seed=1)
    assert other[0] != sim[0]


def test_protocol_counts_and_noise():
    vr = plant.make_virtual_real(experiment_plant())
    ds = datagen.gen_protocol_real(vr, 101, 20, loads=[0.0, 0.25], seed=3)
    assert len(ds) == 4000 and len(ds.at_load(0.25)) == 2000
    assert ds.provenance == "virtual-real"
    part = ds.at_load(0.25)
    resid = part.p_next - plant.forward(vr, part.a_next, 0.25)
    assert 0.0005 < resid.std() < 0.002


def test_bad_inputs():
    with pytest.raises(DomainError):
        datagen.gen_sim(experiment_plant(), 0, [0.0])
    with pytest.raises(DomainError):
        datagen.gen_sim(experiment_plant(), 5, [])
    with pytest.raises(DomainError, match="load"):
        datagen.gen_sim(experiment_plant(), 5, [0.0, -0.5])


@pytest.mark.parametrize(
    "n, sizes", [(10, [7, 1, 2]), (10000, [7000, 1500, 1500]), (11000, [7700, 1650, 1650]), (3, [2, 0, 1])]
)
def test_split_sizes(n, sizes):
    assert datagen.split_sizes(n, (0.7, 0.15, 0.15)) == sizes


def test_split_disjoint(sim):
    parts = datagen.split(sim, seed=0)
    assert [len(p) for p in parts] == [7700, 1650, 1650]
    sets = [set(p.digests()) for p in parts]
    assert not (sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2])
    assert set().union(*sets) == set(sim.digests())
    with pytest.raises(DomainError):
        datagen.split(sim, (0.5, 0.6))


def test_normalize_roundtrip(sim):
    norm, stats = datagen.normalize(sim)
    for f in datagen.FIELDS:
        v = getattr(norm, f)
        assert v.min() >= -1.0 and v.max() <= 1.0
    assert stats["a_next"] == {"low": 0.0, "high": 0.25}
    back = datagen.denormalize(norm)
    for f in datagen.FIELDS:
        assert np.allclose(getattr(back, f), getattr(sim, f), atol=1e-15)
    with pytest.raises(DomainError):
        datagen.normalize(norm)
    with pytest.raises(DomainError):
        datagen.normalize(datagen.Dataset.empty())


def test_scale_rejects_out_of_bounds():
    assert datagen.scale("a_next", np.array([0.0, 0.125, 0.25])).tolist() == [-1.0, 0.0, 1.0]
    with pytest.raises(DomainError, match="a_curr"):
        datagen.scale("a_curr", np.array([0.3]))


def test_xy_shapes(sim):
    x, y = datagen.xy(sim.take(range(5)))
    assert x.shape == (5, 11) and y.shape == (5, 4)
    assert np.allclose(datagen.decode_actuation(y), sim.a_next[:5])


def test_jsonl_roundtrip_and_bytes(tmp_path, sim):
    part = sim.take(range(200))
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    datagen.write_jsonl(part, a)
    datagen.write_jsonl(datagen.gen_sim(experiment_plant(), 1000, SIM_LOADS, seed=0).take(range(200)), b)
    assert a.read_bytes() == b.read_bytes()
    back = datagen.read_jsonl(a)
    assert back.digests() == part.digests() and back.provenance == "sim"
    datagen.write_csv(part, tmp_path / "a.csv")
    lines = (tmp_path / "a.csv").read_text().splitlines()
    assert len(lines) == 201 and len(lines[0].split(",")) == 15


def test_concat_provenance(sim):
    vr = datagen.Dataset.empty("virtual-real")
    assert datagen.concat([sim.take([0]), vr]).provenance == "mixed"
    assert datagen.concat([sim.take([0]), sim.take([1])]).provenance == "sim"
    with pytest.raises(DomainError):
        datagen.Dataset(np.zeros((2, 3)), np.zeros((1, 4)), np.zeros((2, 3)), np.zeros(2), np.zeros((2, 4)))
