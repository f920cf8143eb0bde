import json

import pytest

# one-line verdicts recorded by the acceptance tests, printed after the run
ACCEPTANCE = {}


def tiny_config(seed=0):
    """A run config small enough for every pipeline to finish in seconds."""
    return {
        "seed": seed,
        "data": {"n_per_load": 30, "sim_loads": [0.0, 0.5, 1.0]},
        "maml": {"epochs": 2, "k": 5, "meta_batch": 2, "steps_per_epoch": 2},
        "gan": {"epochs": 1, "hidden": [8], "latent_dim": 4},
        "bpnn": {"epochs": 1},
        "eval": {"adapt_steps": 2, "samples_per_step": 10, "n_points": 3},
        "cgan_run": {"real_waypoints": 3, "real_interp": 5, "real_loads": [0.0, 0.1], "n_fake": 40, "n_probe": 10},
    }


@pytest.fixture
def tiny_config_path(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(tiny_config()))
    return path


@pytest.fixture
def verdict():
    """Record ``criterion: PASS|FAIL detail`` for the end-of-run summary."""

    def record(key, ok, detail):
        line = f"criterion {key}: {'PASS' if ok else 'FAIL'} {detail}"
        ACCEPTANCE[key] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
