"""Shared runs for the test suite.

The expensive simulations are session fixtures so each scenario is
integrated exactly once; tests treat the returned traces as read-only.
"""

import numpy as np
import pytest

from cylflow import geometry, normalization, scenarios, solver
from cylflow.presets import preset


def _run(name, store_states=True):
    cfg = preset(name)
    state = scenarios.make_initial(cfg.scenario_spec())
    trace = solver.evolve(state, cfg.stepper(), cfg.stop_rule(),
                          record_every=cfg.record_every, store_states=store_states)
    return trace, normalization.normalize_trace(trace, cfg.a_target)


@pytest.fixture(scope="session")
def sphere_conservation():
    """Explicit round band on the fully resolved window [0, 0.5], n=256."""
    return _run("sphere_band_conservation")


@pytest.fixture(scope="session")
def sphere_deep():
    """Implicit round band into the extinction tail (area floor 2e-4)."""
    return _run("sphere_band_deep")


@pytest.fixture(scope="session")
def sphere_clean():
    """Implicit round band stopped while all snapshots resolve (floor 1e-2)."""
    return _run("sphere_band_clean")


@pytest.fixture(scope="session")
def gentle_band():
    """Weakly curved band, explicit, t_tilde in [0, 5]."""
    return _run("gentle_band")


@pytest.fixture(scope="session")
def flat_run():
    """Flat cylinder, 10^4 steps (stationary)."""
    return _run("flat_stationary")


@pytest.fixture(scope="session")
def perturbed_run():
    """Round band with a symmetric mode-2 bump, explicit, [0, 0.5]."""
    return _run("perturbed_band")


@pytest.fixture(scope="session")
def oracle_run():
    """Flat cylinder with the tiny mode-1 bump (linear-regime oracle)."""
    return _run("oracle_linear")


@pytest.fixture(scope="session")
def sphere_base():
    return geometry.build_base("cos_band", np.pi / 4, 256)


@pytest.fixture(scope="session")
def flat_base():
    return geometry.build_base("flat", 1.0, 64)
