import time

import pytest

from midcsim import run
from midcsim.scenario_io import bundled_scenario_path, load_scenario

SCENARIO2_NAMES = (
    "scenario2_subcase1",
    "scenario2_subcase2",
    "scenario2_subcase3",
    "scenario2_fixed_mean",
)


@pytest.fixture(scope="session")
def scenario1():
    scn = load_scenario(bundled_scenario_path("scenario1.toml"))
    t0 = time.perf_counter()
    trace = run(scn)
    return scn, trace, time.perf_counter() - t0


@pytest.fixture(scope="session")
def scenario2_runs():
    """One run per bundled scenario-2 variant: name -> (scenario, trace, wall)."""
    out = {}
    for name in SCENARIO2_NAMES:
        scn = load_scenario(bundled_scenario_path(name + ".toml"))
        t0 = time.perf_counter()
        trace = run(scn)
        out[name] = (scn, trace, time.perf_counter() - t0)
    return out
