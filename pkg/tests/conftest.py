import json

import pytest

from thermocal import io, mcmc
from thermocal.fixtures import builtin_path
from thermocal.statmodel import PosteriorModel

# chain settings used by the seeded study tests: M = (15000 - 5000) / 2 = 5000
STUDY = {"n_iter": 15000, "burn_in": 5000, "thin": 2}

# verdict lines collected by the acceptance tests; replayed after the run so
# they survive output capture
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def geometry():
    return io.load_geometry(builtin_path("geometry_default"))


@pytest.fixture(scope="session")
def forcing():
    return io.load_forcing(builtin_path("forcing_7day"))


@pytest.fixture(scope="session")
def measurements():
    return io.load_measurements(builtin_path("measurements_7day"))


@pytest.fixture(scope="session")
def truth():
    return json.loads(builtin_path("measurements_7day_truth").read_text())


@pytest.fixture(scope="session")
def study_chain(forcing, geometry, measurements):
    """One real calibration of the shipped fixture, shared across tests."""
    _, z = measurements
    model = PosteriorModel(z, forcing, geometry)
    chain = mcmc.run_chain(model, seed=0, **STUDY)
    return model, chain
