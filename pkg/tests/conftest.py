import warnings

import pytest

from rpbcap.config import load_scenario, shipped_scenario_path
from rpbcap.economics import EconomicParams
from rpbcap.flowsheet import FlowsheetEvaluator
from rpbcap.properties import PropertyPackage
from rpbcap.streams import StreamState
from rpbcap.transfer import PackingSpec

warnings.filterwarnings("ignore", category=DeprecationWarning)


@pytest.fixture(scope="session")
def package():
    return PropertyPackage()


@pytest.fixture(scope="session")
def wire_mesh():
    return PackingSpec(803.0, 0.96)


@pytest.fixture(scope="session")
def flue_gas():
    n = 5.94 / 0.029737173
    return StreamState.vapor(
        {"co2": 0.145 * n, "h2o": 0.068 * n, "n2": 0.766 * n, "o2": 0.021 * n},
        313.15, 1.1e5,
    )


@pytest.fixture(scope="session")
def econ():
    return EconomicParams()


def _load(name):
    return load_scenario(str(shipped_scenario_path(name)))


@pytest.fixture(scope="session")
def loaded_30wt():
    return _load("rpb_30wt")


@pytest.fixture(scope="session")
def loaded_50wt():
    return _load("rpb_50wt")


@pytest.fixture(scope="session")
def loaded_70wt():
    return _load("rpb_70wt")


@pytest.fixture(scope="session")
def loaded_pb():
    return _load("pb_30wt")


@pytest.fixture(scope="session")
def solution_30wt(loaded_30wt):
    """Converged loop at the shipped 30 wt% operating point (shared)."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return FlowsheetEvaluator(loaded_30wt.scenario).solve()


@pytest.fixture(scope="session")
def solution_pb(loaded_pb):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return FlowsheetEvaluator(loaded_pb.scenario).solve()
