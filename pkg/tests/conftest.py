import pytest

from rrsim.cli import bundled_scenario_path
from rrsim.scenario import load_scenario


@pytest.fixture(scope="session")
def indoor_scenario():
    return load_scenario(bundled_scenario_path("indoor_ris_demo.json"))


@pytest.fixture(scope="session")
def two_ue_scenario():
    return load_scenario(bundled_scenario_path("two_ue_demo.json"))


@pytest.fixture(scope="session")
def earthquake_scenario():
    return load_scenario(bundled_scenario_path("earthquake_demo.json"))
