import pytest

from pidesign import default_model, load_builtin
from pidesign.geometry import region_for


@pytest.fixture(scope="session")
def pump_region():
    return region_for(default_model(load_builtin("pump_design")))


@pytest.fixture(scope="session")
def mars_region():
    return region_for(default_model(load_builtin("mars")))


@pytest.fixture(scope="session")
def hx_region():
    return region_for(default_model(load_builtin("heat_exchanger")))
