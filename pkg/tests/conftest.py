import json

import numpy as np
import pytest

from rwtail.geometry import analyze_geometry
from rwtail.network import network_to_dict
from rwtail.testing import e1_model, e1_network


@pytest.fixture(scope="session")
def e1():
    return e1_model()


@pytest.fixture(scope="session")
def e1_net():
    return e1_network()


@pytest.fixture(scope="session")
def e1_geo(e1):
    return analyze_geometry(*e1.mgfs())


@pytest.fixture(scope="session")
def e1_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "e1_network.json"
    path.write_text(json.dumps(network_to_dict(e1_network())))
    return str(path)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
