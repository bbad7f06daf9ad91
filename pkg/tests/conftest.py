from __future__ import annotations

import pytest

import helpers
from censornet.prober import FingerprintSet
from censornet.simnet import Simulation


@pytest.fixture(scope="session")
def data_dir():
    return helpers.DATA_DIR


@pytest.fixture(scope="session")
def curated_records():
    return helpers.load_curated_records()


@pytest.fixture(scope="session")
def census_config(curated_records):
    return helpers.build_census_config(curated_records)


@pytest.fixture()
def census_sim(census_config):
    return Simulation(census_config)


@pytest.fixture()
def two_path_sim():
    return Simulation(helpers.two_path_config())


@pytest.fixture(scope="session")
def block_fingerprints():
    return FingerprintSet(patterns=("Web Page Blocked!",))
