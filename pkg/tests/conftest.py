import random

import pytest

from xlsearch import pctd
from xlsearch.harness.deployment import run_deployment
from xlsearch.lexicon import bundled_fixture
from xlsearch.mpc import in_process_pair
from xlsearch.mpc.parties import Transcript

from helpers import ACCEPTANCE_LINES, make_keys


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def keys64():
    return make_keys(64, 2024)


@pytest.fixture(scope="session")
def keys256():
    return make_keys(256, 7)


@pytest.fixture(scope="session")
def toy():
    params, strong = pctd.keygen(2, primes=(3, 5), a=2)
    return params, strong


@pytest.fixture(scope="session")
def lexicon():
    return bundled_fixture()


@pytest.fixture
def rng():
    return random.Random(1234)


@pytest.fixture
def pair(keys64):
    cp, csp = in_process_pair(keys64.params, keys64.shares, rng=random.Random(99), transcript=Transcript(), record_views=True)
    return cp, csp


@pytest.fixture
def deployment(keys64):
    with run_deployment(keys64, "in-process", unsafe=True, transcript=Transcript()) as dep:
        yield dep
