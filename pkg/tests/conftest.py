import random

import pytest

from hesearch import paillier as P
from hesearch.envelope import SymKey
from hesearch.harness import pinned_keypair
from hesearch.protocols import Client


@pytest.fixture(scope="session")
def tiny_key():
    """The (p, q) = (5, 7) key: n = 35, g = 36."""
    return P.keygen(primes=(5, 7))


@pytest.fixture(scope="session")
def key256():
    return pinned_keypair(256)


@pytest.fixture(scope="session")
def key1024():
    return pinned_keypair(1024)


@pytest.fixture
def rng():
    return random.Random(20141)


@pytest.fixture
def client256(key256):
    pk, sk = key256
    r = random.Random(7)
    return Client(pk, sk, SymKey.generate(r), scale=10_000, rng=r)


# -- acceptance summary -------------------------------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number = getattr(report, "criterion", None)
    if number is None:
        return
    _CRITERIA.setdefault(number, []).append((report.nodeid.split("::")[-1], report.outcome))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        outcome.get_result().criterion = marker.args[0]


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        for name, outcome in _CRITERIA[number]:
            verdict = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"criterion {number}: {verdict}  {name}")
