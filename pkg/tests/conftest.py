import pytest

from dftws import codec
from dftws.protocol import Registry
from dftws.vectors import EXAMPLE_SOLUTION_HASH, fixture_keypairs

_criteria: list[tuple[str, str]] = []


@pytest.fixture(scope="session")
def keypairs() -> list[codec.KeyPair]:
    return fixture_keypairs()


@pytest.fixture(scope="session")
def registry(keypairs) -> Registry:
    reg = Registry()
    for kp in keypairs:
        reg.register(kp)
    return reg


@pytest.fixture
def solution_hash() -> str:
    return EXAMPLE_SOLUTION_HASH


def pytest_runtest_logreport(report):
    if report.when != "call":
        return
    for name, value in report.user_properties:
        if name == "criterion":
            _criteria.append((value, "PASS" if report.passed else "FAIL"))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _criteria:
        terminalreporter.write_line(f"{outcome}  {name}")
