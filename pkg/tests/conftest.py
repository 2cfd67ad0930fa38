import pytest

from hpccarbon.catalog import load_catalog, load_factors
from hpccarbon.cli import REFERENCE
from hpccarbon.ingest import apply_overlay, parse_fleet, parse_overlay


@pytest.fixture(scope="session")
def shipped_factors():
    return load_factors()


@pytest.fixture(scope="session")
def shipped_catalog():
    return load_catalog()


@pytest.fixture(scope="session")
def reference_fleet():
    return parse_fleet(REFERENCE["fleet"])


@pytest.fixture(scope="session")
def reference_public(reference_fleet):
    return apply_overlay(reference_fleet, parse_overlay(REFERENCE["overlay"]))


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
