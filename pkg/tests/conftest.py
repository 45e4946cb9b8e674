"""Shared fixtures; helpers live in simhelpers.py."""

from __future__ import annotations

import pytest

from slicesim.link_capacity import bundled_acm_table
from slicesim.slicing import default_catalog

import simhelpers


def pytest_terminal_summary(terminalreporter):
    if simhelpers.ACCEPTANCE_LINES:
        terminalreporter.section("acceptance checklist")
        for line in simhelpers.ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def af60():
    return bundled_acm_table("af60")


@pytest.fixture(scope="session")
def wave():
    return bundled_acm_table("wave")


@pytest.fixture(scope="session")
def catalog():
    return default_catalog(kappa=0.2)
