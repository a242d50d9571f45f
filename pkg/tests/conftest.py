from __future__ import annotations

from pathlib import Path

import pytest

from attnsim.transcript_io import parse

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def load_fixture(name: str):
    return parse(fixture_path(name).read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def dialogue_a():
    return load_fixture("dialogue_a.dlg")


@pytest.fixture(scope="session")
def dialogue_b():
    return load_fixture("dialogue_b.dlg")


@pytest.fixture(scope="session")
def dialogue_c():
    return load_fixture("dialogue_c.dlg")


@pytest.fixture(scope="session")
def return_pops():
    return load_fixture("return_pops.dlg")
