import json
from pathlib import Path

import pytest

from toeplab.dyadic import build_forest
from toeplab.verify import Lab


@pytest.fixture(scope="session")
def oracle():
    return json.loads((Path(__file__).parent / "oracle" / "values.json").read_text())


@pytest.fixture(scope="session")
def forest():
    return build_forest()


@pytest.fixture(scope="session")
def lab():
    return Lab.build()


@pytest.fixture(scope="session")
def grid(lab):
    return lab.grid


@pytest.fixture(scope="session")
def index(lab):
    return lab.index


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
