from __future__ import annotations

import math
from pathlib import Path

import pytest
from hypothesis import settings

from ccdim import load_system

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

settings.register_profile("ccdim", deadline=None, derandomize=True)
settings.load_profile("ccdim")

CANTOR_DIM = math.log(2) / math.log(3)
HALFQUARTER_DIM = math.log((1 + math.sqrt(5)) / 2) / math.log(2)
PERIOD2_DIM = 2 * math.log(2) / math.log(12)


def config(name: str) -> Path:
    return CONFIGS / f"{name}.json"


@pytest.fixture(scope="session")
def cantor():
    return load_system(config("cantor"))


@pytest.fixture(scope="session")
def halfquarter():
    return load_system(config("halfquarter"))


@pytest.fixture(scope="session")
def period2():
    return load_system(config("period2"))


@pytest.fixture(scope="session")
def perturbed():
    return load_system(config("perturbed"))


@pytest.fixture(scope="session")
def logistic():
    return load_system(config("logistic"))


@pytest.fixture(scope="session")
def systems(cantor, halfquarter, period2, perturbed, logistic):
    return {"cantor": cantor, "halfquarter": halfquarter, "period2": period2,
            "perturbed": perturbed, "logistic": logistic}


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
