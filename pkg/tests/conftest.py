import warnings
from pathlib import Path

import pytest

from recoilspec.config import load_config
from recoilspec.errors import PhysicsWarning

DATA = Path(__file__).resolve().parents[1] / "src" / "recoilspec" / "data"

_ACCEPTANCE = {}


def record_acceptance(number: int, title: str, passed: bool, detail: str) -> None:
    _ACCEPTANCE[number] = (title, bool(passed), detail)


@pytest.fixture
def acceptance():
    return record_acceptance


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        title, ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n:2d}. {title}: {detail}")


def _load(name):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", PhysicsWarning)
        return load_config(DATA / name)


@pytest.fixture(scope="session")
def kdtli():
    return _load("h2tpp_kdtli.yaml")


@pytest.fixture(scope="session")
def kdtli_fluo():
    return _load("h2tpp_kdtli_fluorescence.yaml")


@pytest.fixture(scope="session")
def tli():
    return _load("h2tpp_tli.yaml")


@pytest.fixture(scope="session")
def tli_spread():
    return _load("h2tpp_tli_spread.yaml")


@pytest.fixture(scope="session")
def data_dir():
    return DATA
