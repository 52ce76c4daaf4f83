import numpy as np
import pytest

from sysacc.archspec import preset
from sysacc.nnir import build_resnet20, random_blob


@pytest.fixture(scope="session")
def resnet():
    g = build_resnet20(10)
    return g, random_blob(g, 0)


@pytest.fixture(scope="session")
def baseline():
    return preset("baseline")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_CRITERIA: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record the one-line verdict for an acceptance criterion."""

    def record(num: int, ok: bool | None, detail: str):
        verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        _CRITERIA[num] = f"criterion {num}: {verdict}  {detail}"
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[num])
