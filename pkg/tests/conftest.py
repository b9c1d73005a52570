import numpy as np
import pytest

from pwstega.fixtures import synthetic_image
from pwstega.pipeline import StegoConfig


@pytest.fixture
def toy_cfg():
    return StegoConfig.toy()


@pytest.fixture
def image():
    return synthetic_image(0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# acceptance bookkeeping: criterion -> list of (case, passed, detail)
_ACCEPTANCE: dict[str, list] = {}


@pytest.fixture
def acceptance():
    def record(criterion: str, case: str, passed: bool, detail: str = ""):
        _ACCEPTANCE.setdefault(criterion, []).append((case, bool(passed), detail))
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for criterion in sorted(_ACCEPTANCE, key=lambda c: int(c.split()[0])):
        cases = _ACCEPTANCE[criterion]
        failed = [c for c in cases if not c[1]]
        status = "FAIL" if failed else "PASS"
        if len(cases) == 1:
            detail = cases[0][2]
        elif failed:
            detail = f"{len(cases) - len(failed)}/{len(cases)} cases; failing: " + ", ".join(f"{c[0]} ({c[2]})" for c in failed)
        else:
            detail = f"{len(cases)}/{len(cases)} cases"
        terminalreporter.write_line(f"{status}  {criterion}: {detail}")
