import numpy as np
import pytest

from wavesim.elements import STEEL, SectionProps


@pytest.fixture
def steel():
    return STEEL


@pytest.fixture
def section():
    return SectionProps(0.02, 0.02)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance check and print it."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def report(tag: str, ok: bool, detail: str) -> bool:
        line = f"{tag}: {'PASS' if ok else 'FAIL'} ({detail})"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
