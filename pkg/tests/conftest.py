import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hardy_nls.ground_state import shoot  # noqa: E402
from hardy_nls.params import ModelParams  # noqa: E402

# acceptance lines collected while the suite runs, printed in the terminal summary
ACCEPTANCE_LINES = []


@functools.lru_cache(maxsize=None)
def ground_state(d, p, c=None):
    return shoot(ModelParams(d, p, c))


@pytest.fixture(scope="session")
def gs_cache():
    return ground_state


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
