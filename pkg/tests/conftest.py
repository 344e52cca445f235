import numpy as np
import pytest

import acceptance_log


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not acceptance_log.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    key = lambda c: [int(p) if p.isdigit() else p for p in c.replace("b", ".b").split(".")]
    for cid in sorted(acceptance_log.RESULTS, key=key):
        terminalreporter.write_line(acceptance_log.RESULTS[cid])
