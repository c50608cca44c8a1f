from __future__ import annotations

import pytest
from support import BATH

from polaron_sim.kernel import tabulate_kernel


@pytest.fixture(scope="session")
def bath():
    return tabulate_kernel(BATH)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: int(k)):
        terminalreporter.write_line(mod.RESULTS[key])
