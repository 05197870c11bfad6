from __future__ import annotations

import numpy as np
import pytest

from helpers import wishart_spectrum


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def spiked_spec():
    return wishart_spectrum(10, 40, 7)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number])
