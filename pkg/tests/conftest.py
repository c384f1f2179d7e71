import numpy as np
import pytest

from momimpute.datagen import IncompleteDataset
from momimpute.randcore import RngStream


@pytest.fixture
def stream():
    return RngStream(12345)


@pytest.fixture
def small_dataset():
    """Five units with intercept + slope; first three respond."""
    x = np.column_stack([np.ones(5), [0.5, 1.0, 2.0, 3.0, 4.0]])
    y = np.array([1.1, 1.9, 4.2, np.nan, np.nan])
    return IncompleteDataset.from_arrays(x, y, [1, 1, 1, 0, 0])


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in LINES:
            terminalreporter.write_line(line)
