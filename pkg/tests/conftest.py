import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from morsedeco.morse import MorseModel  # noqa: E402


@pytest.fixture(scope="session")
def model():
    return MorseModel.build()


@pytest.fixture(scope="session")
def small_model(model):
    return model.truncated(12)


def pytest_terminal_summary(terminalreporter):
    acc = sys.modules.get("test_acceptance")
    if acc is None or not acc.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in acc.result_lines():
        terminalreporter.write_line(line)
