import pytest

from arrayqfi import Deformation, EmitterArray


@pytest.fixture
def benchmark_array():
    return EmitterArray(4, 15.0, 0.3), Deformation(2.0)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in module.summary_lines():
        terminalreporter.write_line(line)
