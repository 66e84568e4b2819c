import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("affroll", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("affroll")

# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    def record(number, title, passed, detail):
        line = f"ACCEPTANCE {number} {'PASS' if passed else 'FAIL'} {title}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
