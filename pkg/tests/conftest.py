import pytest

from chanscale.synth import generate_profiles, reference_spec
from chanscale.types import FlowCase, WallNormalGrid

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def record_acceptance():
    def record(number: int, passed: bool, detail: str):
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture
def case():
    return FlowCase(2000.0, 7.0)


@pytest.fixture
def grid():
    return WallNormalGrid.default_synthetic()


@pytest.fixture
def reference_profiles():
    spec = reference_spec()
    return spec, generate_profiles(spec, spec.centerline)
