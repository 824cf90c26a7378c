import numpy as np
import pytest

from oracles import TABLE6, table6_peaks
from sgdecomp import DecompositionModel, DemandProfile, PeakComponent, sample_model


def table6_model(day: str) -> DecompositionModel:
    return DecompositionModel(
        TABLE6[day][1], tuple(PeakComponent(*p) for p in table6_peaks(day))
    )


@pytest.fixture
def sunday_model():
    return table6_model("Sunday")


@pytest.fixture
def sunday_profile(sunday_model):
    return DemandProfile(sample_model(sunday_model), label="sunday")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


def record_acceptance(number: int, title: str, passed: bool, detail: str, seconds: float, limit=None):
    timing = f"{seconds:.2f} s" if limit is None else f"{seconds:.2f} s (limit {limit:g} s)"
    status = "PASS" if passed else "FAIL"
    ACCEPTANCE_LINES.append(f"criterion {number:>2} {status}  {title}: {detail}; {timing}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
