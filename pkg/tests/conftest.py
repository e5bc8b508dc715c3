import numpy as np
import pytest


def pytest_runtest_logreport(report):
    # One visible PASS/FAIL line per acceptance criterion.
    if report.when != "call" or "test_acceptance" not in report.nodeid:
        return
    status = "PASS" if report.passed else "FAIL"
    name = report.nodeid.split("::")[-1]
    print(f"\n[ACCEPTANCE {status}] {name}")


@pytest.fixture
def rng():
    return np.random.default_rng(20240801)
