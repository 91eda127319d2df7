import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from oneres.germs import make_multipliers, make_normal_form, make_perturbed
from oneres.series import TruncatedSeriesMap

settings.register_profile("desk", deadline=None, max_examples=25,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("desk")


@pytest.fixture(scope="session")
def mult2():
    return make_multipliers(2)


@pytest.fixture(scope="session")
def nf2(mult2):
    return make_normal_form(mult2, 1)


@pytest.fixture(scope="session")
def nf2k2():
    return make_normal_form(make_multipliers(2, k=2), 2)


@pytest.fixture(scope="session")
def perturbed33(nf2):
    tail = TruncatedSeriesMap.from_terms(2, 6, [((3, 3), 0, 1e-2)])
    return make_perturbed(nf2, tail, 6)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


@pytest.fixture
def criterion():
    """record(number, title, checks) stores one summary line, then asserts every check."""
    def record(number, title, checks):
        ok = all(passed for _, passed in checks.values())
        detail = "; ".join(f"{name}={value}" for name, (value, _) in checks.items())
        ACCEPTANCE.append((number, ok, title, detail))
        failed = [name for name, (_, passed) in checks.items() if not passed]
        assert not failed, f"criterion {number} failed: {failed} ({detail})"
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, title, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}  [{detail}]")
