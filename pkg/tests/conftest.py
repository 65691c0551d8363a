import pytest
from hypothesis import HealthCheck, settings

from logpeer.simnet import Network, load_scenario

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def e1_net():
    return Network(load_scenario("e1")).run()


@pytest.fixture(scope="session")
def e2_net():
    return Network(load_scenario("e2")).run()


_ACCEPTANCE: list[str] = []


@pytest.fixture
def report():
    """``report(n, ok, detail)`` records one PASS/FAIL line for criterion n."""
    def _report(n, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok
    return _report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
