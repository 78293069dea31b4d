import pytest

from glocal.control import design_glocal
from glocal.decomposition import decompose, robust_decompose
from glocal.network import benchmark_network, clustered_system



def pytest_configure(config):
    config._acceptance = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance", [])
    if not lines:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line[1])


@pytest.fixture
def report(request):
    """Record one PASS/FAIL line for an acceptance criterion."""

    def _report(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        request.config._acceptance.append((number, line))
        print(line)
        return ok

    return _report


@pytest.fixture(scope="session")
def bench1():
    return benchmark_network(1)


@pytest.fixture(scope="session")
def csys1(bench1):
    net, cs = bench1
    return clustered_system(net, cs)


@pytest.fixture(scope="session")
def hd1(csys1):
    return decompose(csys1)


@pytest.fixture(scope="session")
def design1(csys1, hd1):
    return design_glocal(csys1, hd1)


@pytest.fixture(scope="session")
def perturbed():
    net, cs = benchmark_network(1, perturb=0.2, seed=0)
    csys = clustered_system(net, cs, strict=False)
    return net, csys, robust_decompose(csys)
