import numpy as np
import pytest

from thfortin.mesh import freudenthal_cube, octahedron_basic


@pytest.fixture(scope="session")
def square2():
    return freudenthal_cube(2, 2)


@pytest.fixture(scope="session")
def square3():
    return freudenthal_cube(2, 3)


@pytest.fixture(scope="session")
def cube2():
    return freudenthal_cube(3, 2)


@pytest.fixture(scope="session")
def octa():
    return octahedron_basic()


@pytest.fixture(params=["square2", "cube2", "octa"])
def small_mesh(request):
    return request.getfixturevalue(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(20241015)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS):
            terminalreporter.write_line(line)
