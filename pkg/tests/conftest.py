import pytest

from varigeo.excalc import Chart

TQV = [("t", "time"), ("q", "position"), ("v", "velocity")]
TQVS = TQV + [("s", "action")]


@pytest.fixture
def tqv():
    return Chart.build(TQV)


@pytest.fixture
def tqvs():
    return Chart.build(TQVS, parameters=["g"])


@pytest.fixture
def qvs():
    return Chart.build([("q", "position"), ("v", "velocity"), ("s", "action")])


@pytest.fixture
def cocontact():
    return Chart.build([("t", "time"), ("q", "position"), ("p", "momentum"), ("s", "action")],
                       functions={"H": ("t", "q", "p", "s")})


@pytest.fixture
def two_dof():
    return Chart.build([("t", "time"), ("qa", "position"), ("qb", "position"),
                        ("va", "velocity"), ("vb", "velocity"), ("s", "action")])
