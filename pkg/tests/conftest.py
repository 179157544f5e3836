import pytest
from hypothesis import HealthCheck, settings

from lib import env_loader
from lib.atlas import Chart, ChartedMap

# fresh_env resets settings only, examples may share it
settings.register_profile("bcalc", deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])
settings.load_profile("bcalc")


@pytest.fixture(autouse=True)
def fresh_env():
    """Undo CLI overrides between tests"""
    env_loader.reload()
    yield
    env_loader.reload()


@pytest.fixture
def quadrant_chart() -> Chart:
    return Chart("Q", ("x", "y"), 2, ((0, 1), (0, 1)))


@pytest.fixture
def half_line_chart() -> Chart:
    return Chart("H", ("x",), 1, ((0, 1),))


@pytest.fixture
def product_map(quadrant_chart, half_line_chart) -> ChartedMap:
    return ChartedMap.from_texts(quadrant_chart, half_line_chart, ["(* x y)"], id="product")


@pytest.fixture
def projection_map(quadrant_chart, half_line_chart) -> ChartedMap:
    return ChartedMap.from_texts(quadrant_chart, half_line_chart, ["x"], id="projection")


@pytest.fixture
def square_map(half_line_chart) -> ChartedMap:
    return ChartedMap.from_texts(half_line_chart, half_line_chart, ["(pow x 2)"], id="square")
