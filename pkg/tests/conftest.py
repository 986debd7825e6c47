import pytest

from rase.config import get_settings
from rase.models.physics import GridSpec, PhysicalParams
from rase.services.grid_service import build_grid


@pytest.fixture(autouse=True)
def fresh_settings():
    """每个测试前后清空配置缓存，环境变量改动互不影响"""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def params():
    return PhysicalParams(alpha=1.0, length=1.0)


@pytest.fixture
def small_spec():
    return GridSpec(n_t=8, detuning_width=400.0, n_delta=50, n_z=16)


@pytest.fixture
def small_grid(params, small_spec):
    return build_grid(params, small_spec, -1.0, 1.0)
