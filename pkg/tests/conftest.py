import numpy as np
import pytest

from app.field import Field
from app.models import Grid, OperatorParams, SolverConfig


@pytest.fixture
def grid1d() -> Grid:
    return Grid(d=1, n=256, box_length=64.0)


@pytest.fixture
def mixed() -> OperatorParams:
    return OperatorParams(a=1.0, b=1.0, s=0.5)


@pytest.fixture
def fractional() -> OperatorParams:
    return OperatorParams(a=0.0, b=1.0, s=0.5)


@pytest.fixture
def gaussian(grid1d: Grid) -> Field:
    return Field.from_function(grid1d, lambda x: np.exp(-(x**2) / 2.0))


@pytest.fixture
def solver_cfg() -> SolverConfig:
    return SolverConfig()


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


MINIMAL_SIMULATE = """\
# minimal simulate config
[grid]
d = 1
n = 1024
box_length = 200

[operator]
a = 1
b = 1
s = 0.5

[problem]
p = 2

[initial_data]
family = gaussian
amp = 0.1
width = 5

[forcing]
family = none

[solver]
t_end = 100
"""


@pytest.fixture
def minimal_config_text() -> str:
    return MINIMAL_SIMULATE
