import warnings

import pytest

from mvset import make_grid
from mvset.scenarios import make_laplacian

# the 9-point scenarios legitimately warn about losing the M-matrix property
warnings.filterwarnings("ignore", message="stencil is not an M-matrix")


@pytest.fixture(scope="session")
def grid65():
    return make_grid(-1.0, 1.0, 65)


@pytest.fixture(scope="session")
def lap65(grid65):
    return make_laplacian(grid65)


@pytest.fixture(scope="session")
def grid129():
    return make_grid(-1.0, 1.0, 129)


@pytest.fixture(scope="session")
def lap129(grid129):
    return make_laplacian(grid129)
