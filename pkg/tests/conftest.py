import numpy as np
import pytest

from roughgg.domain import preset_set


@pytest.fixture(scope="session")
def slit_square_32():
    return preset_set("slit-square", 1.0 / 32.0, margin_cells=4)


@pytest.fixture(scope="session")
def slit_square_64():
    return preset_set("slit-square", 1.0 / 64.0, margin_cells=4)


@pytest.fixture(scope="session")
def disk_64():
    return preset_set("disk", 1.0 / 64.0, margin_cells=4)


@pytest.fixture(scope="session")
def square_32():
    return preset_set("square", 1.0 / 32.0, margin_cells=4)


def cell_centers(set_):
    return np.stack(np.broadcast_arrays(*set_.grid.cell_center_mesh()), axis=-1)
