import numpy as np
import pytest

from src.haar.wt_layer import LayerParams

# Quantum and classical coefficients of the reference 4x4 patch
PUBLISHED_Q = np.array([
    [0.85032347, 0.17578396, 0.07245688, 0.06442049],
    [0.20012496, 0.15016657, 0.11704700, 0.10099505],
    [0.13802174, 0.07245688, 0.05196152, 0.10977249],
    [0.20964255, 0.17306068, 0.18384776, 0.05830952],
])
PUBLISHED_C = np.array([
    [0.91442991, 0.12204016, -0.02350484, -0.02118513],
    [0.04917920, -0.15077581, -0.08658321, -0.09108147],
    [0.00180456, 0.05328093, 0.01119008, 0.10257259],
    [0.14389606, -0.18540747, 0.18784657, 0.05587149],
])
PUBLISHED_MSE = 0.02304535

SQ2 = np.sqrt(2.0)
H4_LITERAL = 0.5 * np.array([
    [1.0, 1.0, 1.0, 1.0],
    [1.0, 1.0, -1.0, -1.0],
    [SQ2, -SQ2, 0.0, 0.0],
    [0.0, 0.0, SQ2, -SQ2],
])


@pytest.fixture
def rng():
    """
    Fixture giving every test its own seeded generator.
    """
    return np.random.default_rng(1234)


@pytest.fixture
def patch(rng):
    """
    Fixture with a random non-negative 4x4 patch, like a normalized image tile.
    """
    return rng.uniform(0.0, 1.0, size=(4, 4))


@pytest.fixture
def identity_params():
    """
    Fixture with a single-path, two-channel layer that should pass its input through:
    unit scaling, identity mixing and hard-zero thresholds.
    """
    return LayerParams(A=np.ones((1, 4, 8)),
                       V=np.eye(2)[np.newaxis],
                       T_raw=np.zeros((1, 4, 8)),
                       threshold_mode='zero')


@pytest.fixture
def csv_patch(tmp_path, patch):
    """
    Fixture writing the random patch to a CSV file and returning its path.
    """
    path = tmp_path / "patch.csv"
    np.savetxt(path, patch, delimiter=',', fmt='%.17g')
    return path
