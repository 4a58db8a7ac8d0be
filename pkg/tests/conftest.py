import numpy as np
import pytest

from causalfock.grids import Species, SpinMomentumGrid, line_momenta


@pytest.fixture
def scalar_grid():
    sp = Species("phi", "bose", 1.0, (0,),
                 line_momenta([0.3, 0.9, 1.4]), [0.5, 2.0, 1.1])
    return SpinMomentumGrid((sp,))


@pytest.fixture
def fermi_grid():
    sp = Species("psi", "fermi", 1.0, (1, 2),
                 line_momenta([0.2, 0.8]), [0.7, 1.3])
    return SpinMomentumGrid((sp,))


@pytest.fixture
def mixed_grid():
    phi = Species("phi", "bose", 1.0, (0,),
                  line_momenta([0.3, 0.9, 1.4]), [0.5, 2.0, 1.1])
    psi = Species("psi", "fermi", 1.0, (1, 2),
                  line_momenta([0.2, 0.8]), [0.7, 1.3])
    return SpinMomentumGrid((phi, psi))


@pytest.fixture
def qed_grid():
    dirac = Species("dirac", "fermi", 1.0, (1, 2, 3, 4),
                    line_momenta([0.25, 0.85]), [0.8, 1.2])
    em = Species("em", "bose", 0.0, (0, 1, 2, 3),
                 line_momenta([0.35, 0.95]), [0.9, 1.4],
                 dispersion="eps", epsilon=0.5)
    return SpinMomentumGrid((dirac, em))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
