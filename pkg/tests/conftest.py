import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from coprimedoa.geometry import build_coprime
from coprimedoa.simulate import SourceScene

VI_SINES = np.array([
    -0.8876, -0.7624, -0.6326, -0.5096, -0.3818, -0.2552, -0.1324,
    -0.0046, 0.1206, 0.2414, 0.3692, 0.4972, 0.6208, 0.7454, 0.8704,
])


@pytest.fixture(scope="session")
def geom35():
    return build_coprime(3, 5, 0.5)


@pytest.fixture(scope="session")
def scene15_snr10():
    """The 15-source benchmark scene at -10 dB (unit powers, noise 10)."""
    return SourceScene(doas=tuple(VI_SINES), powers=(1.0,) * 15,
                       noise_power=10.0)


@pytest.fixture(scope="session")
def scene15_clean():
    """Same scene with unit noise power, used with exact covariances."""
    return SourceScene(doas=tuple(VI_SINES), powers=(1.0,) * 15,
                       noise_power=1.0)
