import pytest

from freqsim.measures import JumpMeasure
from freqsim.model import ModelParams


@pytest.fixture
def ref_params():
    # the model used by the acceptance suite: linear interactions, one atom
    # per measure, every dual rate provably nonnegative
    return ModelParams(
        c1=0.5,
        c2=0.25,
        eta1=0.3,
        eta2=0.1,
        b11=(0.0, 0.4),
        b12=(0.0, 0.2),
        b21=(0.0, 0.05),
        b22=(0.0, 0.1),
        mu1=JumpMeasure([(1.0, 0.0, 0.3)]),
        mu2=JumpMeasure([(0.0, 0.5, 0.2)]),
        nu=JumpMeasure([(0.2, 0.1, 0.5)]),
    )
