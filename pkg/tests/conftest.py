import numpy as np
import pytest

from plm.dist import WeightDistribution
from plm.model import ModelSpec, PlantedInstance

# llr(w) = w − log 2 for P = Exp(1), Q = Exp(2); weights below realise chosen llr values
P_LIN, Q_LIN = WeightDistribution.exponential(1.0), WeightDistribution.exponential(2.0)


def instance_from_llr(llr_matrix, planted=None) -> PlantedInstance:
    """Instance whose present pairs carry exactly the given llr values; NaN marks an absent pair."""
    m = np.asarray(llr_matrix, float)
    n = m.shape[0]
    r, c = np.nonzero(~np.isnan(m))
    w = m[r, c] + np.log(2.0)
    planted = np.arange(n) if planted is None else np.asarray(planted)
    return PlantedInstance(n, float(n), r, c, w, planted, ModelSpec("sparse", P_LIN, Q_LIN), 0)


@pytest.fixture
def llr_instance():
    return instance_from_llr
