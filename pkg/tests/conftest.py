import numpy as np
import pytest

from logsae.model import AreaObservation


def make_areas(z, w, psi, sigma=None):
    """Wrap parallel arrays into AreaObservation rows."""
    z = np.asarray(z, float)
    w = np.asarray(w, float)
    psi = np.asarray(psi, float)
    m, p = w.shape
    if sigma is None:
        sigma = np.zeros((m, p, p))
    return [
        AreaObservation(
            area_id=f"a{i}", z=z[i], w=w[i], psi=psi[i], sigma_me=sigma[i]
        )
        for i in range(m)
    ]


def random_dataset(gen, m, p, with_sigma=True):
    """A well-conditioned random dataset: (z, w, psi, sigma) arrays."""
    w = gen.normal(2.0, 1.0, size=(m, p))
    beta = gen.normal(1.0, 0.5, size=p)
    psi = gen.gamma(2.0, 0.5, size=m)
    z = w @ beta + gen.normal(0.0, 1.0, size=m) + np.sqrt(psi) * gen.standard_normal(m)
    sigma = np.zeros((m, p, p))
    if with_sigma:
        for i in gen.choice(m, size=m // 2, replace=False):
            root = gen.normal(0.0, 0.4, size=(p, p))
            sigma[i] = root @ root.T
    return z, w, psi, sigma


@pytest.fixture
def gen():
    return np.random.default_rng(20260816)
