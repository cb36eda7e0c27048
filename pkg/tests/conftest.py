import numpy as np
import pytest

from fraclop.tensor_formats import CanonicalTensor


def random_canonical(rng, shape, rank, decay=None):
    """Random canonical tensor; ``decay`` gives weights ``decay**k``."""
    factors = [rng.standard_normal((n, rank)) for n in shape]
    weights = decay ** np.arange(rank) if decay is not None else rng.standard_normal(rank)
    return CanonicalTensor.from_factors(factors, weights)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
