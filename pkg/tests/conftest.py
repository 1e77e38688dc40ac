import numpy as np
import pytest

from scnet import params as P
from scnet.numerics import Tensor, make_rng


def random_tree(spec_tree, seed=0, scale=0.5):
    """Dense random values for every parameter (biases and norms included)."""
    rng = make_rng(seed)
    flat = {name: Tensor(scale * rng.standard_normal(spec.shape), requires_grad=True)
            for name, spec in sorted(P.flatten(spec_tree).items())}
    return P.unflatten(flat)


def zero_tree(spec_tree):
    """Every weight and bias zero, norm gains one."""
    flat = {}
    for name, spec in P.flatten(spec_tree).items():
        fill = 1.0 if spec.init == "ones" else 0.0
        flat[name] = Tensor(np.full(spec.shape, fill))
    return P.unflatten(flat)


@pytest.fixture
def rng():
    return make_rng(1234)
