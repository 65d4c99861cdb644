import numpy as np
import pytest

from mis_mimo.model import ChannelSet, SimConfig, complex_normal, generate_channels


def random_channels(rng, N=4, K=9, B=1, R=2, scale=1.0):
    """Unstructured CN(0, scale) channels for algebraic checks."""
    M = B + R
    return ChannelSet(
        H_bs=scale * complex_normal(rng, (K, N)),
        H_bu=scale * complex_normal(rng, (N, M)),
        H_su=scale * complex_normal(rng, (K, M)),
        B=B, R=R,
    )


def desk_channels(seed, **overrides):
    cfg = SimConfig(**overrides)
    ch, real = generate_channels(cfg, np.random.default_rng(seed))
    return cfg, ch, real


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
