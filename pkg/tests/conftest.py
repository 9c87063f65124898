from dataclasses import replace

import pytest

from sbmwalks import BlockModelConfig, is_connected, sample


def connected_sample(config: BlockModelConfig, max_attempts: int = 50):
    """Sample the config, bumping the seed until the realization is connected."""
    for bump in range(max_attempts):
        g = sample(replace(config, seed=config.seed + bump))
        if is_connected(g):
            return g
    raise AssertionError(f"no connected sample for {config} within {max_attempts} attempts")


@pytest.fixture
def small_config():
    return BlockModelConfig(n=100, m=2, p=(0.5, 0.3), q=0.1, seed=7)
