import random

import pytest

from joinpolicy.model import SourcePair, illustrative_pair
from joinpolicy.verify import random_rational_pair


@pytest.fixture
def coin_pair() -> SourcePair:
    """Fair coin vs two-headed coin: the fully worked example."""
    return illustrative_pair()


@pytest.fixture
def uniform_pair() -> SourcePair:
    """Identical uniform sources: zero variance sum, degenerate gap."""
    return SourcePair.from_weights(["1/2", "1/2"], ["1/2", "1/2"])


@pytest.fixture
def pair_factory():
    """Seeded generator of random rational pairs with support <= 4."""
    def make(seed: int, count: int = 1):
        rnd = random.Random(seed)
        pairs = [random_rational_pair(rnd) for _ in range(count)]
        return pairs[0] if count == 1 else pairs
    return make
