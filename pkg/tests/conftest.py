import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from bril.demo_store import Demonstration, DemoSet, Schema  # noqa: E402


def make_demo(i, n_pairs=3, state_dim=4, action_count=3, counts=(1, 2, 0), outcome="win", meta=None, seed=0):
    rng = np.random.default_rng([seed, i])
    pairs = [(rng.normal(size=state_dim), int(rng.integers(action_count))) for _ in range(n_pairs)]
    return Demonstration(f"d{i:03d}", pairs, tuple(counts), outcome, dict(meta or {}))


@pytest.fixture
def small_demoset():
    schema = Schema(4, 3, ("a", "b", "c"))
    demos = [make_demo(i, counts=(i, 1, 0)) for i in range(10)]
    return DemoSet(demos, schema)
