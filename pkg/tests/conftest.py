"""Shared generators for randomized property tests (all explicitly seeded)."""

from __future__ import annotations

import numpy as np
import pytest

from aircell import air_schedule, retrieval


def random_retrieval_instance(
    rng: np.random.Generator,
    n_desired: int,
    max_channels: int = 4,
    max_cycle: int = 12,
):
    """A random bare (no-index) program plus a desired set and start slot."""
    channels = int(rng.integers(1, max_channels + 1))
    min_cycle = max(2, (n_desired + channels - 1) // channels)
    cycle = int(rng.integers(min_cycle, max_cycle + 1))
    n_objects = channels * cycle
    names = [f"o{i:02d}" for i in range(n_objects)]
    program = air_schedule.build_program(names, channels, air_schedule.NONE)
    desired = frozenset(
        names[int(i)] for i in rng.choice(n_objects, size=n_desired, replace=False)
    )
    start = int(rng.integers(0, 3 * cycle))
    return retrieval.RetrievalRequest(desired, program, start)


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
