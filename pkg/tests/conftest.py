"""Shared fixtures: the worked 2-client example and random instances."""

import random
from fractions import Fraction

import pytest

from tdmcfg.colgen import Column
from tdmcfg.model import ClientRequirement, ProblemInstance


@pytest.fixture
def golden_instance() -> ProblemInstance:
    """Two clients on f=10: rates 0.5 / 0.3, both with latency bound 3."""
    return ProblemInstance(
        10,
        (
            ClientRequirement(1, "c1", Fraction(1, 2), Fraction(3)),
            ClientRequirement(2, "c2", Fraction(3, 10), Fraction(3)),
        ),
    )


@pytest.fixture
def golden_seed_columns() -> tuple[Column, Column]:
    """One feasible column per client to seed the restricted master."""
    return (
        Column(1, (0, 0, 1, 1, 0, 0, 0, 1, 1, 1)),
        Column(2, (1, 1, 0, 0, 0, 1, 1, 0, 0, 0)),
    )


def random_instance(rng: random.Random, max_clients: int = 3, max_frame: int = 12):
    """Small random instance; latencies are sometimes absent."""
    n = rng.randint(1, max_clients)
    f = rng.randint(4, max_frame)
    clients = []
    for i in range(1, n + 1):
        rate = Fraction(rng.randint(1, max(1, f // n)), f)
        latency = (
            None if rng.random() < 0.3 else Fraction(rng.randint(2, 2 * f), 2)
        )
        clients.append(ClientRequirement(i, f"c{i}", rate, latency))
    return ProblemInstance(f, tuple(clients))


def random_mask(rng: random.Random, frame_size: int, min_slots: int = 1):
    count = rng.randint(min_slots, frame_size)
    slots = rng.sample(range(frame_size), count)
    mask = [0] * frame_size
    for s in slots:
        mask[s] = 1
    return tuple(mask)
