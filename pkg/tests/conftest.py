import numpy as np
import pytest

from crosscut import cutting, oracles, sim
from crosscut.rng import substream


@pytest.fixture(scope="session")
def ghz5_plan():
    return cutting.ghz_cut_plan(5)


def random_pair_plans(seed: int, n: int, bounds):
    """Two independent random staircase circuits on the same cut layout."""
    stream = substream(seed, "pair", n, tuple(bounds))
    plan_p = oracles.random_chain_plan(stream, n, bounds)
    plan_q = oracles.random_chain_plan(stream, n, bounds)
    return plan_p, plan_q


def output_overlap(plan_p, plan_q) -> float:
    return sim.overlap_trace(oracles.plan_output_state(plan_p), oracles.plan_output_state(plan_q))
