"""Named random sub-streams derived from a single run seed.

Every stochastic component (data generation, weight init, batch shuffling,
probe draws, posterior sampling) pulls from its own named stream so that
adding draws to one component never perturbs another.
"""

import numpy as np

from .errors import InvalidInputError


def _seed_sequence(seed: int, name: str) -> np.random.SeedSequence:
    if not isinstance(seed, int) or seed < 0:
        raise InvalidInputError(f"seed must be a nonnegative integer, got {seed!r}")
    if not name:
        raise InvalidInputError("stream name must be a nonempty string")
    # entropy = run seed followed by the stream name bytes; order matters
    return np.random.SeedSequence([seed, *name.encode("utf-8")])


def derive_rng(seed: int, name: str) -> np.random.Generator:
    """Generator for the sub-stream `name` of run seed `seed`."""
    return np.random.default_rng(_seed_sequence(seed, name))


def derive_seed(seed: int, name: str) -> int:
    """Integer child seed (u64) for components that take a seed field."""
    lo, hi = _seed_sequence(seed, name).generate_state(2)
    return int(lo) | (int(hi) << 32)
