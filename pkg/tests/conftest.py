"""Shared test helpers: counter-based RNG streams and random parameter points."""

import numpy as np

from esn2 import DpParams

MASTER_SEED = 20260815


def philox(*key):
    """Independent Generator for a (seed, stream) key pair."""
    return np.random.Generator(
        np.random.Philox(key=np.array(key, dtype=np.uint64)))


def random_dp(rng, tau_span=2.0):
    """Random valid parameter point, moderate enough for every oracle."""
    om11, om22 = rng.uniform(0.3, 3.0, size=2)
    lam = rng.uniform(-0.9, 0.9)
    return DpParams(
        rng.uniform(-2.0, 2.0), rng.uniform(-2.0, 2.0),
        om11, lam * float(np.sqrt(om11 * om22)), om22,
        rng.uniform(-4.0, 4.0), rng.uniform(-4.0, 4.0),
        rng.uniform(-tau_span, tau_span))
