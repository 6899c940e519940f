"""Counter-based random streams.

Every generator is Philox keyed by a SeedSequence built from the run seed
and a stream path, e.g. make_rng(seed, step) during training or
make_rng(seed, index) for per-point ELBO estimates.
"""
import numpy as np


def make_rng(seed, *stream):
    """Return a Philox-backed Generator for (seed, *stream)."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(s) for s in stream]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
