"""Counter-based, splittable random streams.

Every stream is a Philox generator whose key is derived from a root seed and
a tuple of integer labels (replication index, block or chunk index, purpose
tag). Identical labels give identical streams regardless of which worker
draws them or in which order.
"""

import numpy as np

# purpose tags, so that streams for different uses never collide
SERIES = 1
BURNIN = 2
PATHS = 3
BLOCKS = 4
CENTERING = 5
REPLICATE = 6
AUDIT = 7
BOOTSTRAP = 8


def stream(seed, *labels):
    """Return a ``numpy.random.Generator`` for ``(seed, *labels)``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError("seed must be non-negative")
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in labels))
    return np.random.Generator(np.random.Philox(ss))


def pareto(rng, alpha, size):
    """Standard Pareto(alpha) draws, P(X > x) = x**-alpha for x >= 1."""
    # 1 - U lies in (0, 1], so the power is finite
    return (1.0 - rng.random(size)) ** (-1.0 / alpha)
