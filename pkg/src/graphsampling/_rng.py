"""Seed handling.

Every stochastic routine takes an explicit ``seed`` which may be an int, a
tuple of ints (hierarchical keys, e.g. ``(base, trial, method)``), a
``SeedSequence`` or an already constructed ``Generator``. Generators are
backed by Philox so streams are counter based and reproducible bit for bit.
"""

import numpy as np


def make_rng(seed=None):
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    elif seed is None:
        ss = np.random.SeedSequence()
    elif isinstance(seed, (tuple, list)):
        ss = np.random.SeedSequence([int(s) for s in seed])
    else:
        ss = np.random.SeedSequence(int(seed))
    return np.random.Generator(np.random.Philox(ss))
