"""Per-path random streams keyed by (seed, path index)."""
import numpy as np


def path_generator(seed, index):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed), spawn_key=(int(index),))))


def path_generators(seed, n, offset=0):
    """Independent Philox generators for paths offset, ..., offset + n - 1."""
    return [path_generator(seed, offset + i) for i in range(n)]
