"""
Named random substreams derived from one root seed
"""
import zlib

import numpy as np

from src.exceptions import ConfigError


def stream_key(name):
    return zlib.crc32(str(name).encode("utf-8"))


def substream(seed, name, *index):
    """
    Independent generator for a named stage (and optional block indices)

    The same (seed, name, index) always yields the same stream, whatever
    else the run does, so any stage can be rerun on its own.
    """
    if seed is None:
        raise ConfigError("seed is required")
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, stream_key(name)]
    entropy.extend(int(i) for i in index)
    return np.random.default_rng(entropy)


def block_slices(n, block_size):
    """Split range(n) into contiguous (block_index, slice) pairs"""
    block_size = max(1, int(block_size))
    return [(b, slice(start, min(start + block_size, n)))
            for b, start in enumerate(range(0, n, block_size))]
