"""Named random substreams derived from one master seed."""

import zlib

import numpy as np


def _key(names):
    return tuple(zlib.crc32(str(n).encode()) for n in names)


def substream(seed, *names):
    """Independent generator for ``names`` under ``seed``; schedule independent."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=_key(names)))


def derive_seed(seed, *names):
    """Integer seed for a named consumer (e.g. an estimator's ``random_state``)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=_key(names))
    return int(ss.generate_state(1, dtype=np.uint32)[0])
