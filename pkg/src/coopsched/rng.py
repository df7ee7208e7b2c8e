"""Named, independent random sub-streams derived from one run seed."""

import zlib

import numpy as np


def substream(seed: int, *names) -> np.random.Generator:
    """Generator keyed by ``(seed, *names)``.

    Changing the draws of one subsystem (say ``"channel"``) leaves the
    streams of every other name untouched.
    """
    key = [int(seed)]
    for n in names:
        key.append(zlib.crc32(str(n).encode()) if not isinstance(n, int) else int(n))
    return np.random.default_rng(np.random.SeedSequence(key))
