"""Counter-based random streams.

Every random quantity in the package is drawn from a Philox generator whose
key is derived from ``(seed, *key)``.  Two calls with the same key see the same
numbers no matter which thread runs them or in which order.
"""

import zlib

import numpy as np

# Trials are grouped into fixed-size chunks; each chunk owns one substream.
# Changing this constant changes every Monte Carlo output, so it is not a knob.
CHUNK = 1024


def _word(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    part = int(part)
    if part < 0:
        raise ValueError("stream key parts must be non-negative")
    return part


def substream(seed, *key):
    """Return an independent generator for ``(seed, *key)``.

    Key parts may be non-negative integers or short strings (hashed with
    CRC32).  A tuple ``seed`` is read as ``(seed, *prefix)``.
    """
    if seed is None:
        raise ValueError("a seed is required")
    if isinstance(seed, tuple):
        seed, key = seed[0], tuple(seed[1:]) + key
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_word(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def as_generator(stream, *key):
    """Accept a Generator, an int seed, or a ``(seed, ...)`` tuple."""
    if isinstance(stream, np.random.Generator):
        return stream
    return substream(stream, *key)


def chunk_sizes(trials, chunk=CHUNK):
    """Split ``trials`` into consecutive chunk sizes."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    full, rest = divmod(int(trials), chunk)
    return [chunk] * full + ([rest] if rest else [])
