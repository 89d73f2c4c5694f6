"""Seed and stream derivation.

Every random quantity is drawn from a PCG64 stream keyed by
``SeedSequence(entropy=seed, spawn_key=keys)``. Keys are small integer tuples
such as ``(STREAM_CURVE, curve_index)`` or ``(STREAM_CALIB, chunk_index)``, so a
stream depends only on its key and never on how many other streams were used
before it or on which worker consumed it.
"""

from __future__ import annotations

import numpy as np

STREAM_CURVE = 1
STREAM_CALIB = 2
STREAM_REPLICATE = 3
STREAM_SUBSAMPLE = 4
STREAM_POPULATION = 5

# calibration draws are produced in fixed-size chunks, one stream per chunk
CHUNK = 8192


def stream(seed: int, *keys: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed (an unsigned 63-bit integer) for the given key path."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


_cache: dict = {}


def normal_chunks(seed: int, n_draws: int, width: int, key: int = STREAM_CALIB):
    """Yield ``(rows, width)`` standard normal blocks whose concatenation has
    ``n_draws`` rows. Block ``c`` comes from stream ``(key, c)``.

    Column j of a block is the j-th run of ``rows`` values in its stream, so
    a narrower request returns exactly the leading columns of a wider one.
    The most recent request is cached for reuse by later, narrower ones.
    """
    tag = (int(seed), int(n_draws), int(key))
    hit = _cache.get(tag)
    if hit is None or hit[0] < width:
        blocks = []
        done = 0
        c = 0
        while done < n_draws:
            rows = min(CHUNK, n_draws - done)
            blocks.append(stream(seed, key, c).standard_normal((width, rows)).T)
            done += rows
            c += 1
        _cache.clear()
        _cache[tag] = hit = (width, blocks)
    for b in hit[1]:
        yield b[:, :width]
