"""Seeded random streams.

A session owns one master seed. Each subsystem (phase drift, photon
emission, detection, attacks, ...) draws from its own generator, derived by
hashing the subsystem name into the ``spawn_key`` of a
:class:`numpy.random.SeedSequence`. Adding a new subsystem therefore never
shifts the numbers seen by the existing ones.
"""

import hashlib

import numpy as np

__all__ = ["stream_id", "substream"]


def stream_id(name):
    """64-bit stream id of a subsystem name (first 8 bytes of BLAKE2b)."""
    digest = hashlib.blake2b(name.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(seed, name):
    """Independent ``Generator`` for subsystem ``name`` under master ``seed``."""
    if seed < 0 or seed >= 2**64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(stream_id(name),))
    return np.random.Generator(np.random.PCG64(ss))
