"""Labeled random streams derived from one master seed."""

import zlib

import numpy as np


def derive_rng(seed: int, label: str) -> np.random.Generator:
    """Independent generator for ``label`` under master ``seed``.

    The label is hashed into the spawn key, so streams such as ``"noise"``
    and ``"chain"`` never overlap and do not depend on creation order.
    """
    key = zlib.crc32(label.encode("utf-8"))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(key,))
    return np.random.Generator(np.random.PCG64(ss))


def open_uniform(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform variates on the open interval (0, 1)."""
    u = rng.random(shape)
    return np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
