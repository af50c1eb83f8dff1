"""Deterministic random-stream derivation.

All stochastic steps (splits, undersampling, bootstraps, feature subsampling,
permutations, synthetic corpora) draw from generators derived here. A derived
stream depends only on the master seed and a structured key, never on wall
clock or iteration timing, so a fixed seed reproduces every artifact byte for
byte.
"""

from __future__ import annotations

import zlib

import numpy as np

SeedPart = int | str


def _encode(part: SeedPart) -> int:
    if isinstance(part, bool):  # bool is an int subclass; keep it distinct
        return int(part) + 0x9E3779B9
    if isinstance(part, int):
        return part & 0xFFFFFFFF
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"unsupported seed part {part!r}")


def derive(master_seed: int, *parts: SeedPart) -> np.random.Generator:
    """Return a Generator keyed by (master_seed, *parts).

    Distinct part tuples give independent streams; the same tuple always gives
    the same stream.
    """
    entropy = (master_seed & 0xFFFFFFFFFFFFFFFF,) + tuple(_encode(p) for p in parts)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_int(master_seed: int, *parts: SeedPart) -> int:
    """A stable 63-bit integer seed keyed the same way as derive()."""
    return int(derive(master_seed, *parts).integers(0, 2**63 - 1))
