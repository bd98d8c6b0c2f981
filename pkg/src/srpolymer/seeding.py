"""Deterministic derivation of independent RNG streams from one experiment seed."""

from __future__ import annotations

import zlib

import numpy as np

SEED_MASK = (1 << 64) - 1


def _label_word(label: str | int) -> int:
    if isinstance(label, int):
        return label & 0xFFFFFFFF
    return zlib.crc32(label.encode("utf-8"))


def child_seed_sequence(seed: int, *labels: str | int) -> np.random.SeedSequence:
    """SeedSequence keyed by the experiment seed and a path of labels.

    The same (seed, labels) always gives the same stream; different label
    paths give statistically independent streams.
    """
    if seed < 0 or seed > SEED_MASK:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.SeedSequence(entropy=seed, spawn_key=tuple(_label_word(x) for x in labels))


def child_rng(seed: int, *labels: str | int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(child_seed_sequence(seed, *labels)))


def child_seed(seed: int, *labels: str | int) -> int:
    """A derived 64-bit integer seed, for handing to code that takes plain ints."""
    return int(child_seed_sequence(seed, *labels).generate_state(1, dtype=np.uint64)[0])
