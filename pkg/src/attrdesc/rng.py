"""Seed derivation and stream construction.

All randomness in the toolkit flows through numpy's PCG64 seeded from
SeedSequence. Streams are derived from integer seed paths with
``derive_seed`` and per-row sampling streams use SeedSequence spawn keys,
so results are reproducible bit for bit across platforms and independent
of iteration order.
"""

from __future__ import annotations

import numpy as np

__all__ = ["derive_seed", "make_generator", "row_generator"]

_U64 = np.uint64


def _check_parts(parts: tuple[int, ...]) -> tuple[int, ...]:
    for p in parts:
        if not isinstance(p, (int, np.integer)) or p < 0:
            raise ValueError(f"seed path components must be non-negative integers, got {p!r}")
    return tuple(int(p) for p in parts)


def derive_seed(*parts: int) -> int:
    """Collapse an integer seed path into a single 64-bit seed."""
    if not parts:
        raise ValueError("empty seed path")
    ss = np.random.SeedSequence(_check_parts(parts))
    return int(ss.generate_state(1, _U64)[0])


def make_generator(*parts: int) -> np.random.Generator:
    """A PCG64 generator keyed by an integer seed path."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(_check_parts(parts))))


def row_generator(seed: int, row: int) -> np.random.Generator:
    """Independent per-row stream: child ``row`` of the batch seed.

    Uses SeedSequence spawn keys, so the stream for a row does not depend
    on how many values any other row consumed.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(row),))
    return np.random.Generator(np.random.PCG64(ss))
