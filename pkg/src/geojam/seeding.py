"""Order-independent seed derivation.

Every randomized stage receives its own 64-bit seed computed from the global
seed and a path of small integers (stage id, item index, ...).  The mixer is
the SplitMix64 finalizer::

    fmix(z) = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9
              z ^= z >> 27; z *= 0x94D049BB133111EB
              z ^= z >> 31                                (all mod 2**64)

    derive_seed(seed, p1, p2, ...) =
        h0 = fmix(seed)
        h_{k} = fmix(h_{k-1} + (p_k + 1) * 0x9E3779B97F4A7C15)
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# stage identifiers, fixed forever so datasets stay reproducible
STAGE_VOI = 1
STAGE_LABELS = 2
STAGE_STATIONARY_SAMPLES = 3
STAGE_TRAJECTORY = 4
STAGE_SPLIT = 5
STAGE_FOREST = 6


def fmix64(z: int) -> int:
    z &= _MASK
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK
    z ^= z >> 31
    return z


def derive_seed(seed: int, *path: int) -> int:
    """Mix ``seed`` with an index path into a new unsigned 64-bit seed."""
    if seed < 0 or any(p < 0 for p in path):
        raise ValueError("seeds and path indices must be non-negative")
    h = fmix64(seed)
    for p in path:
        h = fmix64(h + (p + 1) * _GOLDEN)
    return h
