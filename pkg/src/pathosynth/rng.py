"""Deterministic seed derivation.

Every stochastic stage of the generator receives its own child seed derived
from a master seed and small integer tags, so any sub-stage can be re-run in
isolation and reproduce its output exactly.  The mixing function is
splitmix64, chosen because it is published, trivially portable, and has
full-period avalanche behaviour on 64-bit inputs.
"""

from enum import IntEnum

_MASK64 = (1 << 64) - 1


class Stage(IntEnum):
    """Tags naming the stochastic stages of the pipeline."""

    DEFORM = 1
    CONTRAST = 2
    PATHOLOGY = 3
    CORRUPTION = 4
    SEVERITY = 5
    SAMPLE = 6
    STREAM = 7
    BATCH = 8


def splitmix64(x: int) -> int:
    """One splitmix64 step: advance by the golden-gamma and finalize."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def child_seed(master_seed: int, *tags: int) -> int:
    """Derive a 64-bit child seed from a master seed and integer tags.

    Each tag is folded in with XOR followed by a splitmix64 step, so
    (master, DEFORM) and (master, CONTRAST) yield unrelated streams, and
    (master, SAMPLE, i) differs for every sample index i.
    """
    x = master_seed & _MASK64
    for tag in tags:
        x = splitmix64(x ^ (int(tag) & _MASK64))
    return x
