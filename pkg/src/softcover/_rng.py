"""Counter-based 64-bit mixing used for codebook letters and trial seeds.

The finalizer is SplitMix64. Everything here is a pure function of its
integer inputs, so any codebook word can be regenerated in isolation and
trial seeds do not depend on execution order.
"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
# distinct odd offset for the position stream
_POS = 0xD1B54A32D192ED03


def mix64(x: int) -> int:
    """SplitMix64 step on a Python integer."""
    z = (int(x) + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def _mix64_array(x: np.ndarray) -> np.ndarray:
    z = x + np.uint64(GOLDEN)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def trial_seed(base_seed: int, index: int) -> int:
    """Seed of trial ``index``: ``mix64(mix64(base_seed) ^ index)``."""
    return mix64(mix64(base_seed) ^ (int(index) & MASK64))


def letter_uniforms(seed: int, words: np.ndarray, n: int) -> np.ndarray:
    """Uniforms in [0, 1) for every (word, position) pair.

    Letter ``i`` of word ``m`` uses
    ``mix64(mix64(mix64(seed) ^ m) ^ (i * 0xD1B54A32D192ED03))``; the top 53
    bits become the uniform.
    """
    key = np.uint64(mix64(seed))
    words = np.asarray(words, dtype=np.uint64).reshape(-1)
    positions = np.arange(n, dtype=np.uint64) * np.uint64(_POS)
    with np.errstate(over="ignore"):
        per_word = _mix64_array(key ^ words)
        h = _mix64_array(per_word[:, None] ^ positions[None, :])
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53
