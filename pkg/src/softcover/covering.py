"""Random codebooks and the exact analysis of their induced output law.

Output sequences are indexed big-endian: ``idx(v) = sum_i v_i k_V^(n-1-i)``
with ``v_0`` the first letter. Every mass vector here uses that order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._rng import letter_uniforms
from .exponents import PairTypeTable, typicality_threshold
from .measures import (
    JointPair,
    SizeGuardError,
    SupportError,
    binary_entropy,
    check_tensor_size,
    kl_divergence,
    tensor_power,
    total_variation,
)

MAX_CODEBOOK = 2**31
# entries per (word chunk x output sequence) block
CHUNK_ENTRIES = 2**21
RATIO2_SLACK = 1e-12
JENSEN_SLACK = 1e-9


def codebook_size(n: int, rate_R: float) -> int:
    """``round(2^{n R})`` with halves rounded up."""
    size = math.floor(2.0 ** (n * rate_R) + 0.5)
    if size < 1:
        raise ValueError(f"rate {rate_R!r} at n={n} gives an empty codebook")
    if size > MAX_CODEBOOK:
        raise SizeGuardError(f"codebook of {size} words exceeds the 2^31 limit")
    return size


@dataclass(frozen=True, eq=False)
class Codebook:
    """``m_size`` words of length ``n``; ``words[m, i]`` is letter ``i`` of
    word ``m``."""

    n: int
    rate_R: float
    seed: int
    words: np.ndarray

    def __post_init__(self):
        words = np.array(self.words, dtype=np.int64)
        if words.ndim != 2 or words.shape[0] < 1 or words.shape[1] != self.n:
            raise ValueError(f"words must have shape (m_size >= 1, {self.n})")
        if words.min() < 0:
            raise ValueError("negative symbol in codebook")
        if codebook_size(self.n, self.rate_R) != words.shape[0]:
            raise ValueError(
                f"{words.shape[0]} words inconsistent with round(2^(nR)) at "
                f"n={self.n}, R={self.rate_R!r}"
            )
        words.setflags(write=False)
        object.__setattr__(self, "words", words)

    @classmethod
    def from_words(cls, words, seed: int = 0) -> "Codebook":
        words = np.atleast_2d(np.asarray(words, dtype=np.int64))
        m, n = words.shape
        return cls(n=n, rate_R=math.log2(m) / n, seed=seed, words=words)

    @property
    def m_size(self) -> int:
        return self.words.shape[0]

    def subcodebook(self, start: int, stop: int) -> "Codebook":
        return Codebook.from_words(self.words[start:stop], seed=self.seed)


def sample_words(q_u, n: int, m_size: int, seed: int) -> np.ndarray:
    """Draw ``m_size`` i.i.d. words by inverse-CDF on counter-based uniforms.

    Letter ``i`` of word ``m`` depends only on ``(seed, m, i)``.
    """
    probs = q_u.probs if hasattr(q_u, "probs") else np.asarray(q_u, dtype=np.float64)
    cdf = np.cumsum(probs)
    last = int(np.flatnonzero(probs > 0)[-1])
    u = letter_uniforms(seed, np.arange(m_size), n)
    letters = np.searchsorted(cdf, u, side="right")
    return np.minimum(letters, last)


def sample_codebook(pair: JointPair, n: int, rate_R: float, seed: int) -> Codebook:
    if n < 1:
        raise ValueError("block length must be positive")
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError("seed must be an unsigned 64-bit integer")
    m_size = codebook_size(n, rate_R)
    return Codebook(n, float(rate_R), seed, sample_words(pair.q_u, n, m_size, seed))


def complete_codebook(pair: JointPair, n: int) -> Codebook:
    """Every input sequence exactly once, in big-endian order."""
    k = pair.k_u
    check_tensor_size(k, n)
    idx = np.arange(k**n)
    powers = k ** np.arange(n - 1, -1, -1)
    words = (idx[:, None] // powers[None, :]) % k
    return Codebook(n, math.log2(k), 0, words)


@dataclass(frozen=True, eq=False)
class SubDistribution:
    """Non-negative mass over ``V^n`` with total at most 1."""

    mass: np.ndarray
    k_v: int
    n: int

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=np.float64)
        if mass.shape != (self.k_v**self.n,):
            raise ValueError("mass vector length must be k_v**n")
        if mass.min() < 0:
            raise ValueError("negative mass")
        if mass.sum() > 1 + 1e-9:
            raise ValueError(f"total mass {mass.sum()!r} exceeds 1")
        mass.setflags(write=False)
        object.__setattr__(self, "mass", mass)

    @property
    def total(self) -> float:
        return float(self.mass.sum())


@dataclass(frozen=True, eq=False)
class RatioField:
    """Entrywise ratio of a sub-distribution to the i.i.d. target."""

    values: np.ndarray

    @property
    def max(self) -> float:
        return float(self.values.max())


def _check_codebook(pair: JointPair, codebook: Codebook):
    if codebook.words.max() >= pair.k_u:
        raise ValueError("codebook symbol outside the input alphabet")
    check_tensor_size(pair.k_v, codebook.n)


def _expand(table: np.ndarray, words: np.ndarray, combine) -> np.ndarray:
    """Per-word tensor over V^n built letter by letter, big-endian."""
    m, n = words.shape
    out = table[words[:, 0]]
    for i in range(1, n):
        out = combine(out[:, :, None], table[words[:, i]][:, None, :]).reshape(m, -1)
    return out


def _accumulate(pair: JointPair, codebook: Codebook, epsilon=None):
    """Induced mass and, when ``epsilon`` is given, its typical/atypical
    parts. Words are processed in fixed-size chunks in index order."""
    _check_codebook(pair, codebook)
    n = codebook.n
    size = pair.k_v**n
    w = pair.q_v_given_u.matrix
    total = np.zeros(size)
    if epsilon is not None:
        p1, p2 = np.zeros(size), np.zeros(size)
        table = PairTypeTable.from_pair(pair)
        threshold = typicality_threshold(n, table.mutual_info, epsilon)
    chunk = max(1, CHUNK_ENTRIES // size)
    for start in range(0, codebook.m_size, chunk):
        words = codebook.words[start : start + chunk]
        cond = _expand(w, words, np.multiply)
        total += cond.sum(axis=0)
        if epsilon is not None:
            dens = _expand(table.log_ratio, words, np.add)
            kept = cond * (dens <= threshold)
            p1 += kept.sum(axis=0)
            # cond - kept is exactly cond or exactly 0 entrywise
            p2 += (cond - kept).sum(axis=0)
    total /= codebook.m_size
    if epsilon is None:
        return total
    p1 /= codebook.m_size
    p2 /= codebook.m_size
    return total, p1, p2


def induced_distribution(pair: JointPair, codebook: Codebook) -> SubDistribution:
    """Uniform mixture over codewords of the n-letter channel output laws."""
    return SubDistribution(_accumulate(pair, codebook), pair.k_v, codebook.n)


def typicality_split(pair: JointPair, codebook: Codebook, epsilon: float):
    """Split the induced law by joint typicality of (codeword, output).

    Returns ``(P1, P2)``; ``P1`` holds the contributions with summed
    information density at most ``n (I + eps)``.
    """
    _, p1, p2 = _accumulate(pair, codebook, epsilon)
    return (
        SubDistribution(p1, pair.k_v, codebook.n),
        SubDistribution(p2, pair.k_v, codebook.n),
    )


def _ratio(mass: np.ndarray, target: np.ndarray) -> np.ndarray:
    bad = np.flatnonzero((mass > 0) & (target <= 0))
    if bad.size:
        raise SupportError(bad[0], f"mass on target-null sequence {bad[0]}")
    out = np.zeros_like(mass)
    pos = target > 0
    out[pos] = mass[pos] / target[pos]
    return out


def density_ratio(sub: SubDistribution, pair: JointPair, n: int | None = None) -> RatioField:
    n = sub.n if n is None else n
    return RatioField(_ratio(sub.mass, tensor_power(pair.q_v, n)))


def kl_exact(pair: JointPair, codebook: Codebook) -> float:
    induced = induced_distribution(pair, codebook)
    return kl_divergence(induced.mass, tensor_power(pair.q_v, codebook.n))


def tv_exact(pair: JointPair, codebook: Codebook) -> float:
    induced = induced_distribution(pair, codebook)
    return total_variation(induced.mass, tensor_power(pair.q_v, codebook.n))


@dataclass(frozen=True)
class DecompositionReport:
    mass_p2: float
    term_h: float
    term_1: float
    term_2: float
    kl_exact: float
    tv_exact: float

    @property
    def bound(self) -> float:
        return self.term_h + self.term_1 + self.term_2

    @property
    def holds(self) -> bool:
        return self.kl_exact <= self.bound + JENSEN_SLACK


@dataclass(frozen=True)
class MembershipReport:
    """Per-condition outcome of the good-set test."""

    mass_p2: float
    max_ratio1: float
    max_ratio2: float
    mass_threshold: float
    ratio1_threshold: float
    ratio2_threshold: float
    mass_ok: bool
    ratio1_ok: bool
    ratio2_ok: bool

    @property
    def in_s(self) -> bool:
        return self.mass_ok and self.ratio1_ok and self.ratio2_ok


def _plogratio(mass: np.ndarray, target: np.ndarray) -> float:
    mask = mass > 0
    return float(np.sum(mass[mask] * np.log2(mass[mask] / target[mask])))


def _decompose(total, p1, p2, target) -> DecompositionReport:
    mass_p1 = min(max(float(p1.sum()), 0.0), 1.0)
    return DecompositionReport(
        mass_p2=min(max(float(p2.sum()), 0.0), 1.0),
        term_h=binary_entropy(mass_p1),
        term_1=_plogratio(p1, target),
        term_2=_plogratio(p2, target),
        kl_exact=kl_divergence(total, target),
        tv_exact=total_variation(total, target),
    )


def _membership(p1, p2, target, n, beta1, beta2, q_min) -> MembershipReport:
    mass_p2 = float(p2.sum())
    r1 = float(_ratio(p1, target).max())
    r2 = float(_ratio(p2, target).max())
    t_mass = 2 * 2.0 ** (-beta1 * n)
    t1 = 1 + 2.0 ** (-beta2 * n)
    t2 = (1 / q_min) ** n
    return MembershipReport(
        mass_p2=mass_p2,
        max_ratio1=r1,
        max_ratio2=r2,
        mass_threshold=t_mass,
        ratio1_threshold=t1,
        ratio2_threshold=t2,
        mass_ok=mass_p2 < t_mass,
        ratio1_ok=r1 < t1,
        ratio2_ok=r2 < t2 * (1 + RATIO2_SLACK),
    )


def jensen_decomposition(pair: JointPair, codebook: Codebook, epsilon: float) -> DecompositionReport:
    """Exact KL together with the three terms of its typicality upper bound:
    binary entropy of the typical mass, and the P1- and P2-weighted log
    ratios."""
    total, p1, p2 = _accumulate(pair, codebook, epsilon)
    return _decompose(total, p1, p2, tensor_power(pair.q_v, codebook.n))


def codebook_in_S(pair, codebook, epsilon, beta1, beta2) -> MembershipReport:
    _, p1, p2 = _accumulate(pair, codebook, epsilon)
    target = tensor_power(pair.q_v, codebook.n)
    return _membership(p1, p2, target, codebook.n, beta1, beta2, pair.q_v.min_positive)


def analyze_codebook(pair, codebook, epsilon, beta1, beta2):
    """Decomposition and membership from a single pass over the codebook."""
    total, p1, p2 = _accumulate(pair, codebook, epsilon)
    target = tensor_power(pair.q_v, codebook.n)
    return (
        _decompose(total, p1, p2, target),
        _membership(p1, p2, target, codebook.n, beta1, beta2, pair.q_v.min_positive),
    )
