"""Monte Carlo harnesses over codebook ensembles.

Trial ``i`` of a run with base seed ``b`` uses codebook seed
``trial_seed(b, i) = mix64(mix64(b) ^ i)`` (SplitMix64 finalizer). Results
are returned in trial order, so the worker count never changes an output.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ._rng import trial_seed
from .covering import (
    analyze_codebook,
    codebook_size,
    sample_codebook,
    sample_words,
    Codebook,
    induced_distribution,
)
from .exponents import beta_exponent, default_parameters
from .measures import (
    JointPair,
    check_tensor_size,
    kl_divergence,
    mutual_information,
    tensor_power,
    total_variation,
)

EXHAUSTIVE_PAIRS_LIMIT = 64
# split level used when the rate does not exceed I(U;V) and no epsilon is given
BELOW_RATE_EPSILON = 0.1


@dataclass(frozen=True)
class TrialRecord:
    seed: int
    n: int
    rate_R: float
    kl_bits: float
    tv: float
    mass_p2: float
    in_s: bool
    term_h: float
    term_1: float
    term_2: float


def sweep_parameters(pair: JointPair, R: float, epsilon: float | None = None):
    """``(epsilon, beta1, beta2)`` for a sweep cell.

    Above I(U;V) with no explicit epsilon this is :func:`default_parameters`.
    Otherwise the same schedule is applied to the given epsilon (or
    ``BELOW_RATE_EPSILON``), with ``beta2`` clipped at zero when the ratio
    rate is not positive. Below the mutual information the good-set column
    is descriptive only; the concentration bounds do not apply there.
    """
    I = mutual_information(pair)
    if epsilon is None and R > I:
        return default_parameters(pair, R)
    if epsilon is None:
        epsilon = BELOW_RATE_EPSILON
    _, beta = beta_exponent(pair, epsilon)
    beta1 = min(beta, max(R, 0.0)) / 2
    beta2 = max(R - I - epsilon, 0.0) / 4
    return epsilon, beta1, beta2


def _one_trial(args) -> TrialRecord:
    pair, n, rate_R, epsilon, beta1, beta2, seed = args
    codebook = sample_codebook(pair, n, rate_R, seed)
    dec, mem = analyze_codebook(pair, codebook, epsilon, beta1, beta2)
    return TrialRecord(
        seed=seed,
        n=n,
        rate_R=float(rate_R),
        kl_bits=dec.kl_exact,
        tv=dec.tv_exact,
        mass_p2=dec.mass_p2,
        in_s=mem.in_s,
        term_h=dec.term_h,
        term_1=dec.term_1,
        term_2=dec.term_2,
    )


def _run(jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [_one_trial(job) for job in jobs]
    chunksize = max(1, len(jobs) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_one_trial, jobs, chunksize=chunksize))


def mc_trials(pair, n, rate_R, epsilon, beta1, beta2, base_seed, trials, workers=1):
    """Analyze ``trials`` independent codebooks; one :class:`TrialRecord` each."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    check_tensor_size(pair.k_v, n)
    codebook_size(n, rate_R)
    jobs = [
        (pair, n, rate_R, epsilon, beta1, beta2, trial_seed(base_seed, i))
        for i in range(trials)
    ]
    return _run(jobs, workers)


def failure_rate(records, threshold_bits: float) -> float:
    """Fraction of records whose KL exceeds ``threshold_bits``."""
    records = list(records)
    if not records:
        raise ValueError("no records")
    return sum(r.kl_bits > threshold_bits for r in records) / len(records)


@dataclass(frozen=True)
class SweepCell:
    n: int
    rate_R: float
    median_kl: float
    q90_kl: float
    mean_mass_p2: float
    frac_in_s: float
    records: tuple = field(default=(), repr=False, compare=False)


def summarize(records) -> SweepCell:
    records = tuple(records)
    kl = np.array([r.kl_bits for r in records])
    return SweepCell(
        n=records[0].n,
        rate_R=records[0].rate_R,
        median_kl=float(np.median(kl)),
        q90_kl=float(np.quantile(kl, 0.9)),
        mean_mass_p2=float(np.mean([r.mass_p2 for r in records])),
        frac_in_s=float(np.mean([r.in_s for r in records])),
        records=records,
    )


def decay_sweep(pair, rates, ns, trials, base_seed, epsilon=None, workers=1):
    """One :class:`SweepCell` per ``(R, n)``, rates outermost.

    Every cell uses the same ``base_seed``, so the cell at ``(n, R)`` is
    exactly ``mc_trials`` with that seed.
    """
    cells = []
    for R in rates:
        eps, beta1, beta2 = sweep_parameters(pair, R, epsilon)
        for n in ns:
            records = mc_trials(pair, n, R, eps, beta1, beta2, base_seed, trials, workers)
            cells.append(summarize(records))
    return cells


@dataclass(frozen=True)
class WiretapReport:
    n: int
    rate_message: float
    rate_random: float
    m_message: int
    m_random: int
    seed: int
    per_message_kl: tuple
    per_message_tv: tuple
    max_kl: float
    max_pairwise_tv: float
    pairs_checked: int


def message_distributions(pair: JointPair, codebook: Codebook, m_message: int) -> np.ndarray:
    """Row ``m`` is the eavesdropper output law for message ``m``, which owns
    the consecutive block of words ``[m * M_rand, (m + 1) * M_rand)``."""
    m_random = codebook.m_size // m_message
    if m_random * m_message != codebook.m_size:
        raise ValueError("codebook size is not a multiple of the message count")
    rows = [
        induced_distribution(
            pair, codebook.subcodebook(m * m_random, (m + 1) * m_random)
        ).mass
        for m in range(m_message)
    ]
    return np.array(rows)


def tv_pairs(m_message: int):
    """Message pairs compared for the pairwise TV.

    All pairs when there are at most 64 messages; otherwise all pairs among
    the first 64 plus every later message against message 0.
    """
    if m_message <= EXHAUSTIVE_PAIRS_LIMIT:
        return list(itertools.combinations(range(m_message), 2))
    head = list(itertools.combinations(range(EXHAUSTIVE_PAIRS_LIMIT), 2))
    return head + [(0, j) for j in range(EXHAUSTIVE_PAIRS_LIMIT, m_message)]


def wiretap_codebook(pair, n, rate_message, rate_random, seed) -> tuple[Codebook, int, int]:
    m_message = codebook_size(n, rate_message)
    m_random = codebook_size(n, rate_random)
    words = sample_words(pair.q_u, n, m_message * m_random, seed)
    return Codebook.from_words(words, seed=seed), m_message, m_random


def wiretap_experiment(pair, n, rate_message, rate_random, base_seed) -> WiretapReport:
    """Eavesdropper statistics of one wiretap codebook.

    A single draw of ``M_msg * M_rand`` words (seed ``base_seed``) is split
    into per-message blocks; each block is a covering codebook of rate
    ``rate_random``.
    """
    check_tensor_size(pair.k_v, n)
    codebook, m_message, m_random = wiretap_codebook(
        pair, n, rate_message, rate_random, int(base_seed)
    )
    dists = message_distributions(pair, codebook, m_message)
    target = tensor_power(pair.q_v, n)
    kls = tuple(kl_divergence(d, target) for d in dists)
    tvs = tuple(total_variation(d, target) for d in dists)
    pairs = tv_pairs(m_message)
    max_tv = max((total_variation(dists[i], dists[j]) for i, j in pairs), default=0.0)
    return WiretapReport(
        n=n,
        rate_message=float(rate_message),
        rate_random=float(rate_random),
        m_message=m_message,
        m_random=m_random,
        seed=int(base_seed),
        per_message_kl=kls,
        per_message_tv=tvs,
        max_kl=max(kls),
        max_pairwise_tv=float(max_tv),
        pairs_checked=len(pairs),
    )
