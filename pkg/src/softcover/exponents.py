"""Atypicality exponents, exact atypical probabilities and the closed-form
concentration bounds of the strong soft-covering argument.

Rates and divergences are in bits. Doubly-exponential quantities are kept
as natural logarithms so nothing underflows.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.special import gammaln, logsumexp

from .measures import JointPair, SizeGuardError, mutual_information

LOG2E = math.log2(math.e)
LN2 = math.log(2.0)
MAX_COMPOSITIONS = 10**7
DEFAULT_ALPHA_MAX = 64.0
GAMMA_STEP = 1e-4
RATE_ROUNDOFF = 1e-12


class InfeasibleParametersError(ValueError):
    """Raised when rates and free parameters violate the proof's constraints."""


@dataclass(frozen=True, eq=False)
class PairTypeTable:
    """Per-letter information density ``log2(W(v|u) / q_v(v))``.

    ``log_ratio`` is a ``(k_u, k_v)`` array, ``-inf`` where the channel puts
    no mass (or the output marginal is zero). ``support_ratios`` and
    ``support_probs`` list the values and joint weights over the support of
    the joint law, in row-major order.
    """

    log_ratio: np.ndarray
    support_ratios: np.ndarray
    support_probs: np.ndarray
    mutual_info: float

    @classmethod
    def from_pair(cls, pair: JointPair) -> "PairTypeTable":
        w = pair.q_v_given_u.matrix
        q_v = pair.q_v.probs
        ok = (w > 0) & (q_v[None, :] > 0)
        r = np.full(w.shape, -np.inf)
        r[ok] = np.log2(w[ok] / np.broadcast_to(q_v, w.shape)[ok])
        r.setflags(write=False)
        joint = pair.q_uv > 0
        table = cls(r, r[joint], pair.q_uv[joint], mutual_information(pair))
        mean = float(np.dot(table.support_probs, table.support_ratios))
        if abs(mean - table.mutual_info) > 1e-9:
            raise AssertionError("information density does not average to I(U;V)")
        return table

    @property
    def max_ratio(self) -> float:
        return float(self.support_ratios.max())

    def grouped(self):
        """Distinct density values and their total joint probability."""
        keys = np.round(self.support_ratios, 12)
        values, inverse = np.unique(keys, return_inverse=True)
        probs = np.bincount(inverse, weights=self.support_probs)
        ratios = np.array(
            [self.support_ratios[inverse == g].mean() for g in range(values.size)]
        )
        return ratios, probs


def typicality_threshold(n: int, mutual_info: float, epsilon: float) -> float:
    """Largest summed density still counted as typical.

    Sequences with ``sum_i r(u_i, v_i) <= n (I + eps)`` are typical. The
    small slack keeps exact ties on the typical side despite rounding.
    """
    level = n * (mutual_info + epsilon)
    return level + 1e-12 * max(1.0, abs(level))


def _log2_mgf(table: PairTypeTable, t: float) -> float:
    """log2 E[2^{t r}] under the joint law."""
    logs = np.log(table.support_probs) + t * LN2 * table.support_ratios
    return float(logsumexp(logs) / LN2)


def beta_objective(table: PairTypeTable, epsilon: float, alpha: float) -> float:
    """(alpha - 1)(I + eps - d_alpha(Q_UV, Q_U Q_V)) via the cumulant form."""
    t = alpha - 1.0
    return t * (table.mutual_info + epsilon) - _log2_mgf(table, t)


def beta_exponent(pair: JointPair, epsilon: float, alpha_max: float = DEFAULT_ALPHA_MAX):
    """Atypicality exponent and its maximizing Rényi order.

    Returns ``(alpha_star, beta)``. Both are ``inf`` when no joint-support
    pair has density above ``I + eps``, because the atypical set is then
    empty. Otherwise the objective is concave in ``alpha - 1`` and is
    maximized over ``(1, alpha_max]`` by ternary search.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    if alpha_max < 2:
        raise ValueError("alpha_max must be at least 2")
    table = pair if isinstance(pair, PairTypeTable) else PairTypeTable.from_pair(pair)
    if table.max_ratio <= table.mutual_info + epsilon:
        return math.inf, math.inf

    def f(t):
        return t * (table.mutual_info + epsilon) - _log2_mgf(table, t)

    lo, hi = 0.0, float(alpha_max) - 1.0
    while hi - lo > 1e-9:
        m1 = lo + (hi - lo) / 3
        m2 = hi - (hi - lo) / 3
        if f(m1) < f(m2):
            lo = m1
        else:
            hi = m2
    t_star = 0.5 * (lo + hi)
    return 1.0 + t_star, f(t_star)


def _compositions(n: int, parts: int, batch: int = 1 << 16):
    """Yield arrays of all compositions of ``n`` into ``parts`` non-negative
    integers, in lexicographic order of bar positions."""
    if parts == 1:
        yield np.array([[n]], dtype=np.int64)
        return
    bars = itertools.combinations(range(n + parts - 1), parts - 1)
    while True:
        chunk = list(itertools.islice(bars, batch))
        if not chunk:
            return
        b = np.array(chunk, dtype=np.int64)
        edges = np.hstack(
            [np.full((b.shape[0], 1), -1), b, np.full((b.shape[0], 1), n + parts - 1)]
        )
        yield np.diff(edges, axis=1) - 1


def composition_count(n: int, parts: int) -> int:
    return math.comb(n + parts - 1, parts - 1)


def atypical_probability_exact(pair: JointPair, epsilon: float, n: int) -> float:
    """Exact P_Q(sum_i r(U_i, V_i) > n (I + eps)) for i.i.d. pairs.

    Pairs sharing the same density value are pooled, then every joint type
    (composition of ``n``) is enumerated with its exact multinomial weight.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon!r}")
    n = int(n)
    if n < 1:
        raise ValueError("block length must be positive")
    table = PairTypeTable.from_pair(pair)
    ratios, probs = table.grouped()
    count = composition_count(n, ratios.size)
    if count > MAX_COMPOSITIONS:
        raise SizeGuardError(
            f"{count} joint types at n={n} exceeds the enumeration limit "
            f"{MAX_COMPOSITIONS}"
        )
    threshold = typicality_threshold(n, table.mutual_info, epsilon)
    log_probs = np.log(probs)
    log_n_fact = gammaln(n + 1)
    acc = -math.inf
    for comp in _compositions(n, ratios.size):
        atypical = comp @ ratios > threshold
        if not atypical.any():
            continue
        c = comp[atypical]
        logw = log_n_fact - gammaln(c + 1).sum(axis=1) + c @ log_probs
        acc = np.logaddexp(acc, logsumexp(logw))
    return float(math.exp(acc)) if acc > -math.inf else 0.0


class BoundValue(NamedTuple):
    """A probability bound of the form ``exp(-e^{log_neg_log})`` (or a sum of
    such terms).

    ``prob`` may exceed 1, in which case the bound is vacuous. ``log_prob``
    is its natural log and ``log_neg_log`` is ``ln(-log_prob)`` (NaN when the
    bound is vacuous); the latter stays finite long after ``log_prob``
    overflows.
    """

    prob: float
    log_prob: float
    log_neg_log: float

    @property
    def vacuous(self) -> bool:
        return self.log_prob >= 0.0


def _from_log_neg_log(lnl: float) -> BoundValue:
    log_prob = -math.exp(lnl) if lnl < 700 else -math.inf
    return BoundValue(math.exp(log_prob), log_prob, lnl)


def _from_log(log_prob: float) -> BoundValue:
    lnl = math.log(-log_prob) if log_prob < 0 else math.nan
    return BoundValue(math.exp(min(log_prob, 700.0)), float(log_prob), lnl)


def _chernoff(n: int, rate: float) -> BoundValue:
    # exp(-(1/3) 2^{n rate})
    return _from_log_neg_log(n * rate * LN2 - math.log(3.0))


def chernoff_rhs_mass(n: int, R: float, beta1: float) -> BoundValue:
    """exp(-(1/3) 2^{n(R - beta1)}): tail bound on the atypical mass."""
    return _chernoff(n, R - beta1)


def chernoff_rhs_ratio(n: int, R: float, I: float, epsilon: float, beta2: float) -> BoundValue:
    """exp(-(1/3) 2^{n(R - I - eps - 2 beta2)}): per-sequence ratio tail bound."""
    rate = R - I - epsilon - 2 * beta2
    # round-off from subtracting the four terms is treated as zero
    if -RATE_ROUNDOFF < rate < 0:
        rate = 0.0
    if rate < 0:
        raise InfeasibleParametersError(
            f"R - I - eps - 2*beta2 = {rate:.6g} is negative"
        )
    return _chernoff(n, rate)


def union_bound_failure(n, R, I, epsilon, beta1, beta2, k_v) -> BoundValue:
    """Bound on the probability that a random codebook falls outside the
    good set: mass term plus ``k_v**n`` copies of the ratio term."""
    mass = chernoff_rhs_mass(n, R, beta1)
    ratio = chernoff_rhs_ratio(n, R, I, epsilon, beta2)
    count = n * math.log(k_v)
    a, b = mass.log_neg_log, ratio.log_neg_log
    if max(a, b) < 700:
        return _from_log(float(np.logaddexp(-math.exp(a), count - math.exp(b))))
    # both terms astronomically small: -log(sum) equals the smaller exponent
    # up to a relative error far below double precision
    if math.exp(min(b, 700)) <= count:
        return _from_log(count - math.exp(b))
    b_eff = b + math.log1p(-count * math.exp(-b))
    return _from_log_neg_log(min(a, b_eff))


def deterministic_kl_ceiling(n: int, beta1: float, beta2: float, q_min: float) -> float:
    """Sum of the three closed-form term bounds valid for every good codebook.

    Binary-entropy term, typical-part term and atypical-part term, in bits.
    """
    if not 0.0 < q_min <= 1.0:
        raise ValueError(f"q_min must lie in (0, 1], got {q_min!r}")
    decay1 = 2.0 ** (-beta1 * n)
    term_h = 2 * decay1 * (beta1 * n + LOG2E - 1)
    term_1 = 2.0 ** (-beta2 * n) * LOG2E
    term_2 = 2 * n * math.log2(1 / q_min) * decay1
    return term_h + term_1 + term_2


def default_parameters(pair: JointPair, R: float):
    """Canonical ``(epsilon, beta1, beta2)`` for rate ``R``.

    eps = (R - I)/3, beta2 = (R - I - eps)/4, beta1 = min(beta(eps), R)/2.
    """
    I = mutual_information(pair)
    if not R > I:
        raise InfeasibleParametersError(
            f"rate {R!r} does not exceed I(U;V) = {I:.6f}"
        )
    epsilon = (R - I) / 3
    beta2 = (R - I - epsilon) / 4
    _, beta = beta_exponent(pair, epsilon)
    beta1 = min(beta, R) / 2
    return epsilon, beta1, beta2


@dataclass(frozen=True)
class ExponentReport:
    rate: float
    mutual_info: float
    epsilon: float
    alpha_star: float
    beta: float
    beta1: float
    beta2: float
    q_min: float
    gamma1_bits: float
    gamma2_bits: float
    n0: int
    n_max: int

    @property
    def gamma2_nat(self) -> float:
        return self.gamma2_bits * LN2


def check_parameters(I, R, epsilon, beta, beta1, beta2):
    """Raise :class:`InfeasibleParametersError` naming the first violated
    constraint."""
    if not epsilon > 0:
        raise InfeasibleParametersError("epsilon must be positive")
    if not (beta1 > 0 and beta2 > 0):
        raise InfeasibleParametersError("beta1 and beta2 must be positive")
    if not beta1 < beta:
        raise InfeasibleParametersError(f"beta1 = {beta1:.6g} is not below beta = {beta:.6g}")
    if not beta1 < R:
        raise InfeasibleParametersError(f"beta1 = {beta1:.6g} is not below R = {R:.6g}")
    if not R - I - epsilon - 2 * beta2 > 0:
        raise InfeasibleParametersError(
            f"R - I - eps - 2*beta2 = {R - I - epsilon - 2 * beta2:.6g} is not positive"
        )


def _floor_step(x: float) -> float:
    return round(math.floor(x / GAMMA_STEP) * GAMMA_STEP, 10)


def log2_kl_ceiling(n: int, beta1: float, beta2: float, q_min: float) -> float:
    """``log2`` of :func:`deterministic_kl_ceiling`, safe for large ``n``."""
    if not 0.0 < q_min <= 1.0:
        raise ValueError(f"q_min must lie in (0, 1], got {q_min!r}")
    terms = [math.log2(LOG2E) - beta2 * n]
    coeff = 2 * (beta1 * n + LOG2E - 1) + 2 * n * math.log2(1 / q_min)
    if coeff > 0:
        terms.append(math.log2(coeff) - beta1 * n)
    return float(np.logaddexp2.reduce(terms))


def _certified_rate(values: np.ndarray, ns: np.ndarray, mid: int):
    """Largest grid rate ``g`` with ``values[n] >= g`` for every ``n >= mid``,
    plus the smallest ``n0`` from which ``values >= g`` holds throughout."""
    rate = _floor_step(float(np.min(values[ns >= mid])))
    fails = np.flatnonzero(~(values >= rate))
    n0 = int(ns[0]) if fails.size == 0 else int(ns[fails[-1]] + 1)
    return rate, n0


def rate_certificate(pair: JointPair, R, epsilon, beta1, beta2, n_range=(1, 200)) -> ExponentReport:
    """Certify decay rates over a finite range of block lengths.

    ``gamma1_bits`` is the largest multiple of 1e-4 such that the KL ceiling
    satisfies ``ceiling(n) <= 2^{-gamma1 n}`` on the upper half of
    ``n_range``; ``gamma2_bits`` likewise for
    ``union(n) <= exp(-e^{gamma2 ln2 n})``. ``n0`` is the smallest block
    length from which both inequalities hold for every ``n`` up to the end
    of the range.
    """
    I = mutual_information(pair)
    alpha_star, beta = beta_exponent(pair, epsilon)
    check_parameters(I, R, epsilon, beta, beta1, beta2)
    q_min = pair.q_v.min_positive
    n_lo, n_hi = int(n_range[0]), int(n_range[1])
    if n_lo < 1 or n_hi < n_lo:
        raise ValueError(f"bad block-length range {n_range!r}")
    ns = np.arange(n_lo, n_hi + 1)
    mid = (n_lo + n_hi + 1) // 2
    ceiling_rate = np.array([-log2_kl_ceiling(n, beta1, beta2, q_min) / n for n in ns])
    union_rate = np.array(
        [
            union_bound_failure(n, R, I, epsilon, beta1, beta2, pair.k_v).log_neg_log
            / (n * LN2)
            for n in ns
        ]
    )
    union_rate = np.nan_to_num(union_rate, nan=-np.inf)
    gamma1, n0_1 = _certified_rate(ceiling_rate, ns, mid)
    gamma2, n0_2 = _certified_rate(union_rate, ns, mid)
    if gamma1 <= 0 or gamma2 <= 0:
        raise InfeasibleParametersError(
            f"no positive certified rate for n in [{mid}, {n_hi}]"
        )
    return ExponentReport(
        rate=float(R),
        mutual_info=I,
        epsilon=float(epsilon),
        alpha_star=alpha_star,
        beta=beta,
        beta1=float(beta1),
        beta2=float(beta2),
        q_min=q_min,
        gamma1_bits=gamma1,
        gamma2_bits=gamma2,
        n0=max(n0_1, n0_2),
        n_max=n_hi,
    )
