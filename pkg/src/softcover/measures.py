"""Finite-alphabet distributions, channels and information measures.

Every quantity returned here is in bits. Distributions are validated on
construction and never renormalized behind the caller's back.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SUM_TOL = 1e-9
MAX_TENSOR_SIZE = 2**26


class DistributionError(ValueError):
    """Raised for malformed probability vectors or channels."""


class SupportError(ValueError):
    """Raised when p(x) > 0 but q(x) = 0 where continuity is required."""

    def __init__(self, index, message=None):
        self.index = int(index)
        super().__init__(
            message or f"absolute continuity violated at index {self.index}"
        )


class SizeGuardError(ValueError):
    """Raised when a dense vector over V^n would exceed the size guard."""


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    # -0.0 + 0.0 == +0.0
    arr = arr + 0.0
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ProbVector:
    """Probability mass function over symbols ``0..k-1``."""

    probs: np.ndarray

    def __post_init__(self):
        probs = _frozen(self.probs)
        if probs.ndim != 1 or probs.size == 0:
            raise DistributionError("probability vector must be 1-d and non-empty")
        if not np.all(np.isfinite(probs)):
            raise DistributionError("probability vector has non-finite entries")
        neg = np.flatnonzero(probs < 0)
        if neg.size:
            raise DistributionError(f"negative entry at index {neg[0]}")
        total = float(probs.sum())
        if abs(total - 1.0) > SUM_TOL:
            raise DistributionError(f"entries sum to {total!r}, not 1")
        object.__setattr__(self, "probs", probs)

    def __len__(self):
        return self.probs.size

    @property
    def k(self) -> int:
        return self.probs.size

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.probs > 0)

    @property
    def min_positive(self) -> float:
        return float(self.probs[self.probs > 0].min())


@dataclass(frozen=True, eq=False)
class Channel:
    """Row-stochastic matrix; row ``u`` is the output law given input ``u``."""

    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        if mat.ndim != 2 or mat.shape[0] == 0 or mat.shape[1] == 0:
            raise DistributionError("channel must be a non-empty 2-d array")
        for u, row in enumerate(mat):
            try:
                ProbVector(row)
            except DistributionError as exc:
                raise DistributionError(f"channel row {u}: {exc}") from None
        object.__setattr__(self, "matrix", mat)

    @classmethod
    def from_rows(cls, rows) -> "Channel":
        rows = [list(r) for r in rows]
        if not rows:
            raise DistributionError("channel has no rows")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise DistributionError("ragged channel rows")
        return cls(np.array(rows, dtype=np.float64))

    @property
    def k_u(self) -> int:
        return self.matrix.shape[0]

    @property
    def k_v(self) -> int:
        return self.matrix.shape[1]

    def row(self, u: int) -> ProbVector:
        return ProbVector(self.matrix[u])


@dataclass(frozen=True, eq=False)
class JointPair:
    """An input law together with a channel, plus the derived output marginal
    and joint law."""

    q_u: ProbVector
    q_v_given_u: Channel
    q_v: ProbVector = field(init=False)
    q_uv: np.ndarray = field(init=False)

    def __post_init__(self):
        if len(self.q_u) != self.q_v_given_u.k_u:
            raise DistributionError(
                f"input law has {len(self.q_u)} symbols, channel expects "
                f"{self.q_v_given_u.k_u}"
            )
        q_v = output_marginal(self.q_u, self.q_v_given_u)
        q_uv = self.q_u.probs[:, None] * self.q_v_given_u.matrix
        q_uv.setflags(write=False)
        if abs(q_uv.sum() - 1.0) > SUM_TOL:
            raise DistributionError("joint law does not sum to 1")
        if np.max(np.abs(q_uv.sum(axis=0) - q_v.probs)) > 1e-12:
            raise DistributionError("output marginal inconsistent with joint law")
        object.__setattr__(self, "q_v", q_v)
        object.__setattr__(self, "q_uv", q_uv)

    @property
    def k_u(self) -> int:
        return self.q_v_given_u.k_u

    @property
    def k_v(self) -> int:
        return self.q_v_given_u.k_v

    @property
    def product(self) -> np.ndarray:
        """Product of marginals ``q_u(u) q_v(v)`` as a ``(k_u, k_v)`` array."""
        return np.outer(self.q_u.probs, self.q_v.probs)


def validate_distribution(raw) -> ProbVector:
    """Check ``raw`` is a probability vector and wrap it; never renormalizes."""
    return ProbVector(np.asarray(raw, dtype=np.float64))


def make_pair(q_u, rows) -> JointPair:
    return JointPair(validate_distribution(q_u), Channel.from_rows(rows))


def binary_symmetric_pair(crossover: float, q_u=(0.5, 0.5)) -> JointPair:
    """BSC with the given crossover probability and input law."""
    p = float(crossover)
    return make_pair(q_u, [[1 - p, p], [p, 1 - p]])


def load_pair(path) -> JointPair:
    """Read a channel/source file.

    The file holds one JSON object with keys ``q_u`` (list of reals) and
    ``q_v_given_u`` (list of rows, each a distribution over the output
    alphabet).
    """
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DistributionError(f"{path}: not valid JSON ({exc})") from None
    return pair_from_dict(obj)


def pair_from_dict(obj) -> JointPair:
    if not isinstance(obj, dict):
        raise DistributionError("channel file must hold a single object")
    missing = {"q_u", "q_v_given_u"} - set(obj)
    if missing:
        raise DistributionError(f"channel file missing keys: {sorted(missing)}")
    rows = obj["q_v_given_u"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise DistributionError("q_v_given_u must be a list of lists")
    if not isinstance(obj["q_u"], list):
        raise DistributionError("q_u must be a list")
    try:
        return make_pair(obj["q_u"], rows)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, DistributionError):
            raise
        raise DistributionError(str(exc)) from None


def pair_to_dict(pair: JointPair) -> dict:
    return {
        "q_u": pair.q_u.probs.tolist(),
        "q_v_given_u": pair.q_v_given_u.matrix.tolist(),
    }


def _as_mass(p) -> np.ndarray:
    if isinstance(p, ProbVector):
        return p.probs
    return np.asarray(p, dtype=np.float64).ravel()


def _pair_arrays(p, q):
    p, q = _as_mass(p), _as_mass(q)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: {p.size} vs {q.size}")
    return p, q


def entropy(p) -> float:
    """Shannon entropy in bits, with ``0 log 0 = 0``."""
    probs = _as_mass(p)
    probs = probs[probs > 0]
    return float(-np.sum(probs * np.log2(probs)) + 0.0)


def binary_entropy(x: float) -> float:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"binary entropy needs x in [0, 1], got {x!r}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return float(-x * math.log2(x) - (1 - x) * math.log2(1 - x))


def _check_continuity(p, q):
    bad = np.flatnonzero((p > 0) & (q <= 0))
    if bad.size:
        raise SupportError(bad[0])


def kl_divergence(p, q) -> float:
    """Relative entropy D(p||q) in bits.

    Raises
    ------
    SupportError
        If ``p`` puts mass where ``q`` has none; the offending index is
        carried on the exception.
    """
    p, q = _pair_arrays(p, q)
    _check_continuity(p, q)
    mask = p > 0
    return float(np.sum(p[mask] * np.log2(p[mask] / q[mask])) + 0.0)


def total_variation(p, q) -> float:
    p, q = _pair_arrays(p, q)
    return float(0.5 * np.abs(p - q).sum())


def renyi_divergence(alpha: float, p, q) -> float:
    """Rényi divergence of order ``alpha`` in bits.

    ``alpha == 1`` falls back to :func:`kl_divergence` and ``alpha == inf``
    gives the max-divergence over the support of ``p``. For ``alpha < 1``
    mass of ``p`` outside the support of ``q`` is simply dropped from the sum.
    """
    alpha = float(alpha)
    if not alpha > 0:
        raise ValueError(f"Rényi order must be positive, got {alpha!r}")
    p, q = _pair_arrays(p, q)
    if alpha == 1.0:
        return kl_divergence(p, q)
    mask = p > 0
    if alpha > 1:
        _check_continuity(p, q)
    if math.isinf(alpha):
        return float(np.max(np.log2(p[mask] / q[mask])))
    mask &= q > 0
    if not mask.any():
        return math.inf
    # log of sum p^a q^(1-a), evaluated in log space
    logs = alpha * np.log(p[mask]) + (1 - alpha) * np.log(q[mask])
    top = logs.max()
    log_sum = top + math.log(np.exp(logs - top).sum())
    return float(log_sum / ((alpha - 1) * math.log(2)))


def output_marginal(q_u, channel: Channel) -> ProbVector:
    q_u = q_u if isinstance(q_u, ProbVector) else validate_distribution(q_u)
    if len(q_u) != channel.k_u:
        raise ValueError(
            f"dimension mismatch: input law {len(q_u)} vs channel {channel.k_u}"
        )
    q_v = q_u.probs @ channel.matrix
    # absorb rounding so the marginal is a valid ProbVector
    q_v = np.clip(q_v, 0.0, None)
    return ProbVector(q_v)


def mutual_information(pair: JointPair) -> float:
    """I(U;V) in bits, summed over the support of the joint law."""
    q_uv = pair.q_uv
    prod = pair.product
    mask = q_uv > 0
    return float(np.sum(q_uv[mask] * np.log2(q_uv[mask] / prod[mask])) + 0.0)


def tensor_power(p, n: int) -> np.ndarray:
    """Mass of the i.i.d. law over ``k**n`` sequences.

    The entry for ``(v_0, ..., v_{n-1})`` sits at
    ``sum_i v_i * k**(n-1-i)``, i.e. the first letter is most significant.
    """
    probs = _as_mass(p)
    n = int(n)
    if n < 1:
        raise ValueError("block length must be positive")
    check_tensor_size(probs.size, n)
    out = probs.copy()
    for _ in range(n - 1):
        out = np.kron(out, probs)
    return out


def check_tensor_size(k: int, n: int) -> int:
    size = int(k) ** int(n)
    if size > MAX_TENSOR_SIZE:
        raise SizeGuardError(
            f"alphabet {k} at block length {n} needs {size} entries "
            f"(limit {MAX_TENSOR_SIZE})"
        )
    return size
