"""Per-bit repetition planning with majority-vote decoding.

Each semantic bit i gets an odd repetition count R_i; the decoder takes a
majority vote, so the residual flip probability after decoding is the
upper binomial tail

    ber(R, eps) = sum_{j >= (R+1)/2} C(R, j) eps^j (1-eps)^(R-j),

which is strictly decreasing in R for eps < 0.5. Planning picks the
smallest odd R_i with ber(R_i, eps) <= mu_i. A Chernoff bound caps the
search bracket, a floor/ceiling bisection finds the first bit's count in
O(log r_ub) tail evaluations, and the remaining (ascending) targets are
assigned in one pass that walks protection levels downward, so the total
number of tail evaluations does not grow with the profile length.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .validation import PlanError, UepError, check_bits, check_odd_repetitions

__all__ = [
    "PlanStats",
    "RepetitionPlan",
    "repetition_ber",
    "chernoff_rep_upper",
    "min_repetitions",
    "assign_repetitions",
    "encode_repetition",
    "decode_repetition",
]


def repetition_ber(n_reps: int, eps: float) -> float:
    """Majority-vote error probability of an ``n_reps``-fold repetition code.

    Parameters
    ----------
    n_reps : int
        Odd number of repetitions.
    eps : float
        Flip probability of each coded bit, in (0, 0.5].

    Returns
    -------
    float
        Probability that (n_reps+1)/2 or more of the copies flip. The sum
        runs in log space (lgamma-based binomial coefficients) and is
        accumulated with compensated summation, so tiny tails keep full
        relative precision.
    """
    n = check_odd_repetitions(n_reps)
    eps = float(eps)
    if not (0.0 < eps <= 0.5):
        raise UepError(f"coded-bit flip probability must lie in (0, 0.5], got {eps!r}")
    if eps == 0.5:
        return 0.5
    if n == 1:
        return eps
    log_eps = math.log(eps)
    log_q = math.log1p(-eps)
    log_fact_n = math.lgamma(n + 1)
    terms = [
        math.exp(
            log_fact_n
            - math.lgamma(j + 1)
            - math.lgamma(n - j + 1)
            + j * log_eps
            + (n - j) * log_q
        )
        for j in range((n + 1) // 2, n + 1)
    ]
    return math.fsum(terms)


def _check_planning_inputs(mu: float, eps: float) -> tuple[float, float]:
    mu = float(mu)
    eps = float(eps)
    if not (0.0 < mu <= 0.5):
        raise PlanError(f"target flip probability must lie in (0, 0.5], got {mu!r}")
    if not (0.0 < eps < 0.5):
        raise PlanError(f"coded-bit flip probability must lie in (0, 0.5), got {eps!r}")
    return mu, eps


def chernoff_rep_upper(mu: float, eps: float) -> int:
    """Chernoff-based cap on the half-count r needed to reach target ``mu``.

    The majority-vote error of a (2r+1)-repetition code is bounded by
    (2 sqrt(eps (1-eps)))^(2r+1), so the target is certainly met once r
    reaches (ln mu / ln(2 sqrt(eps(1-eps))) - 1) / 2. Returns the floor of
    that quantity, clamped at 0; flooring can land one level short when mu
    sits just under eps on a very clean channel, which the search in
    :func:`min_repetitions` absorbs with a final verify step.
    """
    mu, eps = _check_planning_inputs(mu, eps)
    log_base = math.log(2.0 * math.sqrt(eps * (1.0 - eps)))
    r = math.floor(0.5 * (math.log(mu) / log_base - 1.0))
    return max(int(r), 0)


@dataclass
class PlanStats:
    """Counters filled in by the planning routines when requested."""

    ber_evals: int = 0


class _TailCache:
    """Memoized repetition_ber lookups, shared across one planning run."""

    def __init__(self, eps: float, stats: PlanStats | None = None):
        self.eps = eps
        self.stats = stats
        self._vals: dict[int, float] = {}

    def __call__(self, n_reps: int) -> float:
        val = self._vals.get(n_reps)
        if val is None:
            val = repetition_ber(n_reps, self.eps)
            self._vals[n_reps] = val
            if self.stats is not None:
                self.stats.ber_evals += 1
        return val


def min_repetitions(
    mu: float, eps: float, *, stats: PlanStats | None = None, _tail: _TailCache | None = None
) -> int:
    """Smallest odd repetition count whose decoded flip probability meets ``mu``.

    Returns 1 immediately when eps <= mu (the raw channel already
    suffices). Otherwise runs a floor/ceiling bisection on the half-count
    over [0, chernoff_rep_upper(mu, eps)], keeping a lower midpoint that
    still misses the target and an upper midpoint that meets it, until the
    bracket width drops to one.
    """
    mu, eps = _check_planning_inputs(mu, eps)
    if eps <= mu:
        return 1
    tail = _tail if _tail is not None else _TailCache(eps, stats)
    lo = 0
    hi = max(chernoff_rep_upper(mu, eps), 1)
    while hi - lo > 1:
        c_lo = (lo + hi) // 2
        c_hi = -((lo + hi) // -2)
        if tail(2 * c_hi + 1) > mu:
            lo = c_hi
        elif tail(2 * c_lo + 1) < mu:
            hi = c_lo
        else:
            r = c_lo if tail(2 * c_lo + 1) <= mu else c_hi
            break
    else:
        r = hi
    # The Chernoff cap can undershoot by one level when mu sits just under
    # eps on very clean channels; verify and climb if needed.
    while tail(2 * r + 1) > mu:
        r += 1
    return 2 * r + 1


@dataclass(frozen=True)
class RepetitionPlan:
    """Odd repetition counts for a sorted profile, strongest bit first."""

    reps: np.ndarray
    eps: float

    def __post_init__(self) -> None:
        arr = np.asarray(self.reps, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise PlanError("repetition plan must be a non-empty 1-D array of counts")
        if np.any(arr < 1) or np.any(arr % 2 == 0):
            raise PlanError("repetition counts must be positive odd integers")
        if np.any(arr[:-1] < arr[1:]):
            raise PlanError("repetition counts must be non-increasing in sorted order")
        if not (0.0 < self.eps < 0.5):
            raise PlanError(f"coded-bit flip probability must lie in (0, 0.5), got {self.eps!r}")
        arr.setflags(write=False)
        object.__setattr__(self, "reps", arr)

    def __len__(self) -> int:
        return int(self.reps.size)

    @property
    def total_blocklength(self) -> int:
        return int(self.reps.sum())

    def achieved_ber(self) -> np.ndarray:
        """Decoded flip probability per bit under this plan."""
        lookup = {int(r): repetition_ber(int(r), self.eps) for r in np.unique(self.reps)}
        return np.asarray([lookup[int(r)] for r in self.reps])

    def to_json(self) -> str:
        return json.dumps(
            {
                "eps": self.eps,
                "reps": [int(r) for r in self.reps],
                "total_blocklength": self.total_blocklength,
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "RepetitionPlan":
        data = json.loads(text)
        return cls(reps=np.asarray(data["reps"], dtype=np.int64), eps=float(data["eps"]))


def assign_repetitions(
    mu_sorted, eps: float, *, stats: PlanStats | None = None
) -> RepetitionPlan:
    """Assign per-bit repetition counts for an ascending target profile.

    Equivalent to running :func:`min_repetitions` on every bit, but pays
    for one bisection (the strongest bit) plus one tail evaluation per
    protection level crossed on the way down, independent of profile
    length. Steps down through as many levels as each target allows, so
    widely spaced targets are handled in a single pass too.

    Parameters
    ----------
    mu_sorted : array_like or ProtectionProfile
        Ascending per-bit targets in (0, 0.5].
    eps : float
        Coded-bit flip probability, in (0, 0.5).
    stats : PlanStats, optional
        When given, ``stats.ber_evals`` counts the distinct binomial-tail
        evaluations performed.
    """
    mu = np.asarray(getattr(mu_sorted, "mu", mu_sorted), dtype=np.float64)
    if mu.ndim != 1 or mu.size == 0:
        raise PlanError("profile must be a non-empty 1-D array")
    if np.any(mu[:-1] > mu[1:]):
        raise PlanError("assign_repetitions requires an ascending profile; sort it first")
    _, eps = _check_planning_inputs(float(mu[0]), eps)

    tail = _TailCache(eps, stats)
    reps = np.empty(mu.size, dtype=np.int64)
    level = min_repetitions(float(mu[0]), eps, _tail=tail)
    threshold = tail(level - 2) if level > 1 else None
    for i, target in enumerate(mu):
        if level == 1:
            reps[i:] = 1
            break
        while level > 1 and target >= threshold:
            level -= 2
            threshold = tail(level - 2) if level > 1 else None
        reps[i] = level
    return RepetitionPlan(reps=reps, eps=eps)


def encode_repetition(bits, plan: RepetitionPlan) -> np.ndarray:
    """Repeat each bit R_i times, concatenated in bit order."""
    arr = check_bits(bits, length=len(plan))
    return np.repeat(arr, plan.reps, axis=-1)


def decode_repetition(stream, plan: RepetitionPlan) -> np.ndarray:
    """Majority-vote each bit's copies back out of a coded stream."""
    arr = check_bits(stream, length=plan.total_blocklength)
    offsets = np.concatenate(([0], np.cumsum(plan.reps)[:-1]))
    sums = np.add.reduceat(arr.astype(np.int32), offsets, axis=-1)
    return (2 * sums > plan.reps).astype(np.uint8)
