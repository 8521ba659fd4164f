"""Finite-blocklength block error model and group-merging predicates.

For an (n, k) block code on an AWGN channel with capacity C and dispersion
V, the normal approximation puts the block error rate at

    BLER(n, k) = Q( ln2 * sqrt(n / V) * (C - k/n) ).

Everything here is a consequence of that one formula: inverting it for the
shortest admissible blocklength, estimating the BLER a group of bits needs
from its most demanding member, and deciding whether two adjacent groups
are better off sharing one codeword. The merge test compares the ratio of
the two groups' Q-inverse margins against a closed-form threshold; below
the threshold, one merged code is shorter than two separate ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .channel import ChannelSpec, capacity_and_dispersion, q_function, q_inverse
from .validation import PlanError, UepError

__all__ = [
    "BlerModel",
    "block_error_rate",
    "min_blocklength",
    "margin_from_bler",
    "merge_threshold",
    "merge_beneficial",
    "group_bler_estimate",
]

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class BlerModel:
    """Capacity / dispersion pair driving the normal approximation."""

    capacity: float
    dispersion: float

    def __post_init__(self) -> None:
        if not (self.capacity > 0 and math.isfinite(self.capacity)):
            raise UepError(f"capacity must be positive, got {self.capacity!r}")
        if not (0.0 < self.dispersion < 1.0):
            raise UepError(f"dispersion must lie in (0, 1), got {self.dispersion!r}")

    @classmethod
    def from_channel(cls, channel: ChannelSpec) -> "BlerModel":
        c, v = capacity_and_dispersion(channel)
        return cls(capacity=c, dispersion=v)

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "BlerModel":
        return cls.from_channel(ChannelSpec(snr_db=snr_db))


def _check_nk(n: int, k: int) -> tuple[int, int]:
    n = int(n)
    k = int(k)
    if n < 1 or k < 1:
        raise PlanError(f"blocklength and payload must be positive, got n={n}, k={k}")
    return n, k


def block_error_rate(model: BlerModel, n: int, k: int) -> float:
    """Normal-approximation BLER of an (n, k) code. Not clamped: rates
    above capacity simply come back greater than 0.5."""
    n, k = _check_nk(n, k)
    f = _LN2 * math.sqrt(n / model.dispersion) * (model.capacity - k / n)
    return q_function(f)


def margin_from_bler(model: BlerModel, bler: float) -> float:
    """Decay margin Y = sqrt(V)/ln2 * Qinv(bler) implied by a BLER target.

    Positive for targets below 0.5; this is the quantity that the merge
    threshold works in.
    """
    bler = float(bler)
    if not (0.0 < bler < 1.0):
        raise UepError(f"block error rate must lie in (0, 1), got {bler!r}")
    return math.sqrt(model.dispersion) / _LN2 * q_inverse(bler)


def min_blocklength(model: BlerModel, k: int, target_bler: float) -> int:
    """Shortest n with BLER(n, k) at or below the target.

    Solves the normal approximation in closed form for sqrt(n) (a
    quadratic), rounds up, then nudges by single steps to absorb the
    floating-point edge cases. Targets up to 0.5 are accepted; exactly 0.5
    lands on the zero-margin boundary n = ceil(k / C).
    """
    _, k = _check_nk(1, k)
    target = float(target_bler)
    if not (0.0 < target <= 0.5):
        raise PlanError(f"target block error rate must lie in (0, 0.5], got {target!r}")
    c = model.capacity
    y = margin_from_bler(model, target) if target < 0.5 else 0.0
    root = (y + math.sqrt(y * y + 4.0 * k * c)) / (2.0 * c)
    n = max(int(math.ceil(root * root)), 1)
    while block_error_rate(model, n, k) > target:
        n += 1
    while n > 1 and block_error_rate(model, n - 1, k) <= target:
        n -= 1
    return n


def group_bler_estimate(mu_min: float, size: int) -> float:
    """BLER a group must reach so its most demanding bit still meets its
    target: 1 - (1 - mu_min)^size, computed without cancellation."""
    mu_min = float(mu_min)
    if not (0.0 < mu_min <= 0.5):
        raise UepError(f"minimum target must lie in (0, 0.5], got {mu_min!r}")
    size = int(size)
    if size < 1:
        raise UepError(f"group size must be positive, got {size}")
    return -math.expm1(size * math.log1p(-mu_min))


def _merge_threshold_from_margin(y: float, k1: int, k2: int, c: float) -> float:
    a = math.sqrt(y * y + 4.0 * (k1 + k2) * c) - math.sqrt(y * y + 4.0 * k1 * c)
    return math.sqrt(2.0 * y * a + 4.0 * k2 * c) / a


def merge_threshold(model: BlerModel, n1: int, k1: int, k2: int) -> float:
    """Critical margin ratio below which merging k2 extra bits into an
    (n1, k1) code beats giving them their own codeword.

    Always greater than 1: a group with the same per-block reliability
    requirement (ratio 1) is always worth merging.
    """
    n1, k1 = _check_nk(n1, k1)
    _, k2 = _check_nk(1, k2)
    y = math.sqrt(n1) * model.capacity - k1 / math.sqrt(n1)
    if y <= 0:
        raise PlanError(
            f"(n1={n1}, k1={k1}) sits at or above capacity; merge threshold undefined"
        )
    return _merge_threshold_from_margin(y, k1, k2, model.capacity)


def merge_beneficial(
    model: BlerModel, bler_a: float, size_a: int, bler_b: float, size_b: int
) -> bool:
    """Whether group B should share a codeword with the better-protected
    group A rather than get its own.

    Both BLER requirements must lie in (0, 0.5). The decision compares the
    margin ratio Qinv(bler_a) / Qinv(bler_b) against the merge threshold
    derived from A's requirement.
    """
    for name, val in (("bler_a", bler_a), ("bler_b", bler_b)):
        if not (0.0 < float(val) < 0.5):
            raise UepError(f"{name} must lie in (0, 0.5), got {val!r}")
    q_a = q_inverse(float(bler_a))
    q_b = q_inverse(float(bler_b))
    y = margin_from_bler(model, float(bler_a))
    gamma = q_a / q_b
    return gamma < _merge_threshold_from_margin(y, int(size_a), int(size_b), model.capacity)
