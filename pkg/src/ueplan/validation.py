"""Input checking helpers shared across the package.

Estimators and planning functions funnel raw user input through these so
that error messages are consistent and every numeric path downstream can
assume clean float64 / uint8 arrays.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np


class UepError(ValueError):
    """Base class for planning and validation failures."""


class ProfileError(UepError):
    """A protection profile is malformed or out of range."""


class PlanError(UepError):
    """A plan request cannot be satisfied or a plan is inconsistent."""


def check_mu_values(values: Sequence[float] | np.ndarray) -> np.ndarray:
    """Validate target flip probabilities and return them as float64.

    Every value must lie in the half-open interval (0, 0.5]; anything else
    is rejected with the offending index and value in the message.
    """
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ProfileError(f"profile must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ProfileError("profile is empty")
    bad = np.where(~np.isfinite(arr) | (arr <= 0.0) | (arr > 0.5))[0]
    if bad.size:
        i = int(bad[0])
        raise ProfileError(
            f"target flip probability out of range (0, 0.5] at index {i}: {arr[i]!r}"
        )
    return arr


def check_bits(bits: Sequence[int] | np.ndarray, length: int | None = None) -> np.ndarray:
    """Coerce a bit vector (or matrix of row vectors) to uint8 zeros and ones."""
    arr = np.asarray(bits)
    if arr.dtype == np.bool_:
        arr = arr.astype(np.uint8)
    arr = np.ascontiguousarray(arr)
    if not np.isin(arr, (0, 1)).all():
        raise UepError("bit array contains values other than 0 and 1")
    if length is not None and arr.shape[-1] != length:
        raise UepError(f"expected bit vectors of length {length}, got {arr.shape[-1]}")
    return arr.astype(np.uint8, copy=False)


def check_odd_repetitions(n_reps: int) -> int:
    n = int(n_reps)
    if n < 1 or n % 2 == 0:
        raise UepError(f"repetition count must be a positive odd integer, got {n_reps}")
    return n


def check_probability(p: float, name: str = "probability", *, open_right: bool = True) -> float:
    p = float(p)
    hi_ok = p < 1.0 if open_right else p <= 1.0
    if not (0.0 < p and hi_ok and np.isfinite(p)):
        rng = "(0, 1)" if open_right else "(0, 1]"
        raise UepError(f"{name} must lie in {rng}, got {p!r}")
    return p


def as_generator(seed: int | np.random.Generator | None) -> np.random.Generator:
    """Accept a seed, a Generator, or None and hand back a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
