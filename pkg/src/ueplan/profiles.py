"""Protection profiles: per-bit target flip probabilities and their bookkeeping.

A profile assigns every semantic bit i a target flip probability mu_i in
(0, 0.5]. Planning always happens on the profile sorted ascending (most
protected first), so alongside the sorted values we keep the permutation
that maps sorted positions back to original bit indices. All file formats
round-trip bit-exactly: floats are written with Python repr, which is the
shortest string that parses back to the same double.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .validation import ProfileError, as_generator, check_bits, check_mu_values

__all__ = [
    "ProtectionProfile",
    "Permutation",
    "load_profile",
    "dump_profile",
    "synth_profile",
    "sort_profile",
    "permute_bits",
]


@dataclass(frozen=True)
class Permutation:
    """Bijection between sorted positions and original bit indices.

    ``forward[p]`` is the original index of the bit sitting at sorted
    position p. Applying the permutation forward gathers a vector into
    sorted order; applying it inverse scatters sorted-order values back.
    """

    forward: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.forward, dtype=np.int64)
        if arr.ndim != 1 or arr.size == 0:
            raise ProfileError("permutation must be a non-empty 1-D index array")
        if not np.array_equal(np.sort(arr), np.arange(arr.size)):
            raise ProfileError("permutation must contain each index 0..K-1 exactly once")
        object.__setattr__(self, "forward", arr)

    def __len__(self) -> int:
        return int(self.forward.size)

    @property
    def inverse(self) -> np.ndarray:
        inv = np.empty_like(self.forward)
        inv[self.forward] = np.arange(self.forward.size)
        return inv

    def apply(self, values, direction: str = "forward") -> np.ndarray:
        """Rearrange the last axis of ``values`` along this permutation."""
        arr = np.asarray(values)
        if arr.shape[-1] != len(self):
            raise ProfileError(
                f"cannot permute length {arr.shape[-1]} with permutation of size {len(self)}"
            )
        if direction == "forward":
            return arr[..., self.forward]
        if direction == "inverse":
            return arr[..., self.inverse]
        raise ProfileError(f"direction must be 'forward' or 'inverse', got {direction!r}")

    @classmethod
    def identity(cls, k: int) -> "Permutation":
        return cls(np.arange(int(k), dtype=np.int64))


@dataclass(frozen=True)
class ProtectionProfile:
    """Per-bit target flip probabilities, plus whether they are ascending."""

    mu: np.ndarray
    label: str = ""
    is_sorted: bool = field(init=False, default=False)

    def __post_init__(self) -> None:
        arr = check_mu_values(self.mu)
        arr.setflags(write=False)
        object.__setattr__(self, "mu", arr)
        object.__setattr__(self, "is_sorted", bool(np.all(arr[:-1] <= arr[1:])))

    def __len__(self) -> int:
        return int(self.mu.size)

    @property
    def k(self) -> int:
        return len(self)


def sort_profile(profile: ProtectionProfile) -> tuple[ProtectionProfile, Permutation]:
    """Sort ascending by target, keeping ties in original order (stable)."""
    order = np.argsort(profile.mu, kind="stable")
    srt = ProtectionProfile(profile.mu[order], label=profile.label)
    return srt, Permutation(order.astype(np.int64))


def permute_bits(bits, permutation: Permutation, direction: str = "forward") -> np.ndarray:
    """Reorder a bit vector (or rows of bit vectors) by the permutation."""
    return permutation.apply(check_bits(bits), direction)


def _parse_float(token: str, where: str) -> float:
    try:
        return float(token)
    except ValueError as exc:
        raise ProfileError(f"could not parse {where}: {token!r}") from exc


def load_profile(source: str | Path | IO[str], fmt: str | None = None) -> ProtectionProfile:
    """Read a profile from CSV (one value per line, optional ``mu`` header) or JSON.

    ``fmt`` may be "csv" or "json"; when omitted it is taken from the file
    extension, defaulting to CSV for streams.
    """
    label = ""
    if isinstance(source, (str, Path)):
        path = Path(source)
        if fmt is None:
            fmt = "json" if path.suffix.lower() == ".json" else "csv"
        text = path.read_text()
        label = path.stem
    else:
        text = source.read()
        if fmt is None:
            fmt = "csv"

    if fmt == "json":
        try:
            values = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ProfileError(f"invalid JSON profile: {exc}") from exc
        if not isinstance(values, list):
            raise ProfileError("JSON profile must be a flat array of numbers")
        return ProtectionProfile(np.asarray(values, dtype=np.float64), label=label)
    if fmt == "csv":
        values = []
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line:
                continue
            if lineno == 1 and line.lower() == "mu":
                continue
            values.append(_parse_float(line, f"CSV line {lineno}"))
        return ProtectionProfile(np.asarray(values, dtype=np.float64), label=label)
    raise ProfileError(f"unknown profile format {fmt!r}")


def dump_profile(profile: ProtectionProfile, sink: str | Path | IO[str], fmt: str | None = None) -> None:
    """Write a profile so that :func:`load_profile` recovers it bit-exactly."""
    if isinstance(sink, (str, Path)):
        path = Path(sink)
        if fmt is None:
            fmt = "json" if path.suffix.lower() == ".json" else "csv"
        with path.open("w") as fh:
            dump_profile(profile, fh, fmt)
        return
    if fmt is None:
        fmt = "csv"
    if fmt == "json":
        sink.write("[" + ", ".join(repr(float(v)) for v in profile.mu) + "]\n")
    elif fmt == "csv":
        sink.write("mu\n")
        for v in profile.mu:
            sink.write(repr(float(v)) + "\n")
    else:
        raise ProfileError(f"unknown profile format {fmt!r}")


def _segment_counts(fractions: Iterable[float], k: int) -> list[int]:
    # Cumulative rounding: deterministic, sums to k, respects ordering.
    counts = []
    acc = 0.0
    prev = 0
    for frac in fractions:
        acc += frac
        cum = round(acc * k)
        counts.append(cum - prev)
        prev = cum
    return counts


def synth_profile(spec: dict) -> ProtectionProfile:
    """Generate a synthetic profile from a small dict spec.

    Two generators are supported::

        {"K": 64, "generator": "segments",
         "params": {"levels": [[1e-4, 0.25], [1e-2, 0.25], [0.4, 0.5]]}}

        {"K": 512, "generator": "log_uniform",
         "params": {"low": 1e-5, "high": 0.4}, "seed": 3}

    ``segments`` lays out constant plateaus (value, fraction) in the order
    given; fractions must sum to 1. ``log_uniform`` draws independently
    with log(mu) uniform on [log(low), log(high)].
    """
    try:
        k = int(spec["K"])
        generator = spec["generator"]
    except (KeyError, TypeError) as exc:
        raise ProfileError(f"synthesis spec needs 'K' and 'generator': {spec!r}") from exc
    if k <= 0:
        raise ProfileError(f"profile size must be positive, got {k}")
    params = spec.get("params", {})
    label = spec.get("label", f"synth-{generator}-{k}")

    if generator == "segments":
        levels = params.get("levels")
        if not levels:
            raise ProfileError("segments generator needs params.levels = [[mu, fraction], ...]")
        fracs = [float(f) for _, f in levels]
        if not math.isclose(sum(fracs), 1.0, rel_tol=0, abs_tol=1e-9):
            raise ProfileError(f"segment fractions must sum to 1, got {sum(fracs)!r}")
        counts = _segment_counts(fracs, k)
        values = np.concatenate(
            [np.full(c, float(mu)) for (mu, _), c in zip(levels, counts)]
        )
        return ProtectionProfile(values, label=label)

    if generator == "log_uniform":
        low = float(params.get("low", 1e-5))
        high = float(params.get("high", 0.5))
        if not (0.0 < low <= high <= 0.5):
            raise ProfileError(f"log_uniform needs 0 < low <= high <= 0.5, got {low}, {high}")
        rng = as_generator(spec.get("seed"))
        values = np.exp(rng.uniform(math.log(low), math.log(high), size=k))
        # Guard against exp() rounding a hair past the endpoint.
        values = np.clip(values, low, high)
        return ProtectionProfile(values, label=label)

    raise ProfileError(f"unknown profile generator {generator!r}")


def parse_synth_spec(text: str) -> dict:
    """Parse a --synth argument: inline JSON or @path to a JSON file."""
    if text.startswith("@"):
        text = Path(text[1:]).read_text()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileError(f"invalid synthesis spec: {exc}") from exc
    if not isinstance(spec, dict):
        raise ProfileError("synthesis spec must be a JSON object")
    return spec
