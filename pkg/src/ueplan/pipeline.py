"""Monte Carlo experiment runner, constraint checking, and report emission.

A run takes a profile and a channel, builds the requested scheme's plan in
sorted-target order, simulates a number of independent payload trials, and
reports per-bit empirical flip rates back in original bit order. Trials
are simulated in fixed-size chunks, each chunk drawing from a generator
seeded by (root seed, chunk index); results therefore depend only on the
root seed, not on how chunks might be distributed over workers, and any
rerun with the same configuration is byte-identical.

Block codes are simulated through the normal-approximation model: a block
fails with its modeled BLER, and a failed block flips each carried bit
with probability one half (so the marginal per-bit flip rate is half the
model entry). Swap in a concrete codec by passing a different
``block_backend`` to :func:`run_experiment`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import IO, Callable, Sequence

import numpy as np

from .channel import ChannelSpec, coded_bit_flip_prob, transmit_awgn_bpsk, transmit_bsc
from .fbl import BlerModel, block_error_rate
from .grouping import (
    DEFAULT_CONSTRAINTS,
    BlockGroup,
    BlockPlan,
    CodebookConstraints,
    RateTable,
    blocklength_for,
    fit_group_sizes,
    group_by_repetition,
    merge_levels,
    parse_rate,
    plan_block_uep,
)
from .profiles import ProtectionProfile, sort_profile
from .repetition import (
    RepetitionPlan,
    assign_repetitions,
    decode_repetition,
    encode_repetition,
)
from .validation import PlanError, UepError, check_bits

__all__ = [
    "SCHEMES",
    "CHANNEL_MODES",
    "ExperimentConfig",
    "Report",
    "ComparisonReport",
    "simulate_block_group",
    "run_experiment",
    "compare_schemes",
    "emit_report",
]

SCHEMES = ("bit_uep", "block_uep", "fixed_repetition", "equal_rate_block")
CHANNEL_MODES = ("bsc", "awgn", "genie")

# Rows per simulation chunk: bounded by a total-elements budget so huge
# codewords do not blow up memory, capped so small runs still vectorize.
_CHUNK_ELEMENT_BUDGET = 1 << 22
_CHUNK_ROW_CAP = 16384


@dataclass
class ExperimentConfig:
    """Everything one simulation run needs.

    ``payload`` optionally pins the transmitted bits (original bit order,
    reused every trial); by default each trial draws a fresh uniform
    payload. ``rate`` only applies to equal_rate_block, ``r_fix`` only to
    fixed_repetition.
    """

    profile: ProtectionProfile
    channel: ChannelSpec
    scheme: str = "bit_uep"
    trials: int = 10_000
    seed: int = 0
    channel_mode: str = "bsc"
    r_fix: int | None = None
    rate: Fraction | str | None = None
    constraints: CodebookConstraints = field(default_factory=lambda: DEFAULT_CONSTRAINTS)
    table: RateTable | None = None
    payload: np.ndarray | None = None
    label: str = ""

    def __post_init__(self) -> None:
        if self.scheme not in SCHEMES:
            raise UepError(f"unknown scheme {self.scheme!r}; pick one of {SCHEMES}")
        if self.channel_mode not in CHANNEL_MODES:
            raise UepError(
                f"unknown channel mode {self.channel_mode!r}; pick one of {CHANNEL_MODES}"
            )
        if int(self.trials) < 1:
            raise UepError(f"need at least one trial, got {self.trials}")
        if int(self.seed) < 0:
            raise UepError(f"seed must be non-negative, got {self.seed}")
        if self.scheme == "fixed_repetition":
            if self.r_fix is None or int(self.r_fix) < 1 or int(self.r_fix) % 2 == 0:
                raise UepError("fixed_repetition needs an odd positive r_fix")
        if self.scheme == "equal_rate_block":
            if self.rate is None:
                raise UepError("equal_rate_block needs a rate")
            self.rate = parse_rate(self.rate)
        if self.payload is not None:
            self.payload = check_bits(self.payload, length=len(self.profile))

    @property
    def scheme_label(self) -> str:
        if self.label:
            return self.label
        if self.scheme == "fixed_repetition":
            return f"fixed_repetition[R={int(self.r_fix)}]"
        if self.scheme == "equal_rate_block":
            return f"equal_rate_block[r={self.rate}]"
        return self.scheme


def simulate_block_group(
    bits,
    n: int,
    k: int,
    model: BlerModel,
    table_entry: float,
    rng,
    *,
    bler_override: float | None = None,
) -> np.ndarray:
    """Send one group's info bits through the model-based block backend.

    The whole block fails with probability BLER(n, k) (or the injected
    override); a failed block flips each info bit independently with
    probability one half, a successful one passes them through untouched.
    ``table_entry`` is the flip-probability bound recorded in the plan and
    must not be exceeded by the model (guards against a stale table).
    Accepts a single bit vector or a matrix of per-trial rows.
    """
    arr = check_bits(bits)
    if arr.shape[-1] > k:
        raise UepError(f"group carries {arr.shape[-1]} bits but codebook size is {k}")
    bler = float(bler_override) if bler_override is not None else block_error_rate(model, n, k)
    if bler_override is None and bler > float(table_entry) * (1 + 1e-9):
        raise PlanError(
            f"model BLER {bler!r} exceeds the planned bound {table_entry!r} for (n={n}, k={k})"
        )
    single = arr.ndim == 1
    rows = np.atleast_2d(arr)
    fail = rng.random(rows.shape[0]) < bler
    flips = (rng.random(rows.shape) < 0.5) & fail[:, None]
    out = rows ^ flips.astype(np.uint8)
    return out[0] if single else out


def _send(bits: np.ndarray, channel: ChannelSpec, eps: float, mode: str, rng) -> np.ndarray:
    if mode == "genie":
        return bits
    if mode == "bsc":
        return transmit_bsc(bits, eps, rng)
    return transmit_awgn_bpsk(bits, channel, rng)


def _chunk_rows(cost_per_row: int) -> int:
    return max(1, min(_CHUNK_ROW_CAP, _CHUNK_ELEMENT_BUDGET // max(1, cost_per_row)))


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(chunk_index)]))


def _payload(rows: int, k: int, fixed: np.ndarray | None, rng) -> np.ndarray:
    if fixed is None:
        return rng.integers(0, 2, size=(rows, k), dtype=np.uint8)
    return np.broadcast_to(fixed, (rows, k))


def _rep_chunk(
    rows: int,
    fixed: np.ndarray | None,
    plan: RepetitionPlan,
    channel: ChannelSpec,
    eps: float,
    mode: str,
    rng,
) -> np.ndarray:
    payload = _payload(rows, len(plan), fixed, rng)
    received = _send(encode_repetition(payload, plan), channel, eps, mode, rng)
    decoded = decode_repetition(received, plan)
    return (decoded != payload).sum(axis=0, dtype=np.int64)


def _block_chunk(
    rows: int,
    fixed: np.ndarray | None,
    plan: BlockPlan,
    model: BlerModel,
    channel: ChannelSpec,
    eps: float,
    mode: str,
    rng,
    backend: Callable | None,
) -> np.ndarray:
    payload = _payload(rows, plan.k_total, fixed, rng)
    out = payload.copy()
    for g in plan.groups:
        cols = slice(g.start, g.stop)
        if g.rate is not None:
            if mode == "genie":
                continue
            if backend is not None:
                out[:, cols] = backend(payload[:, cols], g.n, g.k, model, g.achieved_flip_prob, rng)
            else:
                bler = block_error_rate(model, g.n, g.k)
                fail = rng.random(rows) < bler
                flips = (rng.random((rows, g.stop - g.start)) < 0.5) & fail[:, None]
                out[:, cols] = payload[:, cols] ^ flips.astype(np.uint8)
        else:
            sub = RepetitionPlan(reps=np.asarray(g.reps, dtype=np.int64), eps=plan.eps)
            received = _send(encode_repetition(payload[:, cols], sub), channel, eps, mode, rng)
            out[:, cols] = decode_repetition(received, sub)
    if plan.singletons:
        cols = slice(plan.singletons[0], plan.singletons[-1] + 1)
        out[:, cols] = _send(payload[:, cols], channel, eps, mode, rng)
    return (out != payload).sum(axis=0, dtype=np.int64)


def _equal_rate_plan(
    profile: ProtectionProfile,
    eps: float,
    model: BlerModel,
    constraints: CodebookConstraints,
    rate: Fraction,
) -> BlockPlan:
    """Same grouping as the block scheme, but every group at one rate."""
    rep_plan = assign_repetitions(profile.mu, eps)
    levels, singles = group_by_repetition(rep_plan)
    merged = merge_levels(levels, profile, model)
    fitted, singles_left, _ = fit_group_sizes(merged, singles, constraints)
    groups = []
    for sg in fitted:
        n = blocklength_for(sg.k, rate)
        groups.append(
            BlockGroup(
                members=sg.members,
                k=sg.k,
                n=n,
                rate=rate,
                achieved_flip_prob=block_error_rate(model, n, sg.k),
                pad=sg.pad,
            )
        )
    return BlockPlan(
        groups=tuple(groups),
        singletons=tuple(singles_left),
        eps=eps,
        k_total=len(profile),
        zero_padding=sum(g.pad for g in groups),
    )


@dataclass
class Report:
    """Per-bit outcome of one simulation run, in original bit order."""

    scheme: str
    k: int
    trials: int
    seed: int
    channel_mode: str
    eps: float
    total_blocklength: int
    mu: np.ndarray
    empirical: np.ndarray
    labels: list[str]
    n_contribution: np.ndarray
    violations: list[int]
    satisfied: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "scheme": self.scheme,
                "k": int(self.k),
                "trials": int(self.trials),
                "seed": int(self.seed),
                "channel_mode": self.channel_mode,
                "eps": float(self.eps),
                "total_blocklength": int(self.total_blocklength),
                "satisfied": bool(self.satisfied),
                "violations": [int(i) for i in self.violations],
                "bits": [
                    {
                        "bit_index": i,
                        "mu": float(self.mu[i]),
                        "empirical": float(self.empirical[i]),
                        "R_or_group": self.labels[i],
                        "n_contribution": float(self.n_contribution[i]),
                    }
                    for i in range(self.k)
                ],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "Report":
        data = json.loads(text)
        bits = data["bits"]
        return cls(
            scheme=data["scheme"],
            k=int(data["k"]),
            trials=int(data["trials"]),
            seed=int(data["seed"]),
            channel_mode=data["channel_mode"],
            eps=float(data["eps"]),
            total_blocklength=int(data["total_blocklength"]),
            mu=np.asarray([b["mu"] for b in bits]),
            empirical=np.asarray([b["empirical"] for b in bits]),
            labels=[b["R_or_group"] for b in bits],
            n_contribution=np.asarray([b["n_contribution"] for b in bits]),
            violations=[int(i) for i in data["violations"]],
            satisfied=bool(data["satisfied"]),
        )

    def to_csv(self, sink: IO[str]) -> None:
        sink.write("bit_index,mu,empirical,R_or_group,n_contribution\n")
        for i in range(self.k):
            sink.write(
                f"{i},{float(self.mu[i])!r},{float(self.empirical[i])!r},"
                f"{self.labels[i]},{float(self.n_contribution[i])!r}\n"
            )

    def to_plotdata(self, sink: IO[str]) -> None:
        sink.write("total_blocklength,scheme\n")
        sink.write(f"{int(self.total_blocklength)},{self.scheme}\n")


def _violations(counts: np.ndarray, mu: np.ndarray, trials: int) -> list[int]:
    allowance = trials * mu + 3.0 * np.sqrt(trials * mu * (1.0 - mu))
    return [int(i) for i in np.flatnonzero(counts > allowance)]


def run_experiment(cfg: ExperimentConfig, *, block_backend: Callable | None = None) -> Report:
    """Simulate one scheme and report per-bit empirical flip rates.

    A bit counts as violating its target when its error count exceeds the
    binomial three-sigma allowance trials * mu + 3 * sqrt(trials * mu *
    (1 - mu)); the report's ``satisfied`` flag is the conjunction over all
    bits.
    """
    sorted_profile, perm = sort_profile(cfg.profile)
    eps = coded_bit_flip_prob(cfg.channel)
    model = BlerModel.from_channel(cfg.channel)
    k = len(sorted_profile)
    trials = int(cfg.trials)

    fixed = None
    if cfg.payload is not None:
        fixed = perm.apply(cfg.payload, "forward")

    if cfg.scheme in ("bit_uep", "fixed_repetition"):
        if cfg.scheme == "bit_uep":
            plan = assign_repetitions(sorted_profile.mu, eps)
        else:
            plan = RepetitionPlan(
                reps=np.full(k, int(cfg.r_fix), dtype=np.int64), eps=eps
            )
        labels_sorted = [f"R={int(r)}" for r in plan.reps]
        contrib_sorted = plan.reps.astype(np.float64)
        total = plan.total_blocklength
        cost = total

        def chunk(rows: int, rng) -> np.ndarray:
            return _rep_chunk(rows, fixed, plan, cfg.channel, eps, cfg.channel_mode, rng)

    else:
        if cfg.scheme == "block_uep":
            bplan = plan_block_uep(
                sorted_profile, eps, model, cfg.constraints, table=cfg.table
            )
        else:
            bplan = _equal_rate_plan(
                sorted_profile, eps, model, cfg.constraints, cfg.rate
            )
        labels_sorted = [""] * k
        contrib_sorted = np.zeros(k)
        for gi, g in enumerate(bplan.groups):
            tag = f"group{gi}" if g.rate is not None else f"group{gi}-rep"
            for j, idx in enumerate(g.members):
                labels_sorted[idx] = tag
                contrib_sorted[idx] = (
                    g.n / len(g.members) if g.rate is not None else float(g.reps[j])
                )
        for idx in bplan.singletons:
            labels_sorted[idx] = "single"
            contrib_sorted[idx] = 1.0
        total = bplan.total_blocklength
        cost = max(k, 1)

        def chunk(rows: int, rng) -> np.ndarray:
            return _block_chunk(
                rows, fixed, bplan, model, cfg.channel, eps, cfg.channel_mode, rng,
                block_backend,
            )

    rows_per_chunk = _chunk_rows(cost)
    counts_sorted = np.zeros(k, dtype=np.int64)
    done = 0
    index = 0
    while done < trials:
        rows = min(rows_per_chunk, trials - done)
        counts_sorted += chunk(rows, _chunk_rng(cfg.seed, index))
        done += rows
        index += 1

    counts = perm.apply(counts_sorted, "inverse")
    empirical = counts / trials
    labels = [labels_sorted[p] for p in perm.inverse]
    contrib = perm.apply(contrib_sorted, "inverse")
    mu = cfg.profile.mu
    viol = _violations(counts, mu, trials) if cfg.channel_mode != "genie" else (
        [int(i) for i in np.flatnonzero(counts > 0)]
    )
    return Report(
        scheme=cfg.scheme_label,
        k=k,
        trials=trials,
        seed=int(cfg.seed),
        channel_mode=cfg.channel_mode,
        eps=float(eps),
        total_blocklength=int(total),
        mu=mu.copy(),
        empirical=empirical,
        labels=labels,
        n_contribution=contrib,
        violations=viol,
        satisfied=not viol,
    )


@dataclass
class ComparisonReport:
    """One summary row per scheme, sharing a profile and channel."""

    rows: list[dict]
    reports: list[Report] = field(default_factory=list, repr=False)

    def to_json(self) -> str:
        return json.dumps({"schemes": self.rows})

    @classmethod
    def from_json(cls, text: str) -> "ComparisonReport":
        return cls(rows=json.loads(text)["schemes"])

    def to_csv(self, sink: IO[str]) -> None:
        sink.write("scheme,total_blocklength,violations,max_excess,mean_empirical,satisfied\n")
        for row in self.rows:
            sink.write(
                f"{row['scheme']},{row['total_blocklength']},{row['violations']},"
                f"{row['max_excess']!r},{row['mean_empirical']!r},{row['satisfied']}\n"
            )

    def to_plotdata(self, sink: IO[str]) -> None:
        sink.write("total_blocklength,scheme\n")
        for row in self.rows:
            sink.write(f"{row['total_blocklength']},{row['scheme']}\n")


def compare_schemes(
    configs: Sequence[ExperimentConfig], *, block_backend: Callable | None = None
) -> ComparisonReport:
    """Run several schemes over the same profile and summarize them."""
    if not configs:
        raise UepError("nothing to compare: no configurations given")
    k = len(configs[0].profile)
    if any(len(c.profile) != k for c in configs):
        raise UepError("all compared configurations must share one profile length")
    reports = [run_experiment(c, block_backend=block_backend) for c in configs]
    rows = []
    for rep in reports:
        sigma = np.sqrt(rep.mu * (1.0 - rep.mu) / rep.trials)
        excess = rep.empirical - (rep.mu + 3.0 * sigma)
        rows.append(
            {
                "scheme": rep.scheme,
                "total_blocklength": int(rep.total_blocklength),
                "violations": len(rep.violations),
                "max_excess": float(max(0.0, float(np.max(excess)))),
                "mean_empirical": float(np.mean(rep.empirical)),
                "satisfied": bool(rep.satisfied),
            }
        )
    return ComparisonReport(rows=rows, reports=reports)


def emit_report(report, sink: str | Path | IO[str], fmt: str = "json") -> None:
    """Write a Report or ComparisonReport as json, csv, or plotdata."""
    if isinstance(sink, (str, Path)):
        with Path(sink).open("w") as fh:
            emit_report(report, fh, fmt)
        return
    if fmt == "json":
        sink.write(report.to_json())
        sink.write("\n")
    elif fmt == "csv":
        report.to_csv(sink)
    elif fmt == "plotdata":
        report.to_plotdata(sink)
    else:
        raise UepError(f"unknown report format {fmt!r}; pick json, csv, or plotdata")
