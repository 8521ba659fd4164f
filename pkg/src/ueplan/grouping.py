"""Block-level protection planning: group bits, fit codebook sizes, pick rates.

The block scheme turns a per-bit repetition plan into a set of block codes
in three stages, all operating on the profile in ascending-target order:

1. Bits sharing a repetition count form candidate levels. Adjacent levels
   are merged while a finite-blocklength test says one shared codeword is
   shorter than two; otherwise the accumulated group is closed.
2. Each group is snapped to an allowed codebook size: undersized groups
   absorb their successors, oversized groups shed their weakest members
   onward, and the final short group takes bits from the singleton tail or
   is zero-padded when the profile runs out.
3. Each sized group gets the highest allowed code rate whose modeled flip
   probability still beats the group's most demanding target. Groups no
   allowed rate can serve fall back to per-bit repetition.

Bits whose target the raw channel already meets stay out of the block
stage entirely and are transmitted uncoded (singletons).
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .fbl import BlerModel, block_error_rate, group_bler_estimate, merge_beneficial
from .profiles import ProtectionProfile
from .repetition import (
    PlanStats,
    RepetitionPlan,
    assign_repetitions,
    repetition_ber,
)
from .validation import PlanError, UepError

__all__ = [
    "CodebookConstraints",
    "RateTable",
    "BlockGroup",
    "BlockPlan",
    "DEFAULT_CONSTRAINTS",
    "parse_rate",
    "default_rate_table",
    "group_by_repetition",
    "merge_levels",
    "fit_group_sizes",
    "select_rates",
    "plan_block_uep",
]


def parse_rate(value) -> Fraction:
    """Coerce a code rate to an exact Fraction in (0, 1].

    Accepts Fractions, ints, and strings like "2/3" or "0.5". Floats are
    rejected: 2/3 has no exact binary representation, and blocklengths
    n = ceil(k / r) must come out exact.
    """
    if isinstance(value, float):
        raise UepError(
            f"pass code rates as strings or Fractions, not floats ({value!r}); "
            "e.g. '2/3' instead of 0.6666666666666666"
        )
    try:
        rate = Fraction(value)
    except (ValueError, ZeroDivisionError) as exc:
        raise UepError(f"could not parse code rate {value!r}") from exc
    if not (0 < rate <= 1):
        raise UepError(f"code rate must lie in (0, 1], got {value!r}")
    return rate


@dataclass(frozen=True)
class CodebookConstraints:
    """Allowed codebook sizes and code rates for the block stage.

    Sizes are stored ascending, rates descending (the order rate selection
    tries them in).
    """

    sizes: tuple[int, ...]
    rates: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        sizes = tuple(int(s) for s in self.sizes)
        if not sizes or any(s < 1 for s in sizes):
            raise UepError(f"need at least one positive codebook size, got {self.sizes!r}")
        if len(set(sizes)) != len(sizes):
            raise UepError(f"duplicate codebook sizes in {self.sizes!r}")
        rates = tuple(parse_rate(r) for r in self.rates)
        if not rates:
            raise UepError("need at least one allowed code rate")
        if len(set(rates)) != len(rates):
            raise UepError(f"duplicate code rates in {self.rates!r}")
        object.__setattr__(self, "sizes", tuple(sorted(sizes)))
        object.__setattr__(self, "rates", tuple(sorted(rates, reverse=True)))


DEFAULT_CONSTRAINTS = CodebookConstraints(
    sizes=(128, 256, 512, 1024),
    rates=("3/4", "2/3", "15/24", "14/24", "13/24", "1/2", "1/3"),
)


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


def blocklength_for(k: int, rate: Fraction) -> int:
    """n = ceil(k / rate), computed in exact integer arithmetic."""
    return _ceil_div(int(k) * rate.denominator, rate.numerator)


@dataclass
class RateTable:
    """Modeled or measured decoded flip probability per (size, rate) pair."""

    entries: dict[tuple[int, Fraction], float]
    provenance: str = ""

    def lookup(self, k: int, rate: Fraction) -> float:
        try:
            return self.entries[(int(k), rate)]
        except KeyError:
            raise PlanError(
                f"rate table gap: no entry for size {k} at rate {rate}"
                + (f" ({self.provenance})" if self.provenance else "")
            ) from None

    def check_covers(self, constraints: CodebookConstraints) -> None:
        for k in constraints.sizes:
            for rate in constraints.rates:
                self.lookup(k, rate)

    def to_csv(self, sink: str | Path | IO[str]) -> None:
        if isinstance(sink, (str, Path)):
            with Path(sink).open("w") as fh:
                self.to_csv(fh)
            return
        sink.write("k,r,flip_prob\n")
        for (k, rate), p in sorted(self.entries.items()):
            sink.write(f"{k},{rate.numerator}/{rate.denominator},{p!r}\n")

    @classmethod
    def from_csv(cls, source: str | Path | IO[str], provenance: str = "") -> "RateTable":
        if isinstance(source, (str, Path)):
            path = Path(source)
            with path.open() as fh:
                return cls.from_csv(fh, provenance=provenance or str(path))
        entries: dict[tuple[int, Fraction], float] = {}
        for lineno, raw in enumerate(source.read().splitlines(), start=1):
            line = raw.strip()
            if not line or (lineno == 1 and line.lower().replace(" ", "") == "k,r,flip_prob"):
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise UepError(f"rate table line {lineno} is not 'k,r,flip_prob': {raw!r}")
            k = int(parts[0])
            rate = parse_rate(parts[1].strip())
            p = float(parts[2])
            if not (0.0 < p <= 1.0):
                raise UepError(f"rate table line {lineno}: flip probability {p!r} out of (0, 1]")
            entries[(k, rate)] = p
        if not entries:
            raise UepError("rate table is empty")
        return cls(entries=entries, provenance=provenance)


def default_rate_table(constraints: CodebookConstraints, model: BlerModel) -> RateTable:
    """Model-backed table: entry (k, r) is the BLER of a (ceil(k/r), k) code.

    Using the whole-block error rate as the per-bit bound is conservative;
    a failed block flips each bit with probability one half, so the true
    marginal is half the entry.
    """
    entries = {
        (k, rate): block_error_rate(model, blocklength_for(k, rate), k)
        for k in constraints.sizes
        for rate in constraints.rates
    }
    return RateTable(
        entries=entries,
        provenance=f"normal-approximation model (C={model.capacity!r}, V={model.dispersion!r})",
    )


def group_by_repetition(plan: RepetitionPlan) -> tuple[list[list[int]], list[int]]:
    """Split a repetition plan into per-level index lists plus singletons.

    Levels run from the largest count down to 3 in steps of two; levels no
    bit uses are kept as empty placeholders so positions line up with
    protection levels. Bits at count 1 go to the singleton list.
    """
    reps = plan.reps
    r_max = int(reps[0])
    levels = [
        [int(i) for i in np.flatnonzero(reps == level)]
        for level in range(r_max, 1, -2)
    ]
    singles = [int(i) for i in np.flatnonzero(reps == 1)]
    return levels, singles


def _should_merge(
    model: BlerModel, mu_a_min: float, size_a: int, mu_b_min: float, size_b: int
) -> bool:
    """Merge decision with the degenerate estimates handled explicitly.

    The closed-form threshold assumes both group BLER requirements sit
    below one half. When the accumulated group's estimate reaches 0.5 its
    margin is non-positive, so any ratio clears the threshold: merge.
    When only the weaker group's estimate does, the ratio diverges: split.
    """
    bler_a = group_bler_estimate(mu_a_min, size_a)
    bler_b = group_bler_estimate(mu_b_min, size_b)
    if bler_a >= 0.5:
        return True
    if bler_b >= 0.5:
        return False
    return merge_beneficial(model, bler_a, size_a, bler_b, size_b)


def merge_levels(
    levels: Sequence[Sequence[int]], profile: ProtectionProfile, model: BlerModel
) -> list[list[int]]:
    """Fold repetition levels into groups, merging while it shortens codes.

    Walks levels strongest-first with an accumulator: the next populated
    level either joins the accumulated group (when the merge test says a
    shared codeword is cheaper) or closes it and starts its own. Empty
    levels are skipped. The final accumulated group is always flushed.
    """
    if not profile.is_sorted:
        raise PlanError("merge_levels requires the profile sorted ascending")
    mu = profile.mu
    populated = [list(level) for level in levels if len(level)]
    if not populated:
        return []
    groups: list[list[int]] = []
    acc = populated[0]
    for nxt in populated[1:]:
        if _should_merge(
            model, float(mu[acc[0]]), len(acc), float(mu[nxt[0]]), len(nxt)
        ):
            acc = acc + nxt
        else:
            groups.append(acc)
            acc = nxt
    groups.append(acc)
    return groups


def _nearest_size(m: int, sizes: Sequence[int]) -> int:
    # Tie between two allowed sizes goes to the larger one.
    return min(sizes, key=lambda s: (abs(m - s), -s))


@dataclass(frozen=True)
class SizedGroup:
    """A group snapped to an allowed codebook size; pad counts filler bits."""

    members: tuple[int, ...]
    k: int
    pad: int = 0

    def __post_init__(self) -> None:
        members = tuple(int(i) for i in self.members)
        if not members:
            raise PlanError("sized group has no members")
        if any(b - a != 1 for a, b in zip(members, members[1:])):
            raise PlanError("group members must be consecutive sorted-profile indices")
        if self.k != len(members) + self.pad:
            raise PlanError(
                f"size bookkeeping off: k={self.k}, members={len(members)}, pad={self.pad}"
            )
        object.__setattr__(self, "members", members)


def fit_group_sizes(
    groups: Sequence[Sequence[int]],
    singles: Sequence[int],
    constraints: CodebookConstraints,
) -> tuple[list[SizedGroup], list[int], int]:
    """Snap merged groups to allowed sizes, preserving bit coverage.

    Each group aims for its nearest allowed size. While it is short and
    enough grouped bits remain, it absorbs the following groups; any
    excess over the target is shed onward to the next group (those are the
    weakest members, since everything is in ascending-target order). When
    the grouped bits run out, the last short group extends into the
    singleton tail, and only if the whole profile is exhausted is it
    zero-padded up to size.

    Returns the sized groups, the surviving singletons, and the total
    zero-pad count.
    """
    work: deque[list[int]] = deque(list(g) for g in groups if len(g))
    singles = [int(i) for i in singles]
    k_group_total = sum(len(g) for g in work)
    fitted: list[SizedGroup] = []
    pad_total = 0
    k_acc = 0
    while k_acc < k_group_total:
        grp = work.popleft()
        k_star = _nearest_size(len(grp), constraints.sizes)
        if len(grp) < k_star and k_acc + k_star <= k_group_total:
            while len(grp) < k_star and work:
                grp.extend(work.popleft())
        if len(grp) >= k_star:
            members, spill = grp[:k_star], grp[k_star:]
            if spill:
                if work:
                    work[0][0:0] = spill
                else:
                    work.appendleft(spill)
            fitted.append(SizedGroup(members=tuple(members), k=k_star))
        else:
            # Final short slice: absorb any leftover groups, then extend
            # into the singleton tail, then zero-pad whatever is missing.
            while work:
                grp.extend(work.popleft())
            take = min(k_star - len(grp), len(singles))
            members = grp + singles[:take]
            singles = singles[take:]
            pad = k_star - len(members)
            fitted.append(SizedGroup(members=tuple(members), k=k_star, pad=pad))
            pad_total += pad
        k_acc += k_star
    return fitted, singles, pad_total


@dataclass(frozen=True)
class BlockGroup:
    """One planned group: either a block code or a repetition fallback.

    ``achieved_flip_prob`` bounds the decoded flip probability of the most
    demanding member; for fallback groups the per-member bounds follow
    from ``reps`` instead.
    """

    members: tuple[int, ...]
    k: int
    n: int
    rate: Fraction | None
    achieved_flip_prob: float
    pad: int = 0
    reps: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        members = tuple(int(i) for i in self.members)
        if not members:
            raise PlanError("block group has no members")
        if any(b - a != 1 for a, b in zip(members, members[1:])):
            raise PlanError("group members must be consecutive sorted-profile indices")
        object.__setattr__(self, "members", members)
        if self.rate is None:
            if self.reps is None or len(self.reps) != len(members):
                raise PlanError("repetition fallback group needs one count per member")
            object.__setattr__(self, "reps", tuple(int(r) for r in self.reps))
            if self.n != sum(self.reps):
                raise PlanError("fallback blocklength must equal the sum of its counts")
            if self.k != len(members) or self.pad != 0:
                raise PlanError("fallback groups carry no padding; k must equal member count")
        else:
            if self.reps is not None:
                raise PlanError("coded group must not carry repetition counts")
            if self.n != blocklength_for(self.k, self.rate):
                raise PlanError(
                    f"blocklength mismatch: n={self.n} but ceil({self.k}/{self.rate}) "
                    f"= {blocklength_for(self.k, self.rate)}"
                )
            if self.k != len(members) + self.pad:
                raise PlanError(
                    f"size bookkeeping off: k={self.k}, members={len(members)}, pad={self.pad}"
                )

    @property
    def mode(self) -> str:
        return "coded" if self.rate is not None else "repetition"

    @property
    def start(self) -> int:
        return self.members[0]

    @property
    def stop(self) -> int:
        return self.members[-1] + 1


@dataclass(frozen=True)
class BlockPlan:
    """Complete block-level plan over a sorted profile."""

    groups: tuple[BlockGroup, ...]
    singletons: tuple[int, ...]
    eps: float
    k_total: int
    zero_padding: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "groups", tuple(self.groups))
        object.__setattr__(self, "singletons", tuple(int(i) for i in self.singletons))

    @property
    def total_blocklength(self) -> int:
        return sum(g.n for g in self.groups) + len(self.singletons)

    def bit_coverage(self) -> list[int]:
        covered: list[int] = []
        for g in self.groups:
            covered.extend(g.members)
        covered.extend(self.singletons)
        return covered

    def validate(
        self,
        profile: ProtectionProfile,
        constraints: CodebookConstraints | None = None,
        table: RateTable | None = None,
    ) -> None:
        """Raise PlanError unless this plan is sound for the given profile.

        Checks coverage (every bit exactly once), contiguity, protection
        (coded groups strictly beat their most demanding member's target;
        fallback members meet their own), singleton admissibility, and,
        when constraints or a table are given, membership and consistency.
        """
        if len(profile) != self.k_total:
            raise PlanError(f"plan covers {self.k_total} bits, profile has {len(profile)}")
        covered = self.bit_coverage()
        if sorted(covered) != list(range(self.k_total)):
            raise PlanError("plan does not cover each bit exactly once")
        mu = profile.mu
        for gi, g in enumerate(self.groups):
            mu_min = float(mu[g.members[0]])
            if min(g.members) != g.members[0]:
                raise PlanError(f"group {gi} members not ascending")
            if g.rate is not None:
                if g.achieved_flip_prob >= mu_min:
                    raise PlanError(
                        f"group {gi}: achieved flip probability {g.achieved_flip_prob!r} "
                        f"does not beat the most demanding target {mu_min!r}"
                    )
                if constraints is not None:
                    if g.k not in constraints.sizes:
                        raise PlanError(f"group {gi}: size {g.k} not allowed")
                    if g.rate not in constraints.rates:
                        raise PlanError(f"group {gi}: rate {g.rate} not allowed")
                if table is not None:
                    expected = table.lookup(g.k, g.rate)
                    if expected != g.achieved_flip_prob:
                        raise PlanError(
                            f"group {gi}: achieved {g.achieved_flip_prob!r} disagrees "
                            f"with table entry {expected!r}"
                        )
            else:
                for idx, r in zip(g.members, g.reps):
                    if repetition_ber(int(r), self.eps) > float(mu[idx]):
                        raise PlanError(
                            f"group {gi}: fallback count {r} misses target at bit {idx}"
                        )
        for idx in self.singletons:
            if self.eps > float(mu[idx]):
                raise PlanError(
                    f"singleton bit {idx} has target {float(mu[idx])!r} below "
                    f"the channel flip probability {self.eps!r}"
                )
        if self.zero_padding != sum(g.pad for g in self.groups):
            raise PlanError("zero-padding total disagrees with per-group pads")

    def to_json(self) -> str:
        def group_obj(g: BlockGroup) -> dict:
            return {
                "start": g.start,
                "stop": g.stop,
                "k": g.k,
                "n": g.n,
                "rate": None if g.rate is None else f"{g.rate.numerator}/{g.rate.denominator}",
                "achieved_flip_prob": g.achieved_flip_prob,
                "pad": g.pad,
                "reps": None if g.reps is None else list(g.reps),
            }

        singles_start = self.singletons[0] if self.singletons else self.k_total
        singles_stop = self.singletons[-1] + 1 if self.singletons else self.k_total
        return json.dumps(
            {
                "eps": self.eps,
                "k_total": self.k_total,
                "zero_padding": self.zero_padding,
                "total_blocklength": self.total_blocklength,
                "groups": [group_obj(g) for g in self.groups],
                "singletons": {"start": singles_start, "stop": singles_stop},
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "BlockPlan":
        data = json.loads(text)
        groups = []
        for obj in data["groups"]:
            members = tuple(range(int(obj["start"]), int(obj["stop"])))
            rate = None if obj["rate"] is None else parse_rate(obj["rate"])
            groups.append(
                BlockGroup(
                    members=members,
                    k=int(obj["k"]),
                    n=int(obj["n"]),
                    rate=rate,
                    achieved_flip_prob=float(obj["achieved_flip_prob"]),
                    pad=int(obj.get("pad", 0)),
                    reps=None if obj.get("reps") is None else tuple(obj["reps"]),
                )
            )
        s = data["singletons"]
        return cls(
            groups=tuple(groups),
            singletons=tuple(range(int(s["start"]), int(s["stop"]))),
            eps=float(data["eps"]),
            k_total=int(data["k_total"]),
            zero_padding=int(data["zero_padding"]),
        )


def select_rates(
    fitted: Sequence[SizedGroup],
    profile: ProtectionProfile,
    table: RateTable,
    constraints: CodebookConstraints,
    eps: float,
) -> list[BlockGroup]:
    """Give each sized group the highest admissible rate, or fall back.

    A rate qualifies when the table's flip probability at (k, rate) is
    strictly below the group's most demanding target. When even the lowest
    allowed rate misses, the group reverts to per-bit repetition; being a
    contiguous ascending slice, its members re-plan independently.
    """
    mu = profile.mu
    blocks: list[BlockGroup] = []
    for sg in fitted:
        mu_min = float(mu[sg.members[0]])
        chosen = None
        for rate in constraints.rates:
            entry = table.lookup(sg.k, rate)
            if entry < mu_min:
                chosen = (rate, entry)
                break
        if chosen is not None:
            rate, entry = chosen
            blocks.append(
                BlockGroup(
                    members=sg.members,
                    k=sg.k,
                    n=blocklength_for(sg.k, rate),
                    rate=rate,
                    achieved_flip_prob=entry,
                    pad=sg.pad,
                )
            )
        else:
            sub = assign_repetitions(mu[list(sg.members)], eps)
            blocks.append(
                BlockGroup(
                    members=sg.members,
                    k=len(sg.members),
                    n=sub.total_blocklength,
                    rate=None,
                    achieved_flip_prob=repetition_ber(int(sub.reps[0]), eps),
                    reps=tuple(int(r) for r in sub.reps),
                )
            )
    return blocks


def plan_block_uep(
    profile: ProtectionProfile,
    eps: float,
    model: BlerModel,
    constraints: CodebookConstraints = DEFAULT_CONSTRAINTS,
    table: RateTable | None = None,
    *,
    stats: PlanStats | None = None,
) -> BlockPlan:
    """Full block-level plan for a sorted profile.

    Runs the repetition assignment, level grouping, merge, size fitting,
    and rate selection stages in order. ``table`` defaults to the
    model-backed rate table; a measured table must cover every (size,
    rate) combination in the constraints.
    """
    if not profile.is_sorted:
        raise PlanError("plan_block_uep requires the profile sorted ascending")
    rep_plan = assign_repetitions(profile.mu, eps, stats=stats)
    levels, singles = group_by_repetition(rep_plan)
    merged = merge_levels(levels, profile, model)
    fitted, singles_left, pad_total = fit_group_sizes(merged, singles, constraints)
    if table is None:
        table = default_rate_table(constraints, model)
    else:
        table.check_covers(constraints)
    blocks = select_rates(fitted, profile, table, constraints, eps=eps)
    return BlockPlan(
        groups=tuple(blocks),
        singletons=tuple(singles_left),
        eps=eps,
        k_total=len(profile),
        zero_padding=sum(b.pad for b in blocks),
    )
