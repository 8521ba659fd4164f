"""Block-level planning: merging, size fitting, rate selection, plan validity."""

import io
from fractions import Fraction

import numpy as np
import pytest

from ueplan.fbl import BlerModel, block_error_rate, group_bler_estimate
from ueplan.grouping import (
    DEFAULT_CONSTRAINTS,
    BlockGroup,
    BlockPlan,
    CodebookConstraints,
    RateTable,
    SizedGroup,
    _nearest_size,
    blocklength_for,
    default_rate_table,
    fit_group_sizes,
    group_by_repetition,
    merge_levels,
    parse_rate,
    plan_block_uep,
    select_rates,
)
from ueplan.profiles import ProtectionProfile, sort_profile, synth_profile
from ueplan.repetition import assign_repetitions, repetition_ber
from ueplan.validation import PlanError, UepError

ZERO_DB = BlerModel.from_snr_db(0.0)
EPS_0DB = 0.07864960352514258


def demo_profile():
    """64 bits in three plateaus: 16 strong, 16 medium, 32 uncoded-ready."""
    return synth_profile(
        {
            "K": 64,
            "generator": "segments",
            "params": {"levels": [[1e-4, 0.25], [1e-2, 0.25], [0.4, 0.5]]},
        }
    )


# ------------------------------------------------------------------- rates

def test_parse_rate():
    assert parse_rate("3/4") == Fraction(3, 4)
    assert parse_rate(Fraction(1, 2)) == Fraction(1, 2)
    # 15/24 is the same code rate as 5/8; Fraction normalizes it
    assert parse_rate("15/24") == Fraction(5, 8)
    # decimal strings are exact rationals, float objects are not welcome
    assert parse_rate("0.75") == Fraction(3, 4)
    with pytest.raises(UepError):
        parse_rate(0.75)
    with pytest.raises(UepError):
        parse_rate("3/0")
    with pytest.raises(UepError):
        parse_rate("-1/2")
    with pytest.raises(UepError):
        parse_rate("nonsense")


def test_blocklength_for_is_exact_ceiling():
    assert blocklength_for(128, Fraction(5, 8)) == 205
    assert blocklength_for(128, Fraction(1, 2)) == 256
    assert blocklength_for(1, Fraction(3, 4)) == 2
    # k * den / num with no float in sight: 10^15 + 1 over 1/3 stays exact
    assert blocklength_for(10**15 + 1, Fraction(1, 3)) == 3 * (10**15 + 1)


def test_default_constraints():
    assert DEFAULT_CONSTRAINTS.sizes == (128, 256, 512, 1024)
    assert DEFAULT_CONSTRAINTS.rates[0] == Fraction(3, 4)
    assert DEFAULT_CONSTRAINTS.rates[-1] == Fraction(1, 3)
    assert Fraction(5, 8) in DEFAULT_CONSTRAINTS.rates  # 15/24 normalized
    assert len(DEFAULT_CONSTRAINTS.rates) == 7


def test_constraints_validation():
    with pytest.raises(UepError):
        CodebookConstraints(sizes=(), rates=("1/2",))
    with pytest.raises(UepError):
        CodebookConstraints(sizes=(128,), rates=())
    with pytest.raises(UepError):
        CodebookConstraints(sizes=(0,), rates=("1/2",))
    with pytest.raises(UepError):
        CodebookConstraints(sizes=(128,), rates=("5/4",))


def test_rate_table_round_trip():
    table = default_rate_table(DEFAULT_CONSTRAINTS, ZERO_DB)
    buf = io.StringIO()
    table.to_csv(buf)
    back = RateTable.from_csv(io.StringIO(buf.getvalue()))
    assert back.entries == table.entries


def test_rate_table_pinned_entry():
    table = default_rate_table(DEFAULT_CONSTRAINTS, ZERO_DB)
    assert table.lookup(128, Fraction(5, 8)) == pytest.approx(
        8.373443790512754e-6, rel=1e-12
    )
    assert table.lookup(128, Fraction(5, 8)) == block_error_rate(ZERO_DB, 205, 128)


def test_rate_table_gap_detection():
    table = RateTable(entries={(128, Fraction(1, 2)): 1e-4}, provenance="test")
    with pytest.raises(PlanError, match="gap"):
        table.lookup(256, Fraction(1, 2))
    with pytest.raises(PlanError):
        table.check_covers(DEFAULT_CONSTRAINTS)
    table.check_covers(CodebookConstraints(sizes=(128,), rates=("1/2",)))


# ---------------------------------------------------------------- grouping

def test_group_by_repetition_keeps_empty_levels():
    plan = assign_repetitions(np.array([1e-4] * 2 + [1e-2] * 3 + [0.4] * 2), EPS_0DB)
    assert list(plan.reps) == [11, 11, 5, 5, 5, 1, 1]
    levels, singles = group_by_repetition(plan)
    # levels for 11, 9, 7, 5, 3 in that order
    assert levels == [[0, 1], [], [], [2, 3, 4], []]
    assert singles == [5, 6]


def test_merge_levels_demo():
    profile = demo_profile()
    plan = assign_repetitions(profile.mu, EPS_0DB)
    levels, singles = group_by_repetition(plan)
    merged = merge_levels(levels, profile, ZERO_DB)
    # the 16 strong and 16 medium bits share one codeword
    assert merged == [list(range(32))]
    assert singles == list(range(32, 64))


def test_merge_levels_splits_when_ratio_too_large():
    # a very strict plateau next to a much looser one: the margin ratio
    # clears the threshold, so separate codewords win
    mu = np.array([1e-9] * 200 + [6e-4] * 200)
    profile = ProtectionProfile(mu)
    plan = assign_repetitions(profile.mu, 0.2)
    levels, _ = group_by_repetition(plan)
    merged = merge_levels(levels, profile, BlerModel.from_snr_db(-1.0))
    assert len(merged) == 2
    assert merged[0] == list(range(200))
    assert merged[1] == list(range(200, 400))


def test_merge_levels_requires_sorted():
    prof = ProtectionProfile(np.array([0.2, 0.1]))
    with pytest.raises(PlanError):
        merge_levels([[0], [1]], prof, ZERO_DB)


def test_merge_levels_degenerate_weak_side():
    # the weaker plateau's group estimate saturates past 0.5: keep it apart
    mu = np.array([1e-6] * 64 + [0.01] * 512)
    profile = ProtectionProfile(mu)
    bler_weak = group_bler_estimate(0.01, 512)
    assert bler_weak > 0.5
    merged = merge_levels([list(range(64)), list(range(64, 576))], profile, ZERO_DB)
    assert len(merged) == 2


# ------------------------------------------------------------- size fitting

def test_nearest_size_tie_prefers_larger():
    assert _nearest_size(192, (128, 256)) == 256
    assert _nearest_size(150, (128, 256)) == 128
    assert _nearest_size(1, (128, 256)) == 128


def test_sized_group_requires_consecutive_members():
    with pytest.raises(PlanError):
        SizedGroup(members=(0, 2), k=2)
    with pytest.raises(PlanError):
        SizedGroup(members=(0, 1), k=4, pad=1)
    sg = SizedGroup(members=(3, 4, 5), k=4, pad=1)
    assert sg.k == 4


def test_fit_exact_size_passes_through():
    fitted, singles, pad = fit_group_sizes(
        [list(range(128))], [128, 129], DEFAULT_CONSTRAINTS
    )
    assert [(g.k, g.pad) for g in fitted] == [(128, 0)]
    assert singles == [128, 129]
    assert pad == 0


def test_fit_undersize_absorbs_following_group():
    groups = [list(range(100)), list(range(100, 180))]
    fitted, singles, pad = fit_group_sizes(groups, list(range(180, 300)), DEFAULT_CONSTRAINTS)
    # first group pulls in the second to reach 128, sheds 52 onward; the
    # leftover 52 extend into the singleton tail
    assert [g.k for g in fitted] == [128, 128]
    assert fitted[0].members == tuple(range(128))
    assert fitted[1].members == tuple(range(128, 256))
    assert pad == 0
    assert singles == list(range(256, 300))


def test_fit_oversize_sheds_tail():
    fitted, singles, pad = fit_group_sizes([list(range(300))], [], DEFAULT_CONSTRAINTS)
    # 300 snaps to 256, the 44 weakest go on alone and end up padded
    assert [g.k for g in fitted] == [256, 128]
    assert fitted[0].members == tuple(range(256))
    assert fitted[1].members == tuple(range(256, 300))
    assert fitted[1].pad == 84
    assert pad == 84
    assert singles == []


def test_fit_final_slice_absorbs_singles_then_pads():
    fitted, singles, pad = fit_group_sizes(
        [list(range(32))], list(range(32, 64)), DEFAULT_CONSTRAINTS
    )
    assert len(fitted) == 1
    assert fitted[0].members == tuple(range(64))
    assert fitted[0].k == 128
    assert fitted[0].pad == 64
    assert singles == []
    assert pad == 64


def test_fit_preserves_coverage():
    rng = np.random.default_rng(31)
    for _ in range(20):
        sizes = rng.integers(1, 700, size=int(rng.integers(1, 6)))
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        groups = [list(range(bounds[i], bounds[i + 1])) for i in range(len(sizes))]
        n_singles = int(rng.integers(0, 400))
        singles = list(range(bounds[-1], bounds[-1] + n_singles))
        fitted, left, pad = fit_group_sizes(groups, singles, DEFAULT_CONSTRAINTS)
        seen = [i for g in fitted for i in g.members] + left
        assert sorted(seen) == list(range(bounds[-1] + n_singles))
        assert pad == sum(g.pad for g in fitted)
        for g in fitted:
            assert g.k in DEFAULT_CONSTRAINTS.sizes


# ----------------------------------------------------------- rate selection

def test_select_rates_demo_group():
    profile = demo_profile()
    table = default_rate_table(DEFAULT_CONSTRAINTS, ZERO_DB)
    sg = SizedGroup(members=tuple(range(64)), k=128, pad=64)
    blocks = select_rates([sg], profile, table, DEFAULT_CONSTRAINTS, eps=EPS_0DB)
    (b,) = blocks
    assert b.rate == Fraction(5, 8)
    assert b.n == 205
    assert b.achieved_flip_prob == pytest.approx(8.373443790512754e-6, rel=1e-12)
    assert b.mode == "coded"


def test_select_rates_strict_inequality():
    cons = CodebookConstraints(sizes=(4,), rates=("1/2", "1/3"))
    table = RateTable(
        entries={(4, Fraction(1, 2)): 0.01, (4, Fraction(1, 3)): 0.0099},
        provenance="test",
    )
    profile = ProtectionProfile(np.full(4, 0.01))
    sg = SizedGroup(members=(0, 1, 2, 3), k=4)
    (b,) = select_rates([sg], profile, table, cons, eps=0.05)
    # the half-rate entry equals the target exactly: not good enough
    assert b.rate == Fraction(1, 3)


def test_select_rates_fallback_to_repetition():
    cons = CodebookConstraints(sizes=(4,), rates=("1/2",))
    table = RateTable(entries={(4, Fraction(1, 2)): 0.5}, provenance="test")
    profile = ProtectionProfile(np.array([1e-3, 5e-3, 0.05, 0.2]))
    sg = SizedGroup(members=(0, 1, 2, 3), k=4)
    (b,) = select_rates([sg], profile, table, cons, eps=0.1)
    assert b.mode == "repetition"
    assert b.rate is None
    assert b.reps == (9, 7, 3, 1)
    assert b.n == 20
    assert b.k == 4 and b.pad == 0
    assert b.achieved_flip_prob == pytest.approx(repetition_ber(9, 0.1))


# ------------------------------------------------------------- plan objects

def test_block_group_validation():
    with pytest.raises(PlanError):
        BlockGroup(members=(), k=0, n=0, rate=Fraction(1, 2), achieved_flip_prob=0.1)
    with pytest.raises(PlanError):  # n inconsistent with rate
        BlockGroup(members=(0, 1), k=2, n=5, rate=Fraction(1, 2), achieved_flip_prob=0.1)
    with pytest.raises(PlanError):  # fallback needs reps
        BlockGroup(members=(0, 1), k=2, n=6, rate=None, achieved_flip_prob=0.1)
    with pytest.raises(PlanError):  # coded group with reps
        BlockGroup(
            members=(0, 1), k=2, n=4, rate=Fraction(1, 2),
            achieved_flip_prob=0.1, reps=(3, 1),
        )
    with pytest.raises(PlanError):  # fallback with padding
        BlockGroup(
            members=(0, 1), k=3, n=4, rate=None,
            achieved_flip_prob=0.1, pad=1, reps=(3, 1),
        )


def test_plan_demo_end_to_end():
    profile = demo_profile()
    plan = plan_block_uep(profile, EPS_0DB, ZERO_DB)
    assert len(plan.groups) == 1
    g = plan.groups[0]
    assert g.start == 0 and g.stop == 64
    assert g.k == 128 and g.pad == 64
    assert g.rate == Fraction(5, 8)
    assert g.n == 205
    assert plan.singletons == ()
    assert plan.zero_padding == 64
    assert plan.total_blocklength == 205
    plan.validate(profile, DEFAULT_CONSTRAINTS, default_rate_table(DEFAULT_CONSTRAINTS, ZERO_DB))


def test_plan_beats_bit_level_on_demo():
    profile = demo_profile()
    rep_total = assign_repetitions(profile.mu, EPS_0DB).total_blocklength
    block_total = plan_block_uep(profile, EPS_0DB, ZERO_DB).total_blocklength
    assert block_total < rep_total


def test_plan_json_round_trip():
    profile = demo_profile()
    plan = plan_block_uep(profile, EPS_0DB, ZERO_DB)
    back = BlockPlan.from_json(plan.to_json())
    assert back == plan
    back.validate(profile)


def test_plan_requires_sorted_profile():
    prof = ProtectionProfile(np.array([0.3, 0.1, 0.2]))
    with pytest.raises(PlanError):
        plan_block_uep(prof, 0.1, ZERO_DB)
    srt, _ = sort_profile(prof)
    plan = plan_block_uep(srt, 0.1, ZERO_DB)
    plan.validate(srt)


def test_validate_catches_tampering():
    profile = demo_profile()
    plan = plan_block_uep(profile, EPS_0DB, ZERO_DB)
    g = plan.groups[0]

    missing = BlockPlan(
        groups=(), singletons=plan.singletons, eps=plan.eps, k_total=plan.k_total
    )
    with pytest.raises(PlanError, match="exactly once"):
        missing.validate(profile)

    lied = BlockPlan(
        groups=(
            BlockGroup(
                members=g.members, k=g.k, n=g.n, rate=g.rate,
                achieved_flip_prob=0.1, pad=g.pad,
            ),
        ),
        singletons=plan.singletons,
        eps=plan.eps,
        k_total=plan.k_total,
        zero_padding=plan.zero_padding,
    )
    with pytest.raises(PlanError, match="does not beat"):
        lied.validate(profile)
    table = default_rate_table(DEFAULT_CONSTRAINTS, ZERO_DB)
    with pytest.raises(PlanError, match="disagrees"):
        BlockPlan(
            groups=(
                BlockGroup(
                    members=g.members, k=g.k, n=g.n, rate=g.rate,
                    achieved_flip_prob=g.achieved_flip_prob / 2, pad=g.pad,
                ),
            ),
            singletons=plan.singletons,
            eps=plan.eps,
            k_total=plan.k_total,
            zero_padding=plan.zero_padding,
        ).validate(profile, table=table)


def test_validate_rejects_weak_singleton():
    profile = ProtectionProfile(np.array([1e-3]))
    plan = BlockPlan(groups=(), singletons=(0,), eps=0.1, k_total=1)
    with pytest.raises(PlanError, match="singleton"):
        plan.validate(profile)


def test_plan_larger_profiles_stay_valid():
    table = default_rate_table(DEFAULT_CONSTRAINTS, ZERO_DB)
    for seed in range(4):
        prof = synth_profile(
            {
                "K": 512,
                "generator": "log_uniform",
                "params": {"low": 1e-6, "high": 0.4},
                "seed": seed,
            }
        )
        srt, _ = sort_profile(prof)
        plan = plan_block_uep(srt, EPS_0DB, ZERO_DB)
        plan.validate(srt, DEFAULT_CONSTRAINTS, table)


def test_plan_all_singletons():
    prof = ProtectionProfile(np.full(10, 0.4))
    plan = plan_block_uep(prof, 0.1, ZERO_DB)
    assert plan.groups == ()
    assert plan.singletons == tuple(range(10))
    assert plan.total_blocklength == 10
    plan.validate(prof)
