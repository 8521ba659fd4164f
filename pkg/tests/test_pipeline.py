"""Simulation pipeline: schemes, chunked Monte Carlo, reports, comparisons."""

import io
import math

import numpy as np
import pytest

from ueplan.channel import ChannelSpec
from ueplan.fbl import BlerModel, block_error_rate
from ueplan.pipeline import (
    ComparisonReport,
    ExperimentConfig,
    Report,
    _chunk_rng,
    compare_schemes,
    emit_report,
    run_experiment,
    simulate_block_group,
)
from ueplan.profiles import ProtectionProfile, synth_profile
from ueplan.repetition import repetition_ber
from ueplan.validation import PlanError, UepError

EPS_TENTH = ChannelSpec.from_flip_prob(0.1)
ZERO_DB_CH = ChannelSpec(snr_db=0.0)


def fixture_profile():
    # deliberately out of order so the permutation bookkeeping is exercised
    return ProtectionProfile(np.array([0.05, 1e-3, 0.2, 5e-3]))


def demo_profile():
    return synth_profile(
        {
            "K": 64,
            "generator": "segments",
            "params": {"levels": [[1e-4, 0.25], [1e-2, 0.25], [0.4, 0.5]]},
        }
    )


def three_sigma(p, trials):
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)


# ------------------------------------------------------------ configuration

def test_config_validation():
    prof = fixture_profile()
    with pytest.raises(UepError):
        ExperimentConfig(profile=prof, channel=EPS_TENTH, scheme="magic")
    with pytest.raises(UepError):
        ExperimentConfig(profile=prof, channel=EPS_TENTH, channel_mode="noisy")
    with pytest.raises(UepError):
        ExperimentConfig(profile=prof, channel=EPS_TENTH, trials=0)
    with pytest.raises(UepError):
        ExperimentConfig(profile=prof, channel=EPS_TENTH, seed=-1)
    with pytest.raises(UepError):
        ExperimentConfig(profile=prof, channel=EPS_TENTH, scheme="fixed_repetition", r_fix=4)
    with pytest.raises(UepError):
        ExperimentConfig(profile=prof, channel=EPS_TENTH, scheme="fixed_repetition")
    with pytest.raises(UepError):
        ExperimentConfig(profile=prof, channel=EPS_TENTH, scheme="equal_rate_block")
    with pytest.raises(UepError):
        ExperimentConfig(profile=prof, channel=EPS_TENTH, payload=np.zeros(3, dtype=np.uint8))


def test_scheme_labels():
    prof = fixture_profile()
    assert ExperimentConfig(profile=prof, channel=EPS_TENTH).scheme_label == "bit_uep"
    assert (
        ExperimentConfig(
            profile=prof, channel=EPS_TENTH, scheme="fixed_repetition", r_fix=9
        ).scheme_label
        == "fixed_repetition[R=9]"
    )
    assert (
        ExperimentConfig(
            profile=prof, channel=EPS_TENTH, scheme="equal_rate_block", rate="15/24"
        ).scheme_label
        == "equal_rate_block[r=5/8]"
    )
    assert (
        ExperimentConfig(profile=prof, channel=EPS_TENTH, label="mine").scheme_label
        == "mine"
    )


# ------------------------------------------------------------------ bit UEP

def test_bit_uep_run():
    cfg = ExperimentConfig(profile=fixture_profile(), channel=EPS_TENTH, trials=20_000, seed=7)
    rep = run_experiment(cfg)
    assert rep.total_blocklength == 20
    assert rep.labels == ["R=3", "R=9", "R=1", "R=7"]
    assert rep.n_contribution.tolist() == [3.0, 9.0, 1.0, 7.0]
    assert rep.eps == 0.1
    assert rep.satisfied and rep.violations == []
    expected = [repetition_ber(3, 0.1), repetition_ber(9, 0.1), 0.1, repetition_ber(7, 0.1)]
    for emp, ber in zip(rep.empirical, expected):
        assert abs(emp - ber) <= three_sigma(ber, cfg.trials)


def test_determinism_and_seed_sensitivity():
    prof = fixture_profile()
    a = run_experiment(ExperimentConfig(profile=prof, channel=EPS_TENTH, trials=20_000, seed=3))
    b = run_experiment(ExperimentConfig(profile=prof, channel=EPS_TENTH, trials=20_000, seed=3))
    assert a.to_json() == b.to_json()
    c = run_experiment(ExperimentConfig(profile=prof, channel=EPS_TENTH, trials=20_000, seed=4))
    assert not np.array_equal(a.empirical, c.empirical)


def test_chunked_run_spans_multiple_chunks():
    # 20000 trials of a 20-symbol codeword split across two chunks of 16384
    # rows; a third run with the row cap's worth of trials must agree with
    # the first chunk of the longer run on nothing but determinism grounds
    cfg = ExperimentConfig(profile=fixture_profile(), channel=EPS_TENTH, trials=20_000, seed=3)
    again = ExperimentConfig(profile=fixture_profile(), channel=EPS_TENTH, trials=20_000, seed=3)
    assert run_experiment(cfg).to_json() == run_experiment(again).to_json()


def test_chunk_rng_streams():
    a = _chunk_rng(5, 0).random(4)
    b = _chunk_rng(5, 0).random(4)
    c = _chunk_rng(5, 1).random(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_fixed_payload_supported():
    prof = fixture_profile()
    payload = np.array([1, 0, 1, 1], dtype=np.uint8)
    cfg = ExperimentConfig(
        profile=prof, channel=EPS_TENTH, trials=20_000, seed=2, payload=payload
    )
    rep = run_experiment(cfg)
    assert rep.satisfied


def test_genie_mode_error_free():
    cfg = ExperimentConfig(
        profile=fixture_profile(), channel=EPS_TENTH, trials=5_000, channel_mode="genie"
    )
    rep = run_experiment(cfg)
    assert np.all(rep.empirical == 0.0)
    assert rep.satisfied


def test_awgn_mode_meets_targets():
    prof = ProtectionProfile(np.array([1e-3, 0.02, 0.3]))
    cfg = ExperimentConfig(
        profile=prof, channel=ZERO_DB_CH, trials=20_000, seed=5, channel_mode="awgn"
    )
    rep = run_experiment(cfg)
    assert rep.eps == pytest.approx(0.07864960352514258)
    assert rep.satisfied


def test_fixed_repetition_scheme():
    prof = ProtectionProfile(np.array([0.1, 0.1]))
    cfg = ExperimentConfig(
        profile=prof, channel=EPS_TENTH, scheme="fixed_repetition", r_fix=3,
        trials=20_000, seed=1,
    )
    rep = run_experiment(cfg)
    assert rep.total_blocklength == 6
    assert rep.labels == ["R=3", "R=3"]
    ber = repetition_ber(3, 0.1)
    for emp in rep.empirical:
        assert abs(emp - ber) <= three_sigma(ber, cfg.trials)


# ---------------------------------------------------------------- block UEP

def test_block_uep_run_demo():
    cfg = ExperimentConfig(
        profile=demo_profile(), channel=ZERO_DB_CH, scheme="block_uep",
        trials=20_000, seed=9,
    )
    rep = run_experiment(cfg)
    assert rep.total_blocklength == 205
    assert set(rep.labels) == {"group0"}
    assert rep.n_contribution.sum() == pytest.approx(205.0)
    assert rep.satisfied


def test_block_uep_forced_failures_violate():
    def always_fail(bits, n, k, model, entry, rng):
        return simulate_block_group(bits, n, k, model, entry, rng, bler_override=1.0)

    cfg = ExperimentConfig(
        profile=demo_profile(), channel=ZERO_DB_CH, scheme="block_uep",
        trials=4_000, seed=9,
    )
    rep = run_experiment(cfg, block_backend=always_fail)
    assert not rep.satisfied
    # every coded bit flips about half the time, far beyond any target here
    assert len(rep.violations) == 64
    assert np.all(np.abs(rep.empirical - 0.5) < 0.05)


def test_equal_rate_block_scheme():
    cfg = ExperimentConfig(
        profile=demo_profile(), channel=ZERO_DB_CH, scheme="equal_rate_block",
        rate="1/3", trials=10_000, seed=4,
    )
    rep = run_experiment(cfg)
    assert rep.total_blocklength == 384  # one size-128 group at rate 1/3
    assert rep.satisfied


def test_block_uep_genie_no_errors():
    cfg = ExperimentConfig(
        profile=demo_profile(), channel=ZERO_DB_CH, scheme="block_uep",
        trials=2_000, channel_mode="genie",
    )
    rep = run_experiment(cfg)
    assert np.all(rep.empirical == 0.0)
    assert rep.satisfied


# ----------------------------------------------------- block group backend

def test_simulate_block_group_override_extremes():
    rng = np.random.default_rng(0)
    bits = rng.integers(0, 2, size=(200, 64), dtype=np.uint8)
    model = BlerModel.from_snr_db(0.0)
    clean = simulate_block_group(
        bits, 256, 128, model, 1e-9, np.random.default_rng(1), bler_override=0.0
    )
    assert np.array_equal(clean, bits)
    noisy = simulate_block_group(
        bits, 256, 128, model, 1e-9, np.random.default_rng(2), bler_override=1.0
    )
    flip_rate = float((noisy ^ bits).mean())
    assert abs(flip_rate - 0.5) < 0.02


def test_simulate_block_group_guards():
    model = BlerModel.from_snr_db(0.0)
    bits = np.zeros(64, dtype=np.uint8)
    # table entry smaller than what the model can deliver: refuse to run
    with pytest.raises(PlanError):
        simulate_block_group(bits, 140, 128, model, 1e-9, np.random.default_rng(0))
    with pytest.raises(UepError):
        simulate_block_group(np.zeros(200, dtype=np.uint8), 256, 128, model, 0.5,
                             np.random.default_rng(0))


def test_simulate_block_group_single_vector():
    model = BlerModel.from_snr_db(0.0)
    bits = np.ones(32, dtype=np.uint8)
    out = simulate_block_group(
        bits, 256, 128, model, 1e-9, np.random.default_rng(3), bler_override=0.0
    )
    assert out.shape == (32,)


# ----------------------------------------------------------------- reports

def test_report_json_round_trip():
    cfg = ExperimentConfig(profile=fixture_profile(), channel=EPS_TENTH, trials=2_000, seed=0)
    rep = run_experiment(cfg)
    back = Report.from_json(rep.to_json())
    assert back.to_json() == rep.to_json()
    assert back.scheme == "bit_uep"
    assert back.labels == rep.labels


def test_report_csv_and_plotdata():
    cfg = ExperimentConfig(profile=fixture_profile(), channel=EPS_TENTH, trials=2_000, seed=0)
    rep = run_experiment(cfg)
    buf = io.StringIO()
    rep.to_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "bit_index,mu,empirical,R_or_group,n_contribution"
    assert len(lines) == 5
    assert lines[1].startswith("0,0.05,")
    buf = io.StringIO()
    rep.to_plotdata(buf)
    assert buf.getvalue() == "total_blocklength,scheme\n20,bit_uep\n"


def test_emit_report_to_path_and_stream(tmp_path):
    cfg = ExperimentConfig(profile=fixture_profile(), channel=EPS_TENTH, trials=1_000, seed=0)
    rep = run_experiment(cfg)
    path = tmp_path / "report.json"
    emit_report(rep, path, "json")
    assert Report.from_json(path.read_text()).to_json() == rep.to_json()
    buf = io.StringIO()
    emit_report(rep, buf, "csv")
    assert buf.getvalue().startswith("bit_index,")
    with pytest.raises(UepError):
        emit_report(rep, io.StringIO(), "xml")


# -------------------------------------------------------------- comparison

def test_compare_schemes_rows():
    prof = demo_profile()
    configs = [
        ExperimentConfig(profile=prof, channel=ZERO_DB_CH, trials=4_000, seed=1),
        ExperimentConfig(
            profile=prof, channel=ZERO_DB_CH, scheme="block_uep", trials=4_000, seed=1
        ),
    ]
    comp = compare_schemes(configs)
    assert [r["scheme"] for r in comp.rows] == ["bit_uep", "block_uep"]
    bit_row, block_row = comp.rows
    assert block_row["total_blocklength"] < bit_row["total_blocklength"]
    for row in comp.rows:
        assert set(row) == {
            "scheme", "total_blocklength", "violations", "max_excess",
            "mean_empirical", "satisfied",
        }
        assert row["satisfied"]
        assert row["max_excess"] == 0.0

    back = ComparisonReport.from_json(comp.to_json())
    assert back.rows == comp.rows
    buf = io.StringIO()
    comp.to_csv(buf)
    assert buf.getvalue().splitlines()[0] == (
        "scheme,total_blocklength,violations,max_excess,mean_empirical,satisfied"
    )
    buf = io.StringIO()
    comp.to_plotdata(buf)
    assert len(buf.getvalue().splitlines()) == 3


def test_compare_schemes_input_checks():
    with pytest.raises(UepError):
        compare_schemes([])
    short = ProtectionProfile(np.array([0.1]))
    long = ProtectionProfile(np.array([0.1, 0.2]))
    with pytest.raises(UepError):
        compare_schemes(
            [
                ExperimentConfig(profile=short, channel=EPS_TENTH, trials=10),
                ExperimentConfig(profile=long, channel=EPS_TENTH, trials=10),
            ]
        )
