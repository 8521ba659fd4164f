"""Unequal error protection planning for semantic bit streams.

Plan per-bit repetition counts or block-code allocations that hold every
bit's decoded flip probability at or below its target, verify the plans
by Monte Carlo, and compare schemes by total blocklength.
"""

from .channel import (
    ChannelSpec,
    capacity_and_dispersion,
    coded_bit_flip_prob,
    q_function,
    q_inverse,
    transmit_awgn_bpsk,
    transmit_bsc,
)
from .estimators import BitUepPlanner, BlockUepPlanner
from .fbl import (
    BlerModel,
    block_error_rate,
    group_bler_estimate,
    margin_from_bler,
    merge_beneficial,
    merge_threshold,
    min_blocklength,
)
from .grouping import (
    DEFAULT_CONSTRAINTS,
    BlockGroup,
    BlockPlan,
    CodebookConstraints,
    RateTable,
    default_rate_table,
    fit_group_sizes,
    group_by_repetition,
    merge_levels,
    parse_rate,
    plan_block_uep,
    select_rates,
)
from .pipeline import (
    ComparisonReport,
    ExperimentConfig,
    Report,
    compare_schemes,
    emit_report,
    run_experiment,
    simulate_block_group,
)
from .profiles import (
    Permutation,
    ProtectionProfile,
    dump_profile,
    load_profile,
    permute_bits,
    sort_profile,
    synth_profile,
)
from .repetition import (
    PlanStats,
    RepetitionPlan,
    assign_repetitions,
    chernoff_rep_upper,
    decode_repetition,
    encode_repetition,
    min_repetitions,
    repetition_ber,
)
from .validation import PlanError, ProfileError, UepError

__version__ = "0.1.0"

__all__ = [
    "ChannelSpec",
    "capacity_and_dispersion",
    "coded_bit_flip_prob",
    "q_function",
    "q_inverse",
    "transmit_awgn_bpsk",
    "transmit_bsc",
    "BitUepPlanner",
    "BlockUepPlanner",
    "BlerModel",
    "block_error_rate",
    "group_bler_estimate",
    "margin_from_bler",
    "merge_beneficial",
    "merge_threshold",
    "min_blocklength",
    "DEFAULT_CONSTRAINTS",
    "BlockGroup",
    "BlockPlan",
    "CodebookConstraints",
    "RateTable",
    "default_rate_table",
    "fit_group_sizes",
    "group_by_repetition",
    "merge_levels",
    "parse_rate",
    "plan_block_uep",
    "select_rates",
    "ComparisonReport",
    "ExperimentConfig",
    "Report",
    "compare_schemes",
    "emit_report",
    "run_experiment",
    "simulate_block_group",
    "Permutation",
    "ProtectionProfile",
    "dump_profile",
    "load_profile",
    "permute_bits",
    "sort_profile",
    "synth_profile",
    "PlanStats",
    "RepetitionPlan",
    "assign_repetitions",
    "chernoff_rep_upper",
    "decode_repetition",
    "encode_repetition",
    "min_repetitions",
    "repetition_ber",
    "PlanError",
    "ProfileError",
    "UepError",
]
