"""Scikit-learn style front ends for the planners.

These wrappers hold channel parameters as constructor arguments, learn a
plan from a target profile in ``fit``, and (for the repetition scheme)
expose encoding and decoding as ``transform`` / ``inverse_transform`` so
the codec slots into sklearn pipelines and parameter searches. The
functional modules stay the source of truth; nothing here adds behavior.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .channel import ChannelSpec, coded_bit_flip_prob
from .fbl import BlerModel
from .grouping import DEFAULT_CONSTRAINTS, CodebookConstraints, RateTable, plan_block_uep
from .profiles import ProtectionProfile, sort_profile
from .repetition import assign_repetitions, decode_repetition, encode_repetition
from .validation import UepError, check_bits, check_mu_values

__all__ = ["BitUepPlanner", "BlockUepPlanner"]


def _channel_from_params(snr_db, p_trans_dbw, flip_prob) -> ChannelSpec:
    if flip_prob is not None:
        return ChannelSpec.from_flip_prob(flip_prob, p_trans_dbw)
    return ChannelSpec(snr_db=snr_db, p_trans_dbw=p_trans_dbw)


class BitUepPlanner(TransformerMixin, BaseEstimator):
    """Per-bit repetition codec planned from a target profile.

    Parameters
    ----------
    snr_db : float, default 0.0
        Channel SNR in dB; sets the coded-bit flip probability.
    p_trans_dbw : float, default 0.0
        Transmit power in dBW.
    flip_prob : float, optional
        Coded-bit flip probability given directly; overrides ``snr_db``.

    Attributes (after fit)
    ----------------------
    eps_ : float
        Coded-bit flip probability used for planning.
    reps_ : ndarray
        Repetition count per bit, original bit order.
    permutation_ : Permutation
        Sorted-order bookkeeping used internally by the codec.
    total_blocklength_ : int
        Channel uses needed per payload.
    """

    def __init__(self, snr_db: float = 0.0, p_trans_dbw: float = 0.0, flip_prob: float | None = None):
        self.snr_db = snr_db
        self.p_trans_dbw = p_trans_dbw
        self.flip_prob = flip_prob

    def fit(self, X, y=None):
        mu = check_mu_values(np.ravel(X))
        channel = _channel_from_params(self.snr_db, self.p_trans_dbw, self.flip_prob)
        profile, perm = sort_profile(ProtectionProfile(mu))
        self.eps_ = coded_bit_flip_prob(channel)
        self.plan_ = assign_repetitions(profile.mu, self.eps_)
        self.permutation_ = perm
        self.reps_ = perm.apply(self.plan_.reps, "inverse")
        self.total_blocklength_ = self.plan_.total_blocklength
        self.n_features_in_ = mu.size
        return self

    def _require_fit(self) -> None:
        if not hasattr(self, "plan_"):
            raise UepError("planner is not fitted; call fit(mu) first")

    def transform(self, X) -> np.ndarray:
        """Encode payload bits (original order) into the coded stream."""
        self._require_fit()
        bits = check_bits(X, length=self.n_features_in_)
        return encode_repetition(self.permutation_.apply(bits, "forward"), self.plan_)

    def inverse_transform(self, X) -> np.ndarray:
        """Majority-decode a coded stream back to payload bits."""
        self._require_fit()
        stream = check_bits(X, length=self.total_blocklength_)
        decoded = decode_repetition(stream, self.plan_)
        return self.permutation_.apply(decoded, "inverse")


class BlockUepPlanner(BaseEstimator):
    """Block-code allocation planned from a target profile.

    ``fit`` computes the full block plan (groups, sizes, rates, padding,
    singletons); there is no transform, because the default backend models
    block codes statistically rather than implementing a concrete codec.

    Attributes (after fit): ``eps_``, ``plan_``, ``permutation_``,
    ``total_blocklength_``.
    """

    def __init__(
        self,
        snr_db: float = 0.0,
        p_trans_dbw: float = 0.0,
        flip_prob: float | None = None,
        constraints: CodebookConstraints = DEFAULT_CONSTRAINTS,
        table: RateTable | None = None,
    ):
        self.snr_db = snr_db
        self.p_trans_dbw = p_trans_dbw
        self.flip_prob = flip_prob
        self.constraints = constraints
        self.table = table

    def fit(self, X, y=None):
        mu = check_mu_values(np.ravel(X))
        channel = _channel_from_params(self.snr_db, self.p_trans_dbw, self.flip_prob)
        profile, perm = sort_profile(ProtectionProfile(mu))
        self.eps_ = coded_bit_flip_prob(channel)
        self.plan_ = plan_block_uep(
            profile,
            self.eps_,
            BlerModel.from_channel(channel),
            self.constraints,
            table=self.table,
        )
        self.permutation_ = perm
        self.total_blocklength_ = self.plan_.total_blocklength
        self.n_features_in_ = mu.size
        return self
