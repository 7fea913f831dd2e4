"""Composed rateless erasure code: a sparse-graph precode followed by the
truncated real-time oblivious feedback protocol, plus a channel simulator."""

from .channel import ChannelConfig, SessionTranscript, run_session, run_trials
from .degree import (
    DegreePolicy,
    brute_force_optimal_degree,
    expected_symbols_bound,
    feedback_budget,
    optimal_degree,
    revealing_probability,
    theorem_symbols_bound,
)
from .inner import EncodingSymbol, FeedbackMessage, ProtocolError, Receiver, Sender, derive_indices
from .metrics import TranscriptMetrics, summarize
from .precode import PrecodeSpec, precode_decode, precode_encode
from .symbols import Symbol, XorCounter, xor, xor_accumulate

__version__ = "0.1.0"
