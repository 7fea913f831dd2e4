"""Per-session cost counters and their aggregation across trials."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from fractions import Fraction


@dataclass
class TranscriptMetrics:
    symbols_sent: int = 0
    symbols_delivered: int = 0
    symbols_processed: int = 0
    symbols_decoded: int = 0
    symbols_discarded: int = 0
    feedback_sent: int = 0
    feedback_delivered: int = 0
    payload_xors_receiver: int = 0
    payload_xors_sender: int = 0
    precode_decode_xors: int = 0
    bitmap_lookups: int = 0
    elimination_fallback_used: bool = False
    encoder_memory_symbols: int = 0
    decode_success: bool = False

    def as_dict(self) -> dict[str, int | bool]:
        return asdict(self)

    def check(self) -> None:
        """Raise AssertionError if the counters are mutually inconsistent."""
        assert self.symbols_processed == self.symbols_decoded + self.symbols_discarded
        assert self.symbols_delivered <= self.symbols_sent
        assert self.feedback_delivered <= self.feedback_sent
        for f in fields(self):
            assert getattr(self, f.name) >= 0, f.name

    @property
    def decode_xors(self) -> int:
        """Receiver-side decoding work: inner payload XORs plus outer decode XORs."""
        return self.payload_xors_receiver + self.precode_decode_xors


METRIC_FIELDS = tuple(f.name for f in fields(TranscriptMetrics))


@dataclass(frozen=True)
class FieldSummary:
    mean: float
    variance: float  # sample variance, 0 for a single observation
    min: float
    max: float
    n: int
    exact_mean: Fraction

    @property
    def stderr(self) -> float:
        return math.sqrt(self.variance / self.n)


def _summarize_values(values) -> FieldSummary:
    n = len(values)
    total = sum(values)
    exact = Fraction(total, n)
    mean = float(exact)
    if n > 1:
        ss = sum((v - exact) ** 2 for v in values)
        var = float(ss / (n - 1))
    else:
        var = 0.0
    return FieldSummary(mean, var, min(values), max(values), n, exact)


def summarize(metrics_list) -> dict[str, FieldSummary]:
    """Mean, sample variance, min and max of every counter (booleans as 0/1)."""
    metrics_list = list(metrics_list)
    if not metrics_list:
        raise ValueError("cannot summarize an empty list of metrics")
    return {
        name: _summarize_values([int(getattr(m, name)) for m in metrics_list])
        for name in METRIC_FIELDS
    }
