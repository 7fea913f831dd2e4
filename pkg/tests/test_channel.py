import json
import math
from collections import defaultdict

import pytest

from rtoec.channel import ChannelConfig, random_message, run_session, run_trials
from rtoec.degree import DegreePolicy, expected_symbols_bound, feedback_budget, optimal_degree, revealing_probability
from rtoec.precode import PrecodeSpec


def session(k_prime=900, gamma=0.1, size=1, seed=0, **cfg):
    spec = PrecodeSpec(k_prime, gamma)
    policy = DegreePolicy.create(spec.k, gamma)
    msg = random_message(k_prime, size, seed)
    return spec, policy, msg, run_session(policy, spec, msg, ChannelConfig(rng_seed=seed, **cfg))


def test_round_trip_lossless():
    spec, policy, msg, tr = session()
    m = tr.metrics
    assert m.decode_success and tr.recovered == msg
    assert m.symbols_decoded == policy.target == math.ceil(0.9 * 1125)
    assert m.encoder_memory_symbols == 1125
    assert m.feedback_sent == m.feedback_delivered == feedback_budget(1125, 0.1)
    m.check()


def test_transcript_tallies():
    *_, tr = session(seed=3, forward_erasure_prob=0.3)
    m = tr.metrics
    assert m.symbols_sent == tr.tally("sent")
    assert m.symbols_sent - m.symbols_delivered == tr.tally("erased")
    assert m.symbols_processed == tr.tally("processed")
    assert m.symbols_decoded == tr.tally("decoded")
    assert m.symbols_discarded == tr.tally("discarded")
    assert m.feedback_sent == tr.tally("feedback_sent")
    ticks = [e.tick for e in tr.events]
    assert ticks == sorted(ticks)


def test_operation_accounting():
    spec, policy, msg, tr = session(seed=4)
    degrees = {}
    cur = None
    for e in tr.events:
        if e.kind == "processed":
            cur = e.data["degree"]
        elif e.kind == "decoded":
            degrees[e.data["position"]] = cur
    assert tr.metrics.payload_xors_receiver == sum(d - 1 for d in degrees.values())
    sent = [e.data["degree"] for e in tr.events if e.kind == "sent"]
    assert tr.metrics.payload_xors_sender == sum(d - 1 for d in sent)
    assert tr.metrics.bitmap_lookups == sum(
        e.data["degree"] for e in tr.events if e.kind == "processed")


def test_determinism():
    a = session(seed=9, forward_erasure_prob=0.2, feedback_latency=5, feedback_loss_prob=0.2)[3]
    b = session(seed=9, forward_erasure_prob=0.2, feedback_latency=5, feedback_loss_prob=0.2)[3]
    assert a.events_jsonl() == b.events_jsonl()
    assert a.metrics_json() == b.metrics_json()


def test_export_formats():
    *_, tr = session(k_prime=400, gamma=0.15, seed=1)
    lines = tr.events_jsonl().splitlines()
    first = json.loads(lines[0])
    assert first == {"v": 1, "tick": 0, "event": "sent", "degree": 1, "seed": first["seed"]}
    flat = json.loads(tr.metrics_json())
    assert flat["v"] == 1 and flat["symbols_decoded"] == tr.metrics.symbols_decoded
    assert all(isinstance(v, (int, bool)) for v in flat.values())


def test_mismatched_policy():
    spec = PrecodeSpec(900, 0.1)
    with pytest.raises(ValueError):
        run_session(DegreePolicy.create(1200, 0.1), spec, random_message(900, 1, 0))
    with pytest.raises(ValueError):
        run_session(DegreePolicy.create(1125, 0.1), spec, random_message(899, 1, 0))


def test_bad_config():
    with pytest.raises(ValueError):
        ChannelConfig(forward_erasure_prob=1.0)
    with pytest.raises(ValueError):
        ChannelConfig(feedback_latency=-1)


def test_erasures_double_sent_count():
    spec = PrecodeSpec(900, 0.1)
    a = run_trials(spec, ChannelConfig(), 60, seed=1)
    b = run_trials(spec, ChannelConfig(forward_erasure_prob=0.5), 60, seed=2)
    assert b.mean("symbols_sent") / a.mean("symbols_sent") == pytest.approx(2, rel=0.08)
    se = math.hypot(a.summary["symbols_processed"].stderr, b.summary["symbols_processed"].stderr)
    assert abs(a.mean("symbols_processed") - b.mean("symbols_processed")) <= 3 * se


@pytest.mark.parametrize("latency", [1, 5, 20, 100, 400])
def test_latency_never_corrupts(latency):
    for seed in range(3):
        spec, policy, msg, tr = session(k_prime=500, seed=seed, feedback_latency=latency,
                                        feedback_loss_prob=0.2, forward_erasure_prob=0.1)
        m = tr.metrics
        assert not tr.aborted
        assert not m.decode_success or tr.recovered == msg
        assert m.feedback_sent <= feedback_budget(spec.k, spec.gamma) + tr.retransmissions
        m.check()


def test_congestion_probe_lossless_latency():
    spec, policy, msg, tr = session(seed=2, feedback_latency=30)
    assert tr.recovered == msg
    assert tr.metrics.feedback_sent <= feedback_budget(spec.k, 0.1) + tr.retransmissions
    assert tr.metrics.feedback_delivered == tr.metrics.feedback_sent


def test_run_trials_single_and_repeat():
    spec = PrecodeSpec(500, 0.1)
    one = run_trials(spec, ChannelConfig(), 1, seed=5)
    assert one.summary["symbols_processed"].mean == one.metrics[0].symbols_processed
    assert one.summary["symbols_processed"].variance == 0
    again = run_trials(spec, ChannelConfig(), 1, seed=5)
    assert one.metrics == again.metrics
    with pytest.raises(ValueError):
        run_trials(spec, ChannelConfig(), 0)


def test_run_trials_workers_match_serial():
    spec = PrecodeSpec(500, 0.1)
    a = run_trials(spec, ChannelConfig(), 6, seed=8)
    b = run_trials(spec, ChannelConfig(), 6, seed=8, workers=2)
    assert a.metrics == b.metrics


def test_mean_processed_below_bound():
    spec = PrecodeSpec(800, 0.1)
    res = run_trials(spec, ChannelConfig(), 200, seed=11)
    assert res.mean("symbols_processed") <= expected_symbols_bound(1000, 0.1)


def test_per_degree_reveal_rate():
    """Processed counts per degree band match sum of 1/p(d(r), r)."""
    spec = PrecodeSpec(900, 0.1)
    policy = DegreePolicy.create(spec.k, 0.1)
    processed = defaultdict(int)
    decoded = defaultdict(int)
    n = 40
    for seed in range(n):
        msg = random_message(900, 1, seed)
        tr = run_session(policy, spec, msg, ChannelConfig(rng_seed=seed))
        for e in tr.events:
            if e.kind == "processed":
                d = e.data["degree"]
                assert d == optimal_degree(spec.k, e.data["r"])
                processed[d] += 1
            elif e.kind == "decoded":
                decoded[d] += 1
    for d in processed:
        rs = [r for r in range(policy.target) if optimal_degree(spec.k, r) == d]
        ps = [revealing_probability(spec.k, r, d) for r in rs]
        mean = n * sum(1 / p for p in ps)
        sd = math.sqrt(n * sum((1 - p) / p**2 for p in ps))
        assert abs(processed[d] - mean) <= 3 * sd, d
        assert decoded[d] / processed[d] >= 1 / math.e
