"""Deterministic discrete-event simulation of one sender, one receiver, a
forward erasure channel and a feedback channel.

Time advances one forward-symbol slot per tick. In each tick the sender emits
one encoding symbol, the channel erases or delivers it, the receiver processes
it, and feedback due at the end of the tick reaches the sender. A feedback
message sent in tick ``t`` is due at the end of tick ``t + feedback_latency``.
"""

from __future__ import annotations

import json
import random
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .degree import DegreePolicy
from .inner import FeedbackMessage, Receiver, Sender
from .metrics import FieldSummary, TranscriptMetrics, summarize
from .precode import PrecodeSpec, precode_decode, precode_encode
from .symbols import Symbol

TRANSCRIPT_FORMAT_VERSION = 1

# Stale symbols tolerated before re-sending a pending feedback message: ceil(3e).
RETRANSMIT_TIMEOUT = 9


@dataclass(frozen=True)
class ChannelConfig:
    forward_erasure_prob: float = 0.0
    feedback_loss_prob: float = 0.0
    feedback_latency: int = 0
    rng_seed: int = 0
    max_ticks: int | None = None  # None: 200 * k + 10_000

    def __post_init__(self):
        if not 0 <= self.forward_erasure_prob < 1:
            raise ValueError(f"forward_erasure_prob must be in [0, 1), got {self.forward_erasure_prob}")
        if not 0 <= self.feedback_loss_prob < 1:
            raise ValueError(f"feedback_loss_prob must be in [0, 1), got {self.feedback_loss_prob}")
        if not isinstance(self.feedback_latency, int) or self.feedback_latency < 0:
            raise ValueError(f"feedback_latency must be a nonnegative integer, got {self.feedback_latency}")


class Event(NamedTuple):
    tick: int
    kind: str
    data: dict


@dataclass
class SessionTranscript:
    metrics: TranscriptMetrics
    events: list[Event] = field(default_factory=list)
    recovered: list[Symbol] | None = None
    retransmissions: int = 0
    feedback_ignored: int = 0
    aborted: bool = False

    def tally(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)

    def events_jsonl(self) -> str:
        lines = []
        for e in self.events:
            rec = {"v": TRANSCRIPT_FORMAT_VERSION, "tick": e.tick, "event": e.kind}
            rec.update(e.data)
            lines.append(json.dumps(rec, sort_keys=False))
        return "\n".join(lines) + ("\n" if lines else "")

    def metrics_json(self) -> str:
        rec = {"v": TRANSCRIPT_FORMAT_VERSION, **self.metrics.as_dict()}
        return json.dumps(rec)


class _FeedbackAgent:
    """Receiver-side feedback policy under a lossy or slow feedback channel.

    Tracks the sender's degree as seen on arriving symbols. An increment is
    sent on every degree change the receiver cannot already account for, and
    re-sent when ``timeout`` further stale symbols arrive; the timeout doubles
    after each retransmission and is re-based on the measured round trip when
    an increment is confirmed.
    """

    def __init__(self):
        self.observed = 1
        self.unconfirmed: deque[int] = deque()
        self.clock = 0  # symbols delivered to the receiver
        self.last_send = 0
        self.base_timeout = RETRANSMIT_TIMEOUT
        self.timeout = RETRANSMIT_TIMEOUT
        self.terminate_sent = False

    def observe(self, degree: int) -> None:
        self.clock += 1
        if degree > self.observed:
            for _ in range(min(degree - self.observed, len(self.unconfirmed))):
                rtt = self.clock - self.unconfirmed.popleft()
                self.base_timeout = max(RETRANSMIT_TIMEOUT, 2 * rtt)
            self.timeout = self.base_timeout
            self.observed = degree

    def _stamp(self) -> None:
        self.last_send = self.clock

    def on_increment(self, desired: int) -> bool:
        """Whether a fresh degree change needs a message on the wire."""
        if self.observed + len(self.unconfirmed) >= desired:
            return False
        self.unconfirmed.append(self.clock)
        self._stamp()
        return True

    def on_stale(self, desired: int) -> bool:
        """Whether a symbol below the desired degree triggers a re-send."""
        if self.observed >= desired or self.clock - self.last_send < self.timeout:
            return False
        self._stamp()
        self.timeout *= 2
        return True

    def on_after_complete(self) -> bool:
        if not self.terminate_sent:
            self.terminate_sent = True
            self._stamp()
            self.timeout = self.base_timeout
            return True
        if self.clock - self.last_send < self.timeout:
            return False
        self._stamp()
        self.timeout *= 2
        return True


def _seeds(rng_seed: int) -> tuple[int, int]:
    a, b = np.random.SeedSequence(rng_seed).generate_state(2, dtype=np.uint64)
    return int(a), int(b)


def run_session(
    policy: DegreePolicy,
    spec: PrecodeSpec,
    message,
    config: ChannelConfig = ChannelConfig(),
    record_events: bool = True,
) -> SessionTranscript:
    """Run the composed code end to end over the simulated channels."""
    if policy.k != spec.k or abs(policy.gamma - float(spec.gamma)) > 1e-12:
        raise ValueError(
            f"policy (k={policy.k}, gamma={policy.gamma}) does not match "
            f"precode (k={spec.k}, gamma={spec.gamma})"
        )
    if len(message) != spec.k_prime:
        raise ValueError(f"message has {len(message)} symbols, expected {spec.k_prime}")
    message = [Symbol(m) for m in message]
    symbol_size = len(message[0])
    channel_seed, sender_seed = _seeds(config.rng_seed)
    chan = random.Random(channel_seed)
    max_ticks = config.max_ticks if config.max_ticks is not None else 200 * spec.k + 10_000

    m = TranscriptMetrics(encoder_memory_symbols=spec.k)
    tr = SessionTranscript(m)
    events = tr.events
    log = events.append if record_events else (lambda e: None)

    codeword = precode_encode(spec, message)
    sender = Sender(codeword, policy, seed=sender_seed)
    receiver = Receiver(policy, symbol_size)
    agent = _FeedbackAgent()
    in_flight: deque[tuple[int, FeedbackMessage]] = deque()
    p_erase = config.forward_erasure_prob
    p_loss = config.feedback_loss_prob
    latency = config.feedback_latency

    def send_feedback(tick: int, msg: FeedbackMessage, retransmit: bool) -> None:
        m.feedback_sent += 1
        if retransmit:
            tr.retransmissions += 1
        log(Event(tick, "feedback_sent", {"msg": msg.name, "retransmit": retransmit}))
        if p_loss and chan.random() < p_loss:
            log(Event(tick, "feedback_lost", {"msg": msg.name}))
            return
        in_flight.append((tick + latency, msg))

    tick = 0
    while not sender.terminated:
        if tick >= max_ticks:
            tr.aborted = True
            log(Event(tick, "aborted", {}))
            break
        sym = sender.next_symbol()
        m.symbols_sent += 1
        log(Event(tick, "sent", {"degree": sym.degree, "seed": sym.index_seed}))

        if p_erase and chan.random() < p_erase:
            log(Event(tick, "erased", {}))
        else:
            m.symbols_delivered += 1
            agent.observe(sym.degree)
            if receiver.is_complete():
                if agent.on_after_complete():
                    send_feedback(tick, FeedbackMessage.TERMINATE, True)
            else:
                r_before = receiver.r
                out = receiver.process(sym)
                m.symbols_processed += 1
                log(Event(tick, "processed", {"r": r_before, "degree": sym.degree}))
                if out.decoded:
                    m.symbols_decoded += 1
                    log(Event(tick, "decoded", {"position": out.position, "r": receiver.r}))
                else:
                    m.symbols_discarded += 1
                    log(Event(tick, "discarded", {}))
                fb = out.feedback
                if fb is FeedbackMessage.TERMINATE:
                    agent.on_after_complete()
                    send_feedback(tick, fb, False)
                elif fb is FeedbackMessage.INCREMENT_DEGREE:
                    if agent.on_increment(receiver.desired_degree):
                        send_feedback(tick, fb, False)
                elif sym.degree < receiver.desired_degree and agent.on_stale(receiver.desired_degree):
                    send_feedback(tick, FeedbackMessage.INCREMENT_DEGREE, True)

        while in_flight and in_flight[0][0] <= tick:
            _, msg = in_flight.popleft()
            m.feedback_delivered += 1
            if msg is FeedbackMessage.INCREMENT_DEGREE and not sender.can_increment:
                tr.feedback_ignored += 1
                log(Event(tick, "feedback_ignored", {"msg": msg.name}))
                continue
            sender.on_feedback(msg)
            log(Event(tick, "feedback_delivered", {"msg": msg.name, "degree": sender.current_degree}))
        tick += 1

    if sender.terminated:
        log(Event(tick - 1, "terminated", {}))

    m.payload_xors_receiver = receiver.xors.count
    m.payload_xors_sender = sender.xors.count
    m.bitmap_lookups = receiver.bitmap_lookups
    if receiver.is_complete():
        res = precode_decode(spec, receiver.received())
        m.precode_decode_xors = res.xors
        m.elimination_fallback_used = res.used_elimination
        m.decode_success = res.ok
        tr.recovered = res.message
        log(Event(tick, "precode_decode", {"success": res.ok, "xors": res.xors,
                                           "peeled": res.peeled, "eliminated": res.eliminated}))
    return tr


# -- Monte-Carlo harness -----------------------------------------------------


@dataclass
class TrialResults:
    metrics: list[TranscriptMetrics]
    summary: dict[str, FieldSummary]
    seeds: list[int]
    correct: int  # successful sessions whose output equals the input message
    retransmissions: int
    aborted: int

    def mean(self, name: str) -> float:
        return self.summary[name].mean


def trial_seeds(seed: int, n_trials: int) -> list[int]:
    """Independent 63-bit session seeds derived from one master seed."""
    children = np.random.SeedSequence(seed).spawn(n_trials)
    return [int(c.generate_state(1, dtype=np.uint64)[0] >> 1) for c in children]


def random_message(k_prime: int, symbol_size: int, seed: int) -> list[Symbol]:
    rng = np.random.default_rng(seed)
    raw = rng.integers(0, 256, size=(k_prime, symbol_size), dtype=np.uint8)
    return [Symbol(row.tobytes()) for row in raw]


def _one_trial(args):
    spec, config, symbol_size, seed = args
    policy = DegreePolicy.create(spec.k, spec.gamma)
    message = random_message(spec.k_prime, symbol_size, seed ^ 0x5EED)
    cfg = ChannelConfig(
        forward_erasure_prob=config.forward_erasure_prob,
        feedback_loss_prob=config.feedback_loss_prob,
        feedback_latency=config.feedback_latency,
        rng_seed=seed,
        max_ticks=config.max_ticks,
    )
    tr = run_session(policy, spec, message, cfg, record_events=False)
    ok = tr.metrics.decode_success and tr.recovered == message
    return tr.metrics, ok, tr.retransmissions, tr.aborted


def run_trials(
    spec: PrecodeSpec,
    config: ChannelConfig,
    n_trials: int,
    seed: int = 0,
    symbol_size: int = 1,
    workers: int = 1,
) -> TrialResults:
    """Run ``n_trials`` independent sessions and aggregate their metrics.

    Results are ordered by trial index and depend only on the arguments, not
    on ``workers``.
    """
    if n_trials < 1:
        raise ValueError(f"n_trials must be at least 1, got {n_trials}")
    seeds = trial_seeds(seed, n_trials)
    jobs = [(spec, config, symbol_size, s) for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_one_trial, jobs, chunksize=max(1, n_trials // (4 * workers))))
    else:
        rows = [_one_trial(j) for j in jobs]
    metrics = [r[0] for r in rows]
    return TrialResults(
        metrics=metrics,
        summary=summarize(metrics),
        seeds=seeds,
        correct=sum(r[1] for r in rows),
        retransmissions=sum(r[2] for r in rows),
        aborted=sum(r[3] for r in rows),
    )
