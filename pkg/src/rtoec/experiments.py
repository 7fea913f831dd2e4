"""Experiment drivers shared by the CLI and the acceptance suite."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .channel import ChannelConfig, random_message, run_trials, trial_seeds
from .degree import (
    DegreePolicy,
    brute_force_optimal_degree,
    exact_gamma,
    expected_symbols_bound,
    feedback_budget,
    meets_reveal_floor,
    min_block_length,
    optimal_degree,
    theorem_symbols_bound,
)
from .precode import PrecodeSpec, erase_uniform, precode_decode, precode_encode

SWEEP_AXES = {
    "k_prime": int,
    "gamma": float,
    "symbol_size": int,
    "parity_degree": int,
    "erasure_rate": float,
    "feedback_latency": int,
    "feedback_loss": float,
}


@dataclass(frozen=True)
class ExperimentConfig:
    k_prime: int = 900
    gamma: float = 0.1
    symbol_size: int = 1
    parity_degree: int = 6
    erasure_rate: float = 0.0
    feedback_latency: int = 0
    feedback_loss: float = 0.0
    trials: int = 100
    seed: int = 0

    def validate(self) -> None:
        """Raise ValueError naming the first violated precondition."""
        if self.k_prime < 1:
            raise ValueError(f"--k-prime must be >= 1 (got {self.k_prime})")
        if not 0 < self.gamma < 0.5:
            raise ValueError(f"--gamma must satisfy 0 < gamma < 1/2 (got {self.gamma})")
        if self.symbol_size < 1:
            raise ValueError(f"--symbol-size must be >= 1 (got {self.symbol_size})")
        if self.parity_degree < 1:
            raise ValueError(f"--parity-degree must be >= 1 (got {self.parity_degree})")
        if not 0 <= self.erasure_rate < 1:
            raise ValueError(f"--erasure-rate must be in [0, 1) (got {self.erasure_rate})")
        if not 0 <= self.feedback_loss < 1:
            raise ValueError(f"--feedback-loss must be in [0, 1) (got {self.feedback_loss})")
        if self.feedback_latency < 0:
            raise ValueError(f"--feedback-latency must be >= 0 (got {self.feedback_latency})")
        if self.trials < 1:
            raise ValueError(f"--trials must be >= 1 (got {self.trials})")
        if self.seed < 0:
            raise ValueError(f"--seed must be >= 0 (got {self.seed})")
        k = self.precode().k
        if k < min_block_length(self.gamma):
            raise ValueError(
                f"block length k={k} must satisfy k >= 4/gamma^2 = {min_block_length(self.gamma)}; "
                f"raise --k-prime or --gamma"
            )

    def precode(self) -> PrecodeSpec:
        return PrecodeSpec(self.k_prime, self.gamma, self.parity_degree)

    def channel(self) -> ChannelConfig:
        return ChannelConfig(
            forward_erasure_prob=self.erasure_rate,
            feedback_loss_prob=self.feedback_loss,
            feedback_latency=self.feedback_latency,
        )

    def with_value(self, axis: str, value) -> "ExperimentConfig":
        if axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {axis!r}; choose from {', '.join(SWEEP_AXES)}")
        return replace(self, **{axis: SWEEP_AXES[axis](value)})


CONFIG_COLUMNS = (
    "k_prime", "k", "gamma", "symbol_size", "parity_degree", "erasure_rate",
    "feedback_latency", "feedback_loss", "trials", "seed",
)
RUN_COLUMNS = CONFIG_COLUMNS + (
    "mean_processed", "stderr_processed", "bound_processed", "bound_theorem",
    "mean_feedback", "bound_feedback", "feedback_cap", "mean_sent",
    "mean_receiver_xors", "mean_precode_xors", "decode_xors_per_kprime",
    "mean_bitmap_lookups", "success_rate", "correct_rate", "fallback_rate",
    "retransmissions", "overhead_ratio",
)


def _config_row(cfg: ExperimentConfig) -> dict:
    row = asdict(cfg)
    row["k"] = cfg.precode().k
    return {c: row[c] for c in CONFIG_COLUMNS}


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> dict:
    """Aggregate ``cfg.trials`` sessions into one row with the analytic bounds."""
    cfg.validate()
    spec = cfg.precode()
    res = run_trials(spec, cfg.channel(), cfg.trials, cfg.seed, cfg.symbol_size, workers)
    s = res.summary
    n = cfg.trials
    decode_xors = [m.decode_xors for m in res.metrics]
    row = _config_row(cfg)
    row.update(
        mean_processed=s["symbols_processed"].mean,
        stderr_processed=s["symbols_processed"].stderr,
        bound_processed=expected_symbols_bound(spec.k, cfg.gamma),
        bound_theorem=theorem_symbols_bound(cfg.k_prime, cfg.gamma),
        mean_feedback=s["feedback_sent"].mean,
        bound_feedback=feedback_budget(spec.k, cfg.gamma),
        feedback_cap=math.floor(2 / exact_gamma(cfg.gamma)) + 1,
        mean_sent=s["symbols_sent"].mean,
        mean_receiver_xors=s["payload_xors_receiver"].mean,
        mean_precode_xors=s["precode_decode_xors"].mean,
        decode_xors_per_kprime=sum(decode_xors) / n / cfg.k_prime,
        mean_bitmap_lookups=s["bitmap_lookups"].mean,
        success_rate=s["decode_success"].mean,
        correct_rate=res.correct / n,
        fallback_rate=s["elimination_fallback_used"].mean,
        retransmissions=res.retransmissions,
        overhead_ratio=spec.overhead_ratio,
    )
    return row


def sweep(cfg: ExperimentConfig, axis: str, values, workers: int = 1) -> list[dict]:
    return [run_experiment(cfg.with_value(axis, v), workers) for v in values]


# -- degree policy verification ---------------------------------------------


@dataclass
class PolicyCheck:
    pairs_checked: int
    counterexample: dict | None

    @property
    def ok(self) -> bool:
        return self.counterexample is None


def verify_policy(k_max: int) -> PolicyCheck:
    """Exhaustively check the optimal-degree formula against the brute-force
    argmax, and the 1/e reveal floor, for all 1 <= k <= k_max and 0 <= r < k."""
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2 (got {k_max})")
    n = 0
    for k in range(1, k_max + 1):
        for r in range(k):
            n += 1
            d = optimal_degree(k, r)
            oracle = brute_force_optimal_degree(k, r)
            if d != oracle:
                return PolicyCheck(n, {"k": k, "r": r, "check": "argmax",
                                       "formula": d, "brute_force": oracle})
            if not meets_reveal_floor(k, r, d):
                return PolicyCheck(n, {"k": k, "r": r, "check": "reveal_floor", "degree": d})
    return PolicyCheck(n, None)


# -- precode failure measurement ---------------------------------------------

FAILURE_COLUMNS = (
    "k_prime", "k", "gamma", "parity_degree", "erasures", "trials", "seed",
    "failure_rate_uniform", "fallback_rate_uniform",
    "protocol_trials", "failure_rate_protocol", "fallback_rate_protocol",
)


def uniform_failure(spec: PrecodeSpec, n_erasures: int, n_trials: int, seed: int = 0,
                    symbol_size: int = 1) -> tuple[float, float]:
    """Failure and fallback rates under ``n_erasures`` uniformly placed erasures."""
    failures = fallbacks = 0
    for s in trial_seeds(seed, n_trials):
        rng = np.random.default_rng(s)
        msg = random_message(spec.k_prime, symbol_size, s)
        res = precode_decode(spec, erase_uniform(precode_encode(spec, msg), n_erasures, rng))
        if not res.ok:
            failures += 1
        elif res.message != msg:
            raise AssertionError(f"precode decoded a wrong message (seed {s})")
        fallbacks += res.used_elimination
    return failures / n_trials, fallbacks / n_trials


def precode_failure_row(k: int, gamma: float, parity_degree: int, n_trials: int, seed: int,
                        erasure_fraction: float | None = None, protocol_trials: int = 0,
                        workers: int = 1) -> dict:
    """One results row for block length ``k`` (message length floor(k(1-2 gamma)))."""
    g = exact_gamma(gamma)
    k_prime = math.floor(k * (1 - 2 * g))
    spec = PrecodeSpec(k_prime, gamma, parity_degree)
    frac = g if erasure_fraction is None else erasure_fraction
    n_erasures = math.floor(frac * spec.k)
    fail_u, fb_u = uniform_failure(spec, n_erasures, n_trials, seed)
    row = {
        "k_prime": k_prime, "k": spec.k, "gamma": gamma, "parity_degree": parity_degree,
        "erasures": n_erasures, "trials": n_trials, "seed": seed,
        "failure_rate_uniform": fail_u, "fallback_rate_uniform": fb_u,
        "protocol_trials": protocol_trials,
        "failure_rate_protocol": float("nan"), "fallback_rate_protocol": float("nan"),
    }
    if protocol_trials:
        DegreePolicy.create(spec.k, gamma)
        res = run_trials(spec, ChannelConfig(), protocol_trials, seed, 1, workers)
        row["failure_rate_protocol"] = 1 - res.summary["decode_success"].mean
        row["fallback_rate_protocol"] = res.summary["elimination_fallback_used"].mean
    return row
