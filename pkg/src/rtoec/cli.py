"""Command-line experiment runner.

Subcommands: run, sweep, verify-policy, precode-failure. Exit status 0 on
success, 1 on invalid arguments, 2 when verify-policy finds a counterexample.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

from . import experiments as ex

EXIT_OK, EXIT_INVALID, EXIT_COUNTEREXAMPLE = 0, 1, 2


def _common(p: argparse.ArgumentParser) -> None:
    d = ex.ExperimentConfig()
    p.add_argument("--k-prime", type=int, default=d.k_prime, help="message length in symbols")
    p.add_argument("--gamma", type=float, default=d.gamma, help="truncation fraction, 0 < gamma < 1/2")
    p.add_argument("--symbol-size", type=int, default=d.symbol_size, help="bytes per symbol")
    p.add_argument("--parity-degree", type=int, default=d.parity_degree)
    p.add_argument("--erasure-rate", type=float, default=d.erasure_rate, help="forward channel erasure probability")
    p.add_argument("--feedback-latency", type=int, default=d.feedback_latency, help="in forward-symbol slots")
    p.add_argument("--feedback-loss", type=float, default=d.feedback_loss)
    p.add_argument("--trials", type=int, default=d.trials)
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", default="-", help="output path, '-' for stdout")
    p.add_argument("--workers", type=int, default=1, help="worker processes for trials")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rtoec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="aggregate metrics of repeated sessions")
    _common(p)

    p = sub.add_parser("sweep", help="one run row per value of a parameter")
    _common(p)
    p.add_argument("--axis", required=True, help=f"one of: {', '.join(ex.SWEEP_AXES)}")
    p.add_argument("--values", required=True, help="comma-separated values")

    p = sub.add_parser("verify-policy", help="exhaustive degree-policy check")
    p.add_argument("--k-max", type=int, default=300)

    p = sub.add_parser("precode-failure", help="outer-code failure rate per block length")
    _common(p)
    p.add_argument("--k-values", default=None,
                   help="comma-separated block lengths (default: the block length of --k-prime)")
    p.add_argument("--erasure-fraction", type=float, default=None,
                   help="erased fraction of each block (default: gamma)")
    p.add_argument("--protocol-trials", type=int, default=None,
                   help="sessions per row for inner-protocol miss patterns (default: --trials)")
    return parser


def _config(args) -> ex.ExperimentConfig:
    return ex.ExperimentConfig(
        k_prime=args.k_prime, gamma=args.gamma, symbol_size=args.symbol_size,
        parity_degree=args.parity_degree, erasure_rate=args.erasure_rate,
        feedback_latency=args.feedback_latency, feedback_loss=args.feedback_loss,
        trials=args.trials, seed=args.seed,
    )


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    return v


def render(rows: list[dict], columns, fmt: str, meta: dict) -> str:
    if fmt == "json":
        doc = {"format_version": 1, **meta, "columns": list(columns),
               "rows": [{c: _json_safe(r[c]) for c in columns} for r in rows]}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(columns), extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _emit(text: str, out: str) -> None:
    if out == "-":
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify-policy":
            return _verify(args.k_max)
        cfg = _config(args)
        if args.command == "run":
            cfg.validate()
            rows = [ex.run_experiment(cfg, args.workers)]
            _emit(render(rows, ex.RUN_COLUMNS, args.format, {"command": "run"}), args.out)
        elif args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            if args.axis not in ex.SWEEP_AXES:
                raise ValueError(f"unknown sweep axis {args.axis!r}; choose from {', '.join(ex.SWEEP_AXES)}")
            cfgs = [cfg.with_value(args.axis, v) for v in values]
            for c in cfgs:
                c.validate()
            rows = [ex.run_experiment(c, args.workers) for c in cfgs]
            meta = {"command": "sweep", "axis": args.axis}
            _emit(render(rows, ex.RUN_COLUMNS, args.format, meta), args.out)
        elif args.command == "precode-failure":
            _precode_failure(args, cfg)
    except ValueError as e:
        print(f"rtoec: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK


def _verify(k_max: int) -> int:
    if k_max < 2:
        raise_msg = f"--k-max must be >= 2 (got {k_max})"
        print(f"rtoec: error: {raise_msg}", file=sys.stderr)
        return EXIT_INVALID
    res = ex.verify_policy(k_max)
    if res.ok:
        print(f"verify-policy: k_max={k_max} pairs_checked={res.pairs_checked} counterexamples=0")
        return EXIT_OK
    print(f"verify-policy: counterexample after {res.pairs_checked} pairs: {json.dumps(res.counterexample)}")
    return EXIT_COUNTEREXAMPLE


def _precode_failure(args, cfg: ex.ExperimentConfig) -> None:
    if not 0 < cfg.gamma < 0.5:
        raise ValueError(f"--gamma must satisfy 0 < gamma < 1/2 (got {cfg.gamma})")
    if cfg.trials < 1:
        raise ValueError(f"--trials must be >= 1 (got {cfg.trials})")
    if args.erasure_fraction is not None and not 0 <= args.erasure_fraction < 1:
        raise ValueError(f"--erasure-fraction must be in [0, 1) (got {args.erasure_fraction})")
    if args.k_values:
        ks = [int(v) for v in args.k_values.split(",") if v.strip()]
    else:
        ks = [cfg.precode().k]
    protocol = cfg.trials if args.protocol_trials is None else args.protocol_trials
    rows = []
    for k in ks:
        if protocol and k * cfg.gamma**2 < 4:
            raise ValueError(f"block length {k} must satisfy k >= 4/gamma^2 for protocol trials")
        rows.append(ex.precode_failure_row(k, cfg.gamma, cfg.parity_degree, cfg.trials, cfg.seed,
                                           args.erasure_fraction, protocol, args.workers))
    _emit(render(rows, ex.FAILURE_COLUMNS, args.format, {"command": "precode-failure"}), args.out)


if __name__ == "__main__":
    raise SystemExit(main())
