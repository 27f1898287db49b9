"""Command-line entry points: run, sweep, stats, and a hidden verify helper.

Exit codes: 0 on success, 1 when some records failed but the run finished,
2 on fatal errors (bad arguments, unreadable files, broken adapters).
"""

from __future__ import annotations

import argparse
import json
import sys

from .core import DecoderConfig, DecodingError, STRATEGIES
from .harness import resolve_model, run_dataset, stats, sweep_gamma
from .lm import TabularLM
from .oracle import oracle_decode
from .verifier import load_templates


def _add_decode_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", default="greedy", choices=sorted(STRATEGIES))
    p.add_argument("--gamma", type=float, default=0.3)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--top-p", type=float, default=0.9, dest="top_p")
    p.add_argument("--beam-width", type=int, default=4, dest="beam_width")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-tokens", type=int, default=64, dest="max_tokens")
    p.add_argument("--max-span", type=int, default=64, dest="max_span")
    p.add_argument("--sample-spans", action="store_true", dest="sample_spans")
    p.add_argument("--verify-model", default=None, dest="verify_model")


def _config(args: argparse.Namespace) -> DecoderConfig:
    return DecoderConfig(
        strategy=args.method,
        gamma=args.gamma,
        top_p=args.top_p,
        alpha=args.alpha,
        beam_width=args.beam_width,
        max_new_tokens=args.max_tokens,
        max_span_len=args.max_span,
        rng_seed=args.seed,
        verifier=args.verify_model,
        sample_spans=args.sample_spans,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spandec")
    # verify is intentionally absent from the advertised subcommand list;
    # it exists for fixture authoring.
    sub = parser.add_subparsers(dest="command", metavar="{run,sweep,stats}", required=True)

    run_p = sub.add_parser("run", help="decode a dataset with one strategy")
    run_p.add_argument("--dataset", required=True)
    run_p.add_argument("--model", required=True)
    run_p.add_argument("--templates", required=True)
    run_p.add_argument("--out", required=True)
    _add_decode_flags(run_p)

    sweep_p = sub.add_parser("sweep", help="run the dataset once per gamma value")
    sweep_p.add_argument("--dataset", required=True)
    sweep_p.add_argument("--model", required=True)
    sweep_p.add_argument("--templates", required=True)
    sweep_p.add_argument("--out", required=True)
    sweep_p.add_argument("--gammas", default="0.1,0.3,0.5,0.7,0.9")
    _add_decode_flags(sweep_p)

    stats_p = sub.add_parser("stats", help="recompute aggregates from a trace file")
    stats_p.add_argument("--trace", required=True)

    verify_p = sub.add_parser("verify")
    verify_p.add_argument("--model", required=True, help="toy:PATH only")
    verify_p.add_argument("--templates", required=True)
    verify_p.add_argument("--task", required=True)
    verify_p.add_argument("--input", required=True)
    _add_decode_flags(verify_p)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            report = run_dataset(
                args.dataset, args.model, _config(args), args.out, args.templates
            )
            print(json.dumps(report.aggregate, indent=2))
            return 1 if report.aggregate["failed"] else 0
        if args.command == "sweep":
            gammas = [float(g) for g in args.gammas.split(",") if g]
            table = sweep_gamma(
                args.dataset, args.model, gammas, _config(args), args.out, args.templates
            )
            print(json.dumps({str(g): agg for g, agg in table.items()}, indent=2))
            return 1 if any(agg["failed"] for agg in table.values()) else 0
        if args.command == "stats":
            print(json.dumps(stats(args.trace), indent=2))
            return 0
        if args.command == "verify":
            return _verify(args)
        raise DecodingError(f"unknown command {args.command!r}")
    except DecodingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _verify(args: argparse.Namespace) -> int:
    """Cross-check the engine against the brute-force replay on one input."""
    from .engine import decode as engine_decode

    if not args.model.startswith("toy:"):
        raise DecodingError("verify works on toy:PATH models only")
    model = TabularLM.from_json_file(args.model[len("toy:") :])
    tpl = load_templates(args.templates)[args.task]
    cfg = _config(args)
    verify_model = model
    if args.verify_model:
        vm = resolve_model(args.verify_model)
        if not isinstance(vm, TabularLM):
            raise DecodingError("verify needs a toy verifier")
        verify_model = vm
    oracle_out = oracle_decode(
        model, verify_model, tpl.forward, tpl.backward, args.input, cfg
    )
    engine_out = engine_decode(
        model, verify_model if args.verify_model else None, tpl, args.input, cfg
    ).output
    print(
        json.dumps(
            {
                "oracle_output": model.vocab.decode(oracle_out),
                "engine_output": model.vocab.decode(engine_out),
                "match": oracle_out == engine_out,
            },
            indent=2,
        )
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
