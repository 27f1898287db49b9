"""Batch runner: datasets in, decoded outputs plus traces and reports out.

Dataset files are JSON-lines records ``{"id", "input", "reference"?,
"task"}`` where ``task`` names a prompt template pair. Traces are
append-only JSON-lines with one event per line, ``{"record_id", "step",
"kind", "payload", "t_ns"}``; each record additionally gets one
``kind="summary"`` line carrying its run-time stats, output, and
reference, so aggregates are recomputable from the file alone. A crashed
run leaves a readable partial trace.

Model specs: ``toy:PATH`` loads a tabular model from JSON;
``bridge:stdio:COMMAND`` spawns an adapter subprocess;
``bridge:tcp:HOST:PORT`` connects to a running adapter.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import dataclass, replace
from pathlib import Path

from . import baselines
from .bridge import BridgeLM, StdioTransport, TcpTransport
from .core import (
    BEAM,
    CAD,
    CD,
    DIVER_STRATEGIES,
    GREEDY,
    NUCLEUS,
    DecodeTrace,
    DecoderConfig,
    DecodingError,
)
from .engine import DecodeResult, decode
from .lm import LanguageModel, TabularLM
from .verifier import PromptTemplatePair, load_templates


class CorruptTraceError(DecodingError):
    """A trace file line failed to parse or misses required fields."""


@dataclass(frozen=True)
class DatasetRecord:
    id: str
    input: str
    task: str
    reference: str | None = None


@dataclass
class RunReport:
    """Per-record outputs and stats plus recomputable aggregates."""

    per_record: list[dict]
    aggregate: dict
    config: dict

    def to_dict(self) -> dict:
        return {
            "per_record": self.per_record,
            "aggregate": self.aggregate,
            "config": self.config,
        }


def load_dataset(path: str | Path) -> list[DatasetRecord]:
    records: list[DatasetRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DecodingError(f"{path}:{lineno}: bad dataset line: {exc}") from exc
            rec = DatasetRecord(
                id=str(doc["id"]),
                input=doc["input"],
                task=doc["task"],
                reference=doc.get("reference"),
            )
            if rec.id in seen:
                raise DecodingError(f"{path}:{lineno}: duplicate record id {rec.id!r}")
            seen.add(rec.id)
            records.append(rec)
    return records


def resolve_model(spec: str) -> LanguageModel:
    if spec.startswith("toy:"):
        return TabularLM.from_json_file(spec[len("toy:") :])
    if spec.startswith("bridge:stdio:"):
        return BridgeLM(StdioTransport(spec[len("bridge:stdio:") :]))
    if spec.startswith("bridge:tcp:"):
        host, _, port = spec[len("bridge:tcp:") :].rpartition(":")
        return BridgeLM(TcpTransport(host, int(port)))
    raise DecodingError(f"unknown model spec {spec!r} (want toy:PATH or bridge:...)")


def decode_record(
    model: LanguageModel,
    verify_model: LanguageModel | None,
    tpl: PromptTemplatePair,
    input_text: str,
    cfg: DecoderConfig,
) -> DecodeResult:
    """Decode one input with whichever strategy the config names.

    Baselines are wrapped into the same DecodeResult shape as the
    span-verified strategies; their divergence counts are zero. For CD the
    verifier model doubles as the amateur (there is no separate flag), and
    with no verifier configured CD degenerates to self-contrast.
    """
    cfg.validate()
    if cfg.strategy in DIVER_STRATEGIES:
        return decode(model, verify_model, tpl, input_text, cfg)

    vocab = model.vocab
    prompt = vocab.encode(tpl.render_forward(input_text))
    trace = DecodeTrace()
    rng = random.Random(cfg.rng_seed)
    t0 = time.perf_counter_ns()
    if cfg.strategy == GREEDY:
        out = baselines.greedy_decode(model, prompt, cfg.max_new_tokens, trace=trace)
    elif cfg.strategy == NUCLEUS:
        out = baselines.nucleus_decode(
            model, prompt, cfg.top_p, rng, cfg.max_new_tokens, trace=trace
        )
    elif cfg.strategy == BEAM:
        out = baselines.beam_decode(model, prompt, cfg.beam_width, cfg.max_new_tokens, trace=trace)
    elif cfg.strategy == CD:
        amateur = verify_model if verify_model is not None else model
        out = baselines.cd_decode(
            model, amateur, prompt, cfg.gamma, cfg.max_new_tokens, trace=trace
        )
    elif cfg.strategy == CAD:
        prompt_without = vocab.encode(tpl.render_forward(""))
        out = baselines.cad_decode(
            model, prompt, prompt_without, cfg.alpha, cfg.max_new_tokens, trace=trace
        )
    else:  # pragma: no cover - validate() already rejects unknown strategies
        raise DecodingError(f"unhandled strategy {cfg.strategy!r}")
    wall = max(time.perf_counter_ns() - t0, 1)
    stats = {
        "tokens_emitted": len(out),
        "divergence_count": 0,
        "span_lengths": [],
        "ended_with_eos": len(out) < cfg.max_new_tokens,
        "wall_time_ns": wall,
        "tokens_per_second": len(out) / (wall / 1e9),
    }
    return DecodeResult(output=out, trace=trace, stats=stats)


def _aggregate(per_record: list[dict]) -> dict:
    done = [r for r in per_record if "stats" in r]
    total_tokens = sum(r["stats"]["tokens_emitted"] for r in done)
    total_wall = sum(r["stats"]["wall_time_ns"] for r in done)
    hist: dict[str, int] = {}
    for r in done:
        for length in r["stats"]["span_lengths"]:
            hist[str(length)] = hist.get(str(length), 0) + 1
    with_ref = [r for r in done if r.get("reference") is not None]
    em = None
    if with_ref:
        hits = sum(1 for r in with_ref if r["output"].strip() == r["reference"].strip())
        em = hits / len(with_ref)
    return {
        "records": len(per_record),
        "failed": len(per_record) - len(done),
        "total_tokens": total_tokens,
        "mean_divergence_points": (
            sum(r["stats"]["divergence_count"] for r in done) / len(done) if done else 0.0
        ),
        "span_length_hist": hist,
        "tokens_per_second": total_tokens / (total_wall / 1e9) if total_wall else 0.0,
        "exact_match_rate": em,
    }


def run_dataset(
    dataset_path: str | Path,
    model_spec: str,
    cfg: DecoderConfig,
    out_path: str | Path,
    templates_path: str | Path,
) -> RunReport:
    """Decode every dataset record; write the trace and a report alongside.

    Per-record failures are recorded and the run continues; I/O and setup
    problems raise. The report lands at ``<out_path>.report.json``.
    """
    records = load_dataset(dataset_path)
    templates = load_templates(templates_path)
    model = resolve_model(model_spec)
    verify_model = resolve_model(cfg.verifier) if cfg.verifier else None
    per_record: list[dict] = []
    with open(out_path, "w", encoding="utf-8") as trace_fh:
        for rec in records:
            try:
                tpl = templates[rec.task]
            except KeyError:
                per_record.append({"id": rec.id, "error": f"unknown task {rec.task!r}"})
                continue
            try:
                result = decode_record(model, verify_model, tpl, rec.input, cfg)
            except DecodingError as exc:
                per_record.append({"id": rec.id, "error": str(exc)})
                continue
            output_text = model.vocab.decode(result.output)
            for ev in result.trace.events:
                trace_fh.write(
                    json.dumps(
                        {
                            "record_id": rec.id,
                            "step": ev.step,
                            "kind": ev.kind,
                            "payload": ev.payload,
                            "t_ns": ev.t_ns,
                        }
                    )
                    + "\n"
                )
            summary_payload = dict(result.stats)
            summary_payload["output"] = output_text
            summary_payload["reference"] = rec.reference
            trace_fh.write(
                json.dumps(
                    {
                        "record_id": rec.id,
                        "step": -1,
                        "kind": "summary",
                        "payload": summary_payload,
                        "t_ns": time.perf_counter_ns(),
                    }
                )
                + "\n"
            )
            per_record.append(
                {
                    "id": rec.id,
                    "output": output_text,
                    "reference": rec.reference,
                    "stats": result.stats,
                }
            )
    report = RunReport(
        per_record=per_record,
        aggregate=_aggregate(per_record),
        config={
            "model": model_spec,
            "dataset": str(dataset_path),
            "templates": str(templates_path),
            **{k: v for k, v in cfg.__dict__.items()},
        },
    )
    with open(f"{out_path}.report.json", "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    return report


def sweep_gamma(
    dataset_path: str | Path,
    model_spec: str,
    gammas: list[float],
    cfg: DecoderConfig,
    out_path: str | Path,
    templates_path: str | Path,
) -> dict[float, dict]:
    """One run_dataset per gamma; returns the aggregate table keyed by gamma."""
    table: dict[float, dict] = {}
    for gamma in gammas:
        if not 0.0 < gamma <= 1.0:
            raise DecodingError(f"sweep gamma {gamma} outside (0, 1]")
        report = run_dataset(
            dataset_path,
            model_spec,
            replace(cfg, gamma=gamma),
            f"{out_path}.gamma-{gamma:g}",
            templates_path,
        )
        table[gamma] = report.aggregate
    return table


def stats(trace_path: str | Path) -> dict:
    """Recompute aggregates from a trace file.

    Event-derived counts are cross-checked against each record's summary
    line; disagreement or an unparsable line raises ``CorruptTraceError``
    with the line number. Records without a summary (crashed mid-decode)
    still contribute their event-derived divergence and span counts.
    """
    by_record: dict[str, dict] = {}
    order: list[str] = []
    with open(trace_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                rid = doc["record_id"]
                kind = doc["kind"]
                payload = doc["payload"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorruptTraceError(f"{trace_path}:{lineno}: {exc}") from exc
            if rid not in by_record:
                by_record[rid] = {
                    "divergences": 0,
                    "span_lengths": [],
                    "tokens": 0,
                    "summary": None,
                }
                order.append(rid)
            slot = by_record[rid]
            if kind == "divergence":
                slot["divergences"] += 1
            elif kind == "selection":
                slot["span_lengths"].append(len(payload["span_tokens"]))
                slot["tokens"] += len(payload["committed"])
            elif kind == "emit":
                slot["tokens"] += 1
            elif kind == "summary":
                slot["summary"] = payload
    per_record: list[dict] = []
    for rid in order:
        slot = by_record[rid]
        summary = slot["summary"]
        if summary is not None:
            if (
                summary["divergence_count"] != slot["divergences"]
                or summary["span_lengths"] != slot["span_lengths"]
                or summary["tokens_emitted"] != slot["tokens"]
            ):
                raise CorruptTraceError(
                    f"{trace_path}: record {rid!r} events disagree with its summary"
                )
            per_record.append(
                {
                    "id": rid,
                    "output": summary["output"],
                    "reference": summary.get("reference"),
                    "stats": {
                        k: summary[k]
                        for k in (
                            "tokens_emitted",
                            "divergence_count",
                            "span_lengths",
                            "ended_with_eos",
                            "wall_time_ns",
                            "tokens_per_second",
                        )
                    },
                }
            )
        else:
            # Partial trace (no summary line): aggregate what the events say.
            per_record.append(
                {
                    "id": rid,
                    "partial": True,
                    "stats": {
                        "tokens_emitted": slot["tokens"],
                        "divergence_count": slot["divergences"],
                        "span_lengths": slot["span_lengths"],
                        "ended_with_eos": False,
                        "wall_time_ns": 0,
                        "tokens_per_second": 0.0,
                    },
                }
            )
    return _aggregate(per_record)
