"""Client for remote model adapters speaking the JSON-lines scoring protocol.

One request per line, one response per line, one in-flight request per
connection. The adapter process owns the model and its tokenizer; this
side only ships token ids and builds a Vocab from the hello manifest's
surface strings. Messages are encoded canonically (fixed key order,
compact separators) so both ends can golden-test byte-identical round
trips.

Requests::

    {"v": 1, "request_id": "...", "op": "hello"}
    {"request_id": "...", "op": "next_logprobs", "context": [ids]}
    {"request_id": "...", "op": "score_sequence", "context": [ids], "target": [ids]}

Responses::

    {"request_id": "...", "ok": true, "payload": ...}
    {"request_id": "...", "ok": false, "error": "..."}

The hello payload is the vocab manifest: ``{"v": 1, "model_id", "vocab_size",
"eos_id", "bos_id", "context_limit", "tokens"}``.

Zero-probability entries travel as JSON ``null`` (JavaScript cannot
serialize infinities); both ends map null to minus infinity.
"""

from __future__ import annotations

import json
import logging
import shlex
import socket
import subprocess

from .core import LogProbDist, TokenSeq, Vocab
from .lm import LanguageModel, ModelUnavailableError

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

# Canonical serialization order for message keys, shared with the adapter.
_KEY_ORDER = [
    "v",
    "request_id",
    "op",
    "context",
    "target",
    "ok",
    "payload",
    "error",
    "model_id",
    "vocab_size",
    "eos_id",
    "bos_id",
    "context_limit",
    "tokens",
]
_KEY_RANK = {k: i for i, k in enumerate(_KEY_ORDER)}


def _canonical(obj):
    if isinstance(obj, dict):
        keys = sorted(obj, key=lambda k: (_KEY_RANK.get(k, len(_KEY_ORDER)), k))
        return {k: _canonical(obj[k]) for k in keys}
    if isinstance(obj, list):
        return [_canonical(v) for v in obj]
    if isinstance(obj, float) and obj == float("-inf"):
        return None
    return obj


def encode_message(msg: dict) -> str:
    """Serialize one protocol message as a canonical JSON line (no newline)."""
    return json.dumps(
        _canonical(msg), separators=(",", ":"), ensure_ascii=False, allow_nan=False
    )


def decode_message(line: str) -> dict:
    """Parse one protocol message line."""
    obj = json.loads(line)
    if not isinstance(obj, dict):
        raise ModelUnavailableError(f"protocol message is not an object: {line!r}")
    return obj


class StdioTransport:
    """Spawn the adapter as a subprocess and talk over its stdin/stdout."""

    def __init__(self, command: str | list[str]) -> None:
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        try:
            self._proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise ModelUnavailableError(f"cannot start adapter {argv!r}: {exc}") from exc

    def send(self, line: str) -> None:
        try:
            assert self._proc.stdin is not None
            self._proc.stdin.write(line + "\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise ModelUnavailableError(f"adapter pipe closed: {exc}") from exc

    def recv(self) -> str:
        assert self._proc.stdout is not None
        try:
            line = self._proc.stdout.readline()
        except (OSError, ValueError) as exc:
            raise ModelUnavailableError(f"adapter pipe closed: {exc}") from exc
        if line == "":
            raise ModelUnavailableError("adapter closed its stdout")
        return line.rstrip("\n")

    def close(self) -> None:
        if self._proc.stdin is not None:
            self._proc.stdin.close()
        self._proc.terminate()
        self._proc.wait(timeout=5)


class TcpTransport:
    """Connect to an adapter listening on a TCP address."""

    def __init__(self, host: str, port: int, timeout: float = 30.0) -> None:
        try:
            self._sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise ModelUnavailableError(f"cannot connect to {host}:{port}: {exc}") from exc
        self._fh = self._sock.makefile("rw", encoding="utf-8", newline="\n")

    def send(self, line: str) -> None:
        try:
            self._fh.write(line + "\n")
            self._fh.flush()
        except OSError as exc:
            raise ModelUnavailableError(f"connection lost: {exc}") from exc

    def recv(self) -> str:
        line = self._fh.readline()
        if line == "":
            raise ModelUnavailableError("adapter closed the connection")
        return line.rstrip("\n")

    def close(self) -> None:
        self._fh.close()
        self._sock.close()


class BridgeLM(LanguageModel):
    """LanguageModel backed by a remote adapter process.

    Contexts longer than the adapter's advertised limit are truncated from
    the left with a warning; the adapter never sees oversized requests.
    """

    def __init__(self, transport) -> None:
        self._transport = transport
        self._counter = 0
        manifest = self._call("hello", extra={"v": PROTOCOL_VERSION})
        if manifest.get("v") != PROTOCOL_VERSION:
            raise ModelUnavailableError(
                f"adapter speaks protocol v{manifest.get('v')}, expected v{PROTOCOL_VERSION}"
            )
        tokens = manifest.get("tokens")
        if not tokens or len(tokens) != manifest["vocab_size"]:
            raise ModelUnavailableError("hello manifest must list all token surfaces")
        self.vocab = Vocab(
            tuple(tokens), eos=manifest["eos_id"], bos=manifest.get("bos_id")
        )
        self.model_id = manifest.get("model_id", "bridge")
        self.context_limit = manifest.get("context_limit")
        self.supports_batch_scoring = False

    def _call(self, op: str, extra: dict | None = None) -> dict:
        self._counter += 1
        msg = {"request_id": f"q{self._counter}", "op": op}
        if extra:
            msg.update(extra)
        self._transport.send(encode_message(msg))
        resp = decode_message(self._transport.recv())
        if resp.get("request_id") != msg["request_id"]:
            raise ModelUnavailableError(
                f"response id {resp.get('request_id')!r} does not match request"
            )
        if not resp.get("ok"):
            raise ModelUnavailableError(f"adapter error: {resp.get('error')}")
        return resp["payload"]

    def _fit(self, context: TokenSeq, reserve: int = 0) -> list[int]:
        ctx = list(context)
        if self.context_limit is not None and len(ctx) + reserve > self.context_limit:
            keep = max(self.context_limit - reserve, 0)
            log.warning(
                "context of %d tokens exceeds adapter limit %d; truncating from the left",
                len(ctx),
                self.context_limit,
            )
            ctx = ctx[len(ctx) - keep :]
        return ctx

    def next_dist(self, context: TokenSeq) -> LogProbDist:
        payload = self._call("next_logprobs", {"context": self._fit(context)})
        values = payload["logprobs"]
        if len(values) != self.vocab.size:
            raise ModelUnavailableError(
                f"logprob vector has {len(values)} entries, vocab size is {self.vocab.size}"
            )
        return LogProbDist(tuple(self._logprob(v) for v in values))

    def score_sequence(self, prefix: TokenSeq, target: TokenSeq) -> list[float]:
        payload = self._call(
            "score_sequence",
            {"context": self._fit(prefix, reserve=len(target)), "target": list(target)},
        )
        scores = payload["logprobs"]
        if len(scores) != len(target):
            raise ModelUnavailableError(
                f"per-token list has {len(scores)} entries, target has {len(target)}"
            )
        return [self._logprob(v) for v in scores]

    @staticmethod
    def _logprob(value) -> float:
        # null is the wire spelling of log(0)
        return float("-inf") if value is None else float(value)

    def close(self) -> None:
        self._transport.close()
