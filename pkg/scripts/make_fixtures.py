"""Regenerate the bundled fixture world under fixtures/.

The world is engineered so plain greedy decoding drops the second input
element ("riverside") while span-verified decoding keeps it: the backward
rows reward output spans after which the full input scores higher. The
alternative verifier inverts that reward, so running with
--verify-model toy:fixtures/inverse_verifier.json flips the choice back.
"""

from __future__ import annotations

import json
from pathlib import Path

from spandec.core import Vocab
from spandec.lm import TabularLM

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

TOKENS = (
    "Components:",
    "Sentence:",
    "pub",
    "riverside",
    "the",
    "is",
    "near",
    "nice",
    "<eos>",
    "<bos>",
)

FORWARD_ROWS = {
    ("pub", "riverside", "Sentence:"): {"the": 1.0},
    ("riverside", "Sentence:", "the"): {"pub": 1.0},
    ("Sentence:", "the", "pub"): {"is": 0.55, "near": 0.45},
    ("the", "pub", "is"): {"nice": 1.0},
    ("pub", "is", "nice"): {"<eos>": 1.0},
    ("the", "pub", "near"): {"riverside": 1.0},
    ("pub", "near", "riverside"): {"<eos>": 1.0},
}

# Backward rows score the input "pub riverside" behind each candidate span.
# The faithful span ("near riverside") raises the input likelihood, the
# generic one ("is nice") lowers it.
BACKWARD_ROWS = {
    ("the", "pub", "Components:"): {"pub": 0.5, "riverside": 0.5},
    ("pub", "Components:", "pub"): {"riverside": 0.5, "pub": 0.5},
    ("nice", "<eos>", "Components:"): {"pub": 0.2, "riverside": 0.8},
    ("<eos>", "Components:", "pub"): {"riverside": 0.9, "pub": 0.1},
    ("riverside", "<eos>", "Components:"): {"pub": 0.8, "riverside": 0.2},
}

INVERSE_BACKWARD_ROWS = {
    **BACKWARD_ROWS,
    ("nice", "<eos>", "Components:"): {"pub": 0.8, "riverside": 0.2},
    ("riverside", "<eos>", "Components:"): {"pub": 0.2, "riverside": 0.8},
}


def build_model(rows: dict, model_id: str) -> TabularLM:
    vocab = Vocab(TOKENS, eos=TOKENS.index("<eos>"), bos=TOKENS.index("<bos>"))
    index = {s: n for n, s in enumerate(TOKENS)}
    weights = {
        tuple(index[s] for s in key): {index[s]: w for s, w in row.items()}
        for key, row in rows.items()
    }
    return TabularLM(vocab, 4, weights, fallback="uniform", model_id=model_id)


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    build_model({**FORWARD_ROWS, **BACKWARD_ROWS}, "pub-world").to_json_file(
        FIXTURES / "toy_model.json"
    )
    build_model({**FORWARD_ROWS, **INVERSE_BACKWARD_ROWS}, "pub-world-inverse").to_json_file(
        FIXTURES / "inverse_verifier.json"
    )
    templates = [
        {
            "name": "describe",
            "forward": "Components: [INPUT] Sentence:",
            "backward": "Sentence: [INCOMPLETE_OUTPUT] Components: [INPUT]",
        }
    ]
    (FIXTURES / "templates.json").write_text(json.dumps(templates, indent=2) + "\n")
    records = [
        {
            "id": "pub-1",
            "input": "pub riverside",
            "task": "describe",
            "reference": "the pub near riverside",
        },
        {"id": "pub-2", "input": "pub riverside", "task": "describe"},
    ]
    (FIXTURES / "dataset.jsonl").write_text(
        "".join(json.dumps(r) + "\n" for r in records)
    )
    print(f"wrote fixtures to {FIXTURES}")


if __name__ == "__main__":
    main()
