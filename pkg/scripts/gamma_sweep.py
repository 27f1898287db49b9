"""Sweep the truncation threshold over the bundled fixtures and print a table.

Larger gamma admits fewer candidates, so divergence counts shrink
monotonically along the grid. Run from the repository root:

    python3 scripts/gamma_sweep.py
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

from spandec.core import DecoderConfig
from spandec.harness import sweep_gamma

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"

GRID = [0.1, 0.3, 0.5, 0.7, 0.9]


def main() -> int:
    workdir = Path(tempfile.mkdtemp(prefix="spandec-sweep-"))
    cfg = DecoderConfig(strategy="diver-right", max_new_tokens=12, rng_seed=7)
    table = sweep_gamma(
        FIXTURES / "dataset.jsonl",
        f"toy:{FIXTURES / 'toy_model.json'}",
        GRID,
        cfg,
        workdir / "sweep",
        FIXTURES / "templates.json",
    )
    print(f"{'gamma':>6} {'div/ex':>7} {'EM':>5} {'tokens/s':>9}")
    for gamma in GRID:
        agg = table[gamma]
        em = "-" if agg["exact_match_rate"] is None else f"{agg['exact_match_rate']:.2f}"
        print(
            f"{gamma:>6.1f} {agg['mean_divergence_points']:>7.1f} {em:>5} "
            f"{agg['tokens_per_second']:>9.0f}"
        )
    print(f"\ntraces under {workdir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
