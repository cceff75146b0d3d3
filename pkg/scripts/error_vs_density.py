#!/usr/bin/env python3
"""Matched-budget error curves on a synthetic video head.

Runs the packaged desk-scale sweep and prints, per target density, every
method's mean MSE across seeds. CSV and summary land in --out.
"""

import argparse
import json
from collections import defaultdict
from pathlib import Path

from monarchbench.sweep import parse_kv_config, run_sweep, sweep_config_from_kv

ROOT = Path(__file__).resolve().parents[1]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--config", default=str(ROOT / "configs" / "desk_sweep.cfg"))
    parser.add_argument("--out", default="out/error_vs_density")
    args = parser.parse_args()

    config = sweep_config_from_kv(parse_kv_config(Path(args.config).read_text()))
    csv_path, summary_path = run_sweep(config, Path(args.out))

    rows = [line.split(",") for line in csv_path.read_text().splitlines()[1:]]
    table = defaultdict(lambda: defaultdict(list))
    for r in rows:
        target = r[6].split("|", 1)[0].removeprefix("t=")
        label = r[5] if r[9] == "0" else f"{r[5]}[T={r[9]}]"
        table[float(target)][label].append(float(r[10]))

    methods = sorted({m for per in table.values() for m in per})
    print(f"{'density':>9} " + " ".join(f"{m:>22}" for m in methods))
    for target in sorted(table):
        cells = []
        for m in methods:
            vals = table[target].get(m)
            cells.append(f"{sum(vals) / len(vals):>22.3e}" if vals else f"{'-':>22}")
        print(f"{target:>9.3g} " + " ".join(cells))
    print(f"\nbest method per density: {json.loads(summary_path.read_text())['per_density']}")


if __name__ == "__main__":
    main()
