#!/usr/bin/env python3
"""Refinement-iteration study: solver MSE and variational objective versus
the number of alternating updates, on synthetic heads."""

import argparse
from pathlib import Path

from monarchbench.layout import VideoShape
from monarchbench.sweep import SweepConfig, run_iteration_ablation


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--shape", default="2,4,4")
    parser.add_argument("--t-grid", default="1,2,5,10,20")
    parser.add_argument("--seeds", default="0,1,2,3,4")
    parser.add_argument("--out", default="out/iterations.csv")
    args = parser.parse_args()

    config = SweepConfig(
        shape=VideoShape(*(int(x) for x in args.shape.split(","))),
        methods=("monarch-solve",),
        densities=(1.0,),
        seeds=tuple(int(s) for s in args.seeds.split(",")),
    )
    t_grid = tuple(int(t) for t in args.t_grid.split(","))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    entries = run_iteration_ablation(config, t_grid, out)
    by_t = {}
    for _, t_steps, mse, obj in entries:
        by_t.setdefault(t_steps, []).append((mse, obj))
    print(f"{'T':>4} {'mean mse':>14} {'mean objective':>16}")
    for t_steps in sorted(by_t):
        vals = by_t[t_steps]
        mean_mse = sum(v[0] for v in vals) / len(vals)
        mean_obj = sum(v[1] for v in vals) / len(vals)
        print(f"{t_steps:>4} {mean_mse:>14.6e} {mean_obj:>16.6f}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
