"""Command-line benchmark runner.

Subcommands: ``sweep`` (matched-budget error curves), ``align`` (alignment
ablation), ``iters`` (iteration ablation), ``verify`` (structural and
qualitative suites, one pass/fail line each). Exit codes: 0 success, 1 failed
verification, 2 configuration errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .baselines import BudgetError
from .layout import LayoutError, VideoShape
from .qkv_io import TensorFileError
from .sweep import (
    ConfigError,
    SweepConfig,
    make_kernels,
    parse_float_list,
    parse_int_list,
    parse_kv_config,
    run_alignment_ablation,
    run_iteration_ablation,
    run_sweep,
    sweep_config_from_kv,
)
from .verify import run_all_checks

CONFIG_ERRORS = (ConfigError, BudgetError, LayoutError, TensorFileError, KeyError, ValueError, OSError)


def _load_kv(path: str | None) -> dict[str, str]:
    if path is None:
        return {}
    return parse_kv_config(Path(path).read_text())


def _cmd_sweep(args) -> int:
    kv = _load_kv(args.config)
    config = sweep_config_from_kv(kv)
    if args.seed is not None:
        config = SweepConfig(
            shape=config.shape, methods=config.methods, densities=config.densities,
            seeds=(args.seed,), iterations=config.iterations, tensor_file=config.tensor_file,
            kernel_kind=config.kernel_kind, gammas=config.gammas,
            semantic_entries=config.semantic_entries, semantic_scale=config.semantic_scale,
            noise=config.noise,
        )
    csv_path, summary_path = run_sweep(config, Path(args.out))
    if not args.quiet:
        print(f"wrote {csv_path} and {summary_path}")
    return 0


def _cmd_align(args) -> int:
    kv = _load_kv(args.config)
    dims = parse_int_list(kv.get("align.shape", kv.get("sweep.shape", "2,3,3")))
    shape = VideoShape(*dims)
    kind = kv.get("align.kernel", "exponential")
    gammas = parse_float_list(kv.get("align.gammas", "0.5,0.5,0.5"))
    kernels = make_kernels(shape, kind, tuple(gammas))  # type: ignore[arg-type]
    out = Path(args.out)
    entries = run_alignment_ablation(shape, kernels, out)
    if not args.quiet:
        for desc, aligned, _, _, mse in entries:
            print(f"{'aligned   ' if aligned else 'misaligned'} {desc}: mse = {mse:.6e}")
        print(f"wrote {out}")
    return 0


def _cmd_iters(args) -> int:
    kv = _load_kv(args.config)
    dims = parse_int_list(kv.get("iters.shape", kv.get("sweep.shape", "2,4,4")))
    config = SweepConfig(
        shape=VideoShape(*dims),
        methods=("monarch-solve",),
        densities=(1.0,),
        seeds=(args.seed,) if args.seed is not None else parse_int_list(kv.get("iters.seeds", "0,1,2")),
        kernel_kind=kv.get("synth.kernel", "exponential"),
        gammas=tuple(parse_float_list(kv.get("synth.gammas", "0.7,0.85,0.85"))),  # type: ignore[arg-type]
        semantic_entries=int(kv.get("synth.semantic_entries", "5")),
        noise=float(kv.get("synth.noise", "0.0")),
    )
    t_grid = parse_int_list(kv.get("iters.t_grid", "1,2,5,10"))
    out = Path(args.out)
    entries = run_iteration_ablation(config, t_grid, out)
    if not args.quiet:
        for seed, t_steps, mse, obj in entries:
            print(f"seed {seed} T={t_steps}: mse = {mse:.6e}, objective = {obj:.6f}")
        print(f"wrote {out}")
    return 0


def _cmd_verify(args) -> int:
    results = run_all_checks(_load_kv(args.config))
    for res in results:
        status = "PASS" if res.passed else "FAIL"
        if args.quiet:
            print(f"{status} {res.name}")
        else:
            print(f"{status} {res.name} ({res.seconds:.2f}s): {res.detail}")
    failed = [r for r in results if not r.passed]
    if failed and not args.quiet:
        print(f"{len(failed)} of {len(results)} checks failed", file=sys.stderr)
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="monarchbench", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, needs_out in (
        ("sweep", _cmd_sweep, True),
        ("align", _cmd_align, True),
        ("iters", _cmd_iters, True),
        ("verify", _cmd_verify, False),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="flat key=value config file")
        p.add_argument("--out", required=needs_out,
                       help="output directory (sweep) or file path" if needs_out else "unused")
        p.add_argument("--seed", type=int, default=None, help="override configured seeds")
        p.add_argument("--quiet", action="store_true")
        p.set_defaults(fn=fn)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
