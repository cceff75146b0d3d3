"""Benchmark sweeps: matched-budget error curves, alignment and iteration
ablations, all emitting deterministic CSV plus a machine-readable summary.

Sweep points are independent jobs run on a thread pool; rows are buffered and
written in config order regardless of completion order. Emitted densities are
always the actual parameter counts of the configuration run, never the
nominal target (the target is recorded in the config descriptor).
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import (
    BudgetError,
    budget_match,
    dense_attention,
    lowrank_oracle,
    topk_oracle,
)
from .factors import densify, densify_tiled, param_count, project, project_tiled
from .layout import (
    BlockConfig,
    VideoShape,
    aligned_config,
    config_from_sizes,
    enumerate_aligned_configs,
)
from .qkv_io import load_problem
from .solver import AttentionProblem, SolverConfig, approx_attention_matrix, solve, solve_tiled
from .synth import (
    DEFAULT_GAMMAS,
    DistanceKernel,
    SyntheticModelSpec,
    default_kernels,
    generate,
    random_semantic_pattern,
)
from .tensorops import frobenius_mse

SWEEP_COLUMNS = (
    "run_id", "seed", "f", "h", "w", "method", "config_descriptor",
    "density", "params", "iterations", "mse", "objective_final", "wall_ns",
)

KNOWN_METHODS = ("topk", "lowrank", "monarch-project", "monarch-solve", "tiled-project", "tiled-solve")


class ConfigError(ValueError):
    pass


def parse_kv_config(text: str) -> dict[str, str]:
    """Flat ``section.key = value`` lines; '#' starts a comment."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def parse_int_list(value: str) -> tuple[int, ...]:
    return tuple(int(x) for x in value.split(",") if x.strip())


def parse_float_list(value: str) -> tuple[float, ...]:
    return tuple(float(x) for x in value.split(",") if x.strip())


@dataclass(frozen=True)
class SweepConfig:
    shape: VideoShape
    methods: tuple[str, ...]
    densities: tuple[float, ...]
    seeds: tuple[int, ...] = (0,)
    iterations: tuple[int, ...] = (1,)
    tensor_file: str | None = None
    kernel_kind: str = "exponential"
    gammas: tuple[float, float, float] = DEFAULT_GAMMAS
    semantic_entries: int = 5
    semantic_scale: float = 1.0
    noise: float = 0.0

    def __post_init__(self) -> None:
        if not self.methods:
            raise ConfigError("at least one method required")
        for m in self.methods:
            if m not in KNOWN_METHODS:
                raise ConfigError(f"unknown method {m!r}; known: {KNOWN_METHODS}")
        if not self.densities or not all(0.0 < d <= 1.0 for d in self.densities):
            raise ConfigError("densities must lie in (0, 1]")


def sweep_config_from_kv(kv: dict[str, str]) -> SweepConfig:
    try:
        shape = VideoShape(*parse_int_list(kv["sweep.shape"]))
        methods = tuple(m.strip() for m in kv["sweep.methods"].split(","))
        densities = parse_float_list(kv["sweep.densities"])
    except KeyError as exc:
        raise ConfigError(f"missing required config key {exc}") from None
    return SweepConfig(
        shape=shape,
        methods=methods,
        densities=densities,
        seeds=parse_int_list(kv.get("sweep.seeds", "0")),
        iterations=parse_int_list(kv.get("sweep.iterations", "1")),
        tensor_file=kv.get("sweep.tensor_file"),
        kernel_kind=kv.get("synth.kernel", "exponential"),
        gammas=tuple(parse_float_list(kv.get("synth.gammas", "0.7,0.85,0.85"))),  # type: ignore[arg-type]
        semantic_entries=int(kv.get("synth.semantic_entries", "5")),
        semantic_scale=float(kv.get("synth.semantic_scale", "1.0")),
        noise=float(kv.get("synth.noise", "0.0")),
    )


def make_kernels(shape: VideoShape, kind: str, gammas: tuple[float, float, float]):
    if kind == "exponential":
        return (
            DistanceKernel("exponential", shape.f, gammas[0]),
            DistanceKernel("exponential", shape.h, gammas[1]),
            DistanceKernel("exponential", shape.w, gammas[2]),
        )
    return default_kernels(shape, kind)


def synthetic_problem(config: SweepConfig, seed: int) -> tuple[np.ndarray, AttentionProblem]:
    """Row-normalized synthetic map plus an attention problem realizing it.

    The solver needs logits, not the map, so Q = log(A) with K = I and unit
    scale, for which softmax(Q K^T) reproduces A exactly.
    """
    rng = np.random.default_rng(seed)
    semantic = random_semantic_pattern(config.shape, config.semantic_entries, rng)
    spec = SyntheticModelSpec(
        shape=config.shape,
        kernels=make_kernels(config.shape, config.kernel_kind, config.gammas),
        semantic=semantic,
        noise=config.noise,
        normalize="row",
        seed=seed,
        semantic_scale=config.semantic_scale,
    )
    a = generate(spec).matrix
    n = config.shape.n
    q = np.log(a)
    k = np.eye(n)
    v = rng.standard_normal((n, 4))
    return a, AttentionProblem(q, k, v, config.shape, scale=1.0)


def best_untiled_config(shape: VideoShape, density: float) -> BlockConfig:
    """Densest aligned untiled config not exceeding the target density."""
    feasible = [
        c for c in enumerate_aligned_configs(shape) if param_count(c).density <= density + 1e-12
    ]
    if not feasible:
        options = sorted({round(param_count(c).density, 12) for c in enumerate_aligned_configs(shape)})
        raise BudgetError(
            f"no aligned untiled config at density <= {density} for {shape.astuple()}; "
            f"nearest feasible densities: {options}"
        )
    feasible.sort(key=lambda c: -param_count(c).density)
    return feasible[0]


@dataclass
class SweepRow:
    run_id: str
    seed: int
    shape: VideoShape
    method: str
    descriptor: str
    density: float
    params: int
    iterations: int
    mse: float
    objective_final: float | None
    wall_ns: int

    def csv_fields(self) -> list[str]:
        return [
            self.run_id,
            str(self.seed),
            str(self.shape.f),
            str(self.shape.h),
            str(self.shape.w),
            self.method,
            self.descriptor,
            format(self.density, ".12g"),
            str(self.params),
            str(self.iterations),
            format(self.mse, ".12g"),
            "" if self.objective_final is None else format(self.objective_final, ".12g"),
            "0",  # measured wall time lives in the summary, keeping CSV bytes reproducible
        ]


def _run_method(
    config: SweepConfig,
    method: str,
    target_density: float,
    seed: int,
    t_steps: int,
    a: np.ndarray,
    problem: AttentionProblem,
) -> tuple[str, float, int, int, float, float | None]:
    """Returns (descriptor, density, params, iterations, mse, objective_final)."""
    shape = config.shape
    n = shape.n
    prefix = f"t={format(target_density, '.12g')}"
    if method == "topk":
        k = budget_match(shape, "topk", target_density)
        approx = topk_oracle(a, k)
        return f"{prefix}|k={k}", k / n, k * n, 0, frobenius_mse(approx, a), None
    if method == "lowrank":
        rank = budget_match(shape, "lowrank", target_density)
        approx = lowrank_oracle(a, rank)
        return f"{prefix}|rank={rank}", 2 * rank / n, 2 * n * rank, 0, frobenius_mse(approx, a), None
    if method in ("monarch-project", "monarch-solve"):
        cfg = best_untiled_config(shape, target_density)
        pc = param_count(cfg)
        desc = f"{prefix}|{cfg.descriptor()}"
        if method == "monarch-project":
            order = cfg.ordering().to_phi()
            approx = densify(project(a[np.ix_(order, order)], cfg))
            return desc, pc.density, pc.total, 0, frobenius_mse(approx, a[np.ix_(order, order)]), None
        factors, trace = solve(problem, cfg, SolverConfig(iterations=t_steps, trace_objective=True))
        approx = approx_attention_matrix(factors)
        return desc, pc.density, pc.total, t_steps, frobenius_mse(approx, a), trace.objectives[-1]
    if method in ("tiled-project", "tiled-solve"):
        plan = budget_match(shape, "monarch", target_density)
        pc = param_count(plan)
        desc = f"{prefix}|{plan.descriptor()}"
        if method == "tiled-project":
            order = plan.ordering().to_phi()
            approx = densify_tiled(project_tiled(a[np.ix_(order, order)], plan))
            return desc, pc.density, pc.total, 0, frobenius_mse(approx, a[np.ix_(order, order)]), None
        factors, trace = solve_tiled(problem, plan, SolverConfig(iterations=t_steps, trace_objective=True))
        approx = approx_attention_matrix(factors)
        return desc, pc.density, pc.total, t_steps, frobenius_mse(approx, a), trace.objectives[-1]
    raise ConfigError(f"unknown method {method!r}")


def _sweep_jobs(config: SweepConfig):
    """(method, density, seed, t) tuples in deterministic config order."""
    jobs = []
    for density in config.densities:
        for method in config.methods:
            t_grid = config.iterations if method.endswith("solve") else (0,)
            for t_steps in t_grid:
                for seed in config.seeds:
                    jobs.append((method, density, seed, t_steps))
    return jobs


def run_sweep(config: SweepConfig, out_dir: Path, workers: int | None = None) -> tuple[Path, Path]:
    """Execute every (method, density, seed) point; write CSV + summary JSON."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    problems: dict[int, tuple[np.ndarray, AttentionProblem]] = {}
    for seed in config.seeds:
        if config.tensor_file is not None:
            problem = load_problem(config.tensor_file)
            problems[seed] = (dense_attention(problem)[0], problem)
        else:
            problems[seed] = synthetic_problem(config, seed)
    jobs = _sweep_jobs(config)

    def execute(job):
        method, density, seed, t_steps = job
        a, problem = problems[seed]
        start = time.perf_counter_ns()
        desc, dens, params, iters, mse, obj = _run_method(
            config, method, density, seed, t_steps, a, problem
        )
        wall = time.perf_counter_ns() - start
        return desc, dens, params, iters, mse, obj, wall

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(execute, jobs))

    rows: list[SweepRow] = []
    for idx, (job, res) in enumerate(zip(jobs, results)):
        method, density, seed, _ = job
        desc, dens, params, iters, mse, obj, wall = res
        rows.append(
            SweepRow(f"r{idx:04d}", seed, config.shape, method, desc, dens, params, iters, mse, obj, wall)
        )

    csv_path = out_dir / "sweep.csv"
    _write_csv(csv_path, SWEEP_COLUMNS, [r.csv_fields() for r in rows])
    summary_path = out_dir / "summary.json"
    summary = summarize_rows(rows)
    summary["timings_ns"] = {r.run_id: r.wall_ns for r in rows}
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return csv_path, summary_path


def summarize_rows(rows: list[SweepRow]) -> dict:
    """Per target-density bucket, the method attaining the lowest MSE."""
    buckets: dict[str, list[SweepRow]] = {}
    for row in rows:
        target = row.descriptor.split("|", 1)[0].removeprefix("t=")
        buckets.setdefault(target, []).append(row)
    per_density = {}
    for target, members in buckets.items():
        best = min(members, key=lambda r: (r.mse, r.method, r.run_id))
        per_density[target] = {"best_method": best.method, "best_mse": format(best.mse, ".12g")}
    return {"per_density": per_density, "rows": len(rows)}


def _write_csv(path: Path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for fields in rows:
            fh.write(",".join(fields) + "\n")


ALIGN_COLUMNS = ("run_id", "f", "h", "w", "config_descriptor", "aligned", "b1", "b2", "mse")


def run_alignment_ablation(
    shape: VideoShape,
    kernels,
    out_path: Path,
) -> list[tuple[str, bool, int, int, float]]:
    """Projection MSE of every aligned config versus every same-area raw
    (misaligned) blocking on the pure positional component."""
    spec = SyntheticModelSpec(shape=shape, kernels=kernels)
    d = generate(spec).positional
    entries: list[tuple[str, bool, int, int, float]] = []
    for cfg in enumerate_aligned_configs(shape):
        order = cfg.ordering().to_phi()
        target = d[np.ix_(order, order)]
        mse = frobenius_mse(densify(project(target, cfg)), target)
        entries.append((cfg.descriptor(), True, cfg.b1, cfg.b2, mse))
    n = shape.n
    for b1 in range(2, n):
        if n % b1:
            continue
        cfg = config_from_sizes(shape, b1, n // b1)
        if cfg.aligned:
            continue
        mse = frobenius_mse(densify(project(d, cfg)), d)
        entries.append((cfg.descriptor(), False, cfg.b1, cfg.b2, mse))
    rows = [
        [f"a{idx:04d}", str(shape.f), str(shape.h), str(shape.w), desc,
         "1" if aligned else "0", str(b1), str(b2), format(mse, ".12g")]
        for idx, (desc, aligned, b1, b2, mse) in enumerate(entries)
    ]
    _write_csv(Path(out_path), ALIGN_COLUMNS, rows)
    return entries


ITERS_COLUMNS = ("run_id", "seed", "f", "h", "w", "config_descriptor", "iterations", "mse", "objective")


def run_iteration_ablation(
    config: SweepConfig,
    t_grid: tuple[int, ...],
    out_path: Path,
) -> list[tuple[int, int, float, float]]:
    """Solver quality versus refinement steps on the (fh, w) base config.

    One solve at max(t_grid) per seed; the per-iteration trace supplies every
    smaller T (iteration t of a longer run equals an independent T = t run).
    """
    t_max = max(t_grid)
    base = aligned_config(config.shape, ("f", "h"))
    entries: list[tuple[int, int, float, float]] = []
    for seed in config.seeds:
        a, problem = synthetic_problem(config, seed)
        _, trace = solve(
            problem, base, SolverConfig(iterations=t_max, trace_objective=True, trace_mse=True)
        )
        for t_steps in t_grid:
            entries.append((seed, t_steps, trace.mses[t_steps - 1], trace.objectives[t_steps - 1]))
    rows = [
        [f"i{idx:04d}", str(seed), str(config.shape.f), str(config.shape.h), str(config.shape.w),
         base.descriptor(), str(t_steps), format(mse, ".12g"), format(obj, ".12g")]
        for idx, (seed, t_steps, mse, obj) in enumerate(entries)
    ]
    _write_csv(Path(out_path), ITERS_COLUMNS, rows)
    return entries
