"""Structural and qualitative verification suites.

Each check mirrors one acceptance criterion and returns a CheckResult; the
CLI `verify` subcommand prints one pass/fail line per check and exits nonzero
if any fail. The same functions back the pytest acceptance module.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .baselines import dense_attention, monarch_plan_candidates, topk_oracle
from .factors import (
    MonarchFactors,
    densify,
    densify_tiled,
    embed_tied,
    param_count,
    project,
    project_tiled,
    strictness_counterexample,
)
from .layout import (
    BlockConfig,
    TilePlan,
    VideoShape,
    aligned_config,
    config_from_sizes,
    enumerate_aligned_configs,
    make_tile_plan,
)
from .reference import (
    reference_output,
    reference_output_tiled,
    reference_solve,
    reference_solve_tiled,
)
from .solver import AttentionProblem, SolverConfig, attention_output, solve, solve_tiled
from .synth import (
    SyntheticModelSpec,
    default_kernels,
    generate,
    random_semantic_pattern,
    verify_blockwise_rank1,
)
from .tensorops import frobenius_mse

RANK1_CHECK_SHAPES = ((2, 3, 3), (3, 4, 4), (2, 4, 6))
KERNEL_KINDS = ("exponential", "rational", "constant")


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


def _wrap(name: str, fn) -> CheckResult:
    start = time.perf_counter()
    passed, detail = fn()
    return CheckResult(name, passed, detail, time.perf_counter() - start)


def _line_config(n: int, b1: int, b2: int) -> BlockConfig:
    """A (b1, b2) config over a synthetic (1, b1, b2) grid; identity ordering."""
    assert b1 * b2 == n
    return BlockConfig(VideoShape(1, b1, b2), b1, b2, ("f", "h"), ("w",))


def check_aligned_blockwise_rank1(tol: float = 1e-12, budget_s: float = 5.0) -> CheckResult:
    """Every block of the permuted separable map is rank-1, for all aligned
    configs, kernel kinds, and the three reference shapes."""

    def run():
        worst = 0.0
        cases = 0
        for dims in RANK1_CHECK_SHAPES:
            shape = VideoShape(*dims)
            for kind in KERNEL_KINDS:
                d = generate(SyntheticModelSpec(shape=shape, kernels=default_kernels(shape, kind))).positional
                for cfg in enumerate_aligned_configs(shape):
                    report = verify_blockwise_rank1(d, cfg, tol)
                    worst = max(worst, report.max_ratio)
                    cases += 1
                    if not report.passed:
                        return False, f"{dims} {kind} {cfg.descriptor()}: max ratio {report.max_ratio:.3e}"
        return True, f"{cases} (shape, kernel, config) cases, max sigma2/sigma1 = {worst:.3e}"

    result = _wrap("aligned blockwise rank-1", run)
    if result.passed and result.seconds >= budget_s:
        result.passed = False
        result.detail += f"; runtime {result.seconds:.1f}s exceeded {budget_s}s"
    return result


def _random_tiling(rng: np.random.Generator, limit: int, c_max: int = 3) -> tuple[int, int, int, int]:
    b1 = int(rng.integers(2, limit + 1))
    b2 = int(rng.integers(2, limit + 1))
    c1 = int(rng.choice([c for c in range(1, c_max + 1) if b1 % c == 0]))
    c2 = int(rng.choice([c for c in range(1, c_max + 1) if b2 % c == 0]))
    return b1, b2, c1, c2


def check_containment(cases: int = 100, tol: float = 1e-13) -> CheckResult:
    """Tying-embedded tiled factors densify to exactly the untiled source."""

    def run():
        rng = np.random.default_rng(20240)
        worst = 0.0
        for _ in range(cases):
            b1, b2, c1, c2 = _random_tiling(rng, 6)
            src = MonarchFactors(
                b1, b2, rng.standard_normal((b2, b1, b1)), rng.standard_normal((b1, b2, b2))
            )
            plan = TilePlan(_line_config(b1 * b2, b1, b2), c1, c2)
            diff = np.abs(densify_tiled(embed_tied(src, plan)) - densify(src)).max()
            worst = max(worst, diff)
            if diff > tol:
                return False, f"b=({b1},{b2}) c=({c1},{c2}): max abs diff {diff:.3e}"
        return True, f"{cases} pairs, max abs diff = {worst:.3e}"

    return _wrap("tiled-family containment", run)


def check_strictness(res_tol: float = 1e-20) -> CheckResult:
    """Counterexample matrices: zero tiled residual, untiled residual >= 0.9/N^2."""

    def run():
        checked = 0
        for b1 in (2, 3, 4):
            for b2 in (2, 3, 4):
                n = b1 * b2
                cfg = _line_config(n, b1, b2)
                for c1 in range(1, b1 + 1):
                    if b1 % c1:
                        continue
                    for c2 in range(1, b2 + 1):
                        if b2 % c2 or (c1 == 1 and c2 == 1):
                            continue
                        plan = TilePlan(cfg, c1, c2)
                        m = strictness_counterexample(plan)
                        tiled_res = frobenius_mse(densify_tiled(project_tiled(m, plan)), m)
                        untiled_res = frobenius_mse(densify(project(m, cfg)), m)
                        if tiled_res > res_tol:
                            return False, f"b=({b1},{b2}) c=({c1},{c2}): tiled residual {tiled_res:.3e}"
                        if untiled_res < 0.9 / (n * n):
                            return False, (
                                f"b=({b1},{b2}) c=({c1},{c2}): untiled residual "
                                f"{untiled_res:.3e} < {0.9 / (n * n):.3e}"
                            )
                        checked += 1
        return True, f"{checked} plans over bases (2,2)..(4,4)"

    return _wrap("tiled-family strictness", run)


_ORACLE_SIZES = ((4, 3), (3, 4), (6, 3), (2, 8), (8, 4), (6, 4), (4, 6), (5, 4))
_ORACLE_TILED = (
    (4, 4, 2, 2), (6, 2, 3, 1), (4, 3, 2, 3), (8, 4, 2, 2), (6, 4, 2, 2),
    (9, 2, 3, 2), (4, 8, 2, 2), (8, 2, 4, 2),
)


def check_solver_oracle(cases: int = 100, tol: float = 1e-10) -> CheckResult:
    """Production solvers match the loop-level transcription of the updates."""

    def run():
        rng = np.random.default_rng(777)
        worst = 0.0
        for idx in range(cases):
            t_steps = int(rng.integers(1, 6))
            d = int(rng.integers(2, 9))
            if idx % 2 == 0:
                b1, b2 = _ORACLE_SIZES[(idx // 2) % len(_ORACLE_SIZES)]
                n = b1 * b2
                q = rng.standard_normal((n, d))
                k = rng.standard_normal((n, d))
                v = rng.standard_normal((n, d))
                problem = AttentionProblem(q, k, v, VideoShape(1, b1, b2))
                factors, _ = solve(problem, _line_config(n, b1, b2), SolverConfig(iterations=t_steps))
                ref_l, ref_r = reference_solve(q * problem.logit_scale, k, b1, b2, t_steps)
                out = attention_output(factors, v)
                ref_out = reference_output(ref_l, ref_r, v, b1, b2)
                diff = max(
                    np.abs(factors.l_blocks - ref_l).max(),
                    np.abs(factors.r_blocks - ref_r).max(),
                    np.abs(out - ref_out).max(),
                )
            else:
                b1, b2, c1, c2 = _ORACLE_TILED[(idx // 2) % len(_ORACLE_TILED)]
                n = b1 * b2
                q = rng.standard_normal((n, d))
                k = rng.standard_normal((n, d))
                v = rng.standard_normal((n, d))
                problem = AttentionProblem(q, k, v, VideoShape(1, b1, b2))
                plan = TilePlan(_line_config(n, b1, b2), c1, c2)
                factors, _ = solve_tiled(problem, plan, SolverConfig(iterations=t_steps))
                ref_l, ref_r = reference_solve_tiled(
                    q * problem.logit_scale, k, b1, b2, c1, c2, t_steps
                )
                out = attention_output(factors, v)
                ref_out = reference_output_tiled(ref_l, ref_r, v, b1, b2, c1, c2)
                diff = max(
                    np.abs(factors.l_blocks - ref_l).max(),
                    np.abs(factors.r_blocks - ref_r).max(),
                    np.abs(out - ref_out).max(),
                )
            worst = max(worst, diff)
            if diff > tol:
                return False, f"case {idx}: max abs diff {diff:.3e}"
        return True, f"{cases} instances, max abs diff = {worst:.3e}"

    return _wrap("solver oracle equivalence", run)


def check_dense_degenerate(seeds: int = 50, tol: float = 1e-8) -> CheckResult:
    """(N, 1) configs and (1,1,1)-neighborhood plans reproduce exact attention."""

    def run():
        rng = np.random.default_rng(99)
        worst = 0.0
        for s in range(seeds):
            d = 4
            if s % 2 == 0:
                n = int(rng.integers(4, 25))
                shape = VideoShape(1, n, 1)  # (b1, b2) = (N, 1)
                problem = AttentionProblem(
                    rng.standard_normal((n, d)), rng.standard_normal((n, d)),
                    rng.standard_normal((n, d)), shape,
                )
                factors, _ = solve(problem, aligned_config(shape, ("f", "h")), SolverConfig())
                out = attention_output(factors, problem.v)
            else:
                shape = VideoShape(2, int(rng.integers(2, 4)), int(rng.integers(2, 5)))
                n = shape.n
                problem = AttentionProblem(
                    rng.standard_normal((n, d)), rng.standard_normal((n, d)),
                    rng.standard_normal((n, d)), shape,
                )
                plan = make_tile_plan(shape, aligned_config(shape, ("f", "h")), (1, 1, 1))
                factors, _ = solve_tiled(problem, plan, SolverConfig())
                out = attention_output(factors, problem.v)
            _, exact = dense_attention(problem)
            diff = np.abs(out - exact).max()
            worst = max(worst, diff)
            if diff > tol:
                return False, f"seed {s}: max abs diff {diff:.3e}"
        return True, f"{seeds} seeds, max abs diff = {worst:.3e}"

    return _wrap("dense-degenerate exactness", run)


def check_row_stochastic(cases: int = 1000, tol: float = 1e-10) -> CheckResult:
    """Densified solver outputs are row-stochastic on random fuzz instances."""

    def run():
        rng = np.random.default_rng(5150)
        worst = 0.0
        for idx in range(cases):
            d = int(rng.integers(2, 6))
            t_steps = int(rng.integers(1, 4))
            if idx % 2 == 0:
                b1, b2 = _ORACLE_SIZES[idx % len(_ORACLE_SIZES)]
                n = b1 * b2
                problem = AttentionProblem(
                    rng.standard_normal((n, d)), rng.standard_normal((n, d)),
                    rng.standard_normal((n, d)), VideoShape(1, b1, b2),
                )
                factors, _ = solve(problem, _line_config(n, b1, b2), SolverConfig(iterations=t_steps))
                m = densify(factors)
            else:
                b1, b2, c1, c2 = _ORACLE_TILED[idx % len(_ORACLE_TILED)]
                n = b1 * b2
                problem = AttentionProblem(
                    rng.standard_normal((n, d)), rng.standard_normal((n, d)),
                    rng.standard_normal((n, d)), VideoShape(1, b1, b2),
                )
                plan = TilePlan(_line_config(n, b1, b2), c1, c2)
                factors, _ = solve_tiled(problem, plan, SolverConfig(iterations=t_steps))
                m = densify_tiled(factors)
            err = np.abs(m.sum(axis=1) - 1.0).max()
            worst = max(worst, err)
            if err > tol:
                return False, f"case {idx}: row-sum error {err:.3e}"
        return True, f"{cases} fuzz cases, max row-sum error = {worst:.3e}"

    return _wrap("row-stochasticity", run)


def check_projection_optimality(targets: int = 50, comparisons: int = 100) -> CheckResult:
    """Projection beats random candidates and local perturbations; tiled
    projection never does worse than untiled."""

    def run():
        rng = np.random.default_rng(31337)
        for t in range(targets):
            b1, b2 = _ORACLE_SIZES[t % len(_ORACLE_SIZES)]
            n = b1 * b2
            cfg = _line_config(n, b1, b2)
            target = rng.standard_normal((n, n))
            best = project(target, cfg)
            best_res = frobenius_mse(densify(best), target)
            for _ in range(comparisons):
                cand = MonarchFactors(
                    b1, b2, rng.standard_normal((b2, b1, b1)), rng.standard_normal((b1, b2, b2))
                )
                if frobenius_mse(densify(cand), target) < best_res - 1e-15:
                    return False, f"target {t}: random candidate beat projection"
            for _ in range(20):
                pert = MonarchFactors(
                    b1, b2,
                    best.l_blocks + 1e-3 * rng.standard_normal(best.l_blocks.shape),
                    best.r_blocks + 1e-3 * rng.standard_normal(best.r_blocks.shape),
                )
                if frobenius_mse(densify(pert), target) < best_res - 1e-15:
                    return False, f"target {t}: local perturbation beat projection"
        for t in range(100):
            b1, b2, c1, c2 = _ORACLE_TILED[t % len(_ORACLE_TILED)]
            n = b1 * b2
            cfg = _line_config(n, b1, b2)
            plan = TilePlan(cfg, c1, c2)
            target = rng.standard_normal((n, n))
            untiled_res = frobenius_mse(densify(project(target, cfg)), target)
            tiled_res = frobenius_mse(densify_tiled(project_tiled(target, plan)), target)
            if tiled_res > untiled_res + 1e-12:
                return False, f"tiled target {t}: {tiled_res:.6e} > untiled {untiled_res:.6e}"
        return True, f"{targets} optimality targets, 100 tiled-vs-untiled targets"

    return _wrap("projection optimality", run)


def matched_budget_contest(
    shape: VideoShape, max_density: float, seeds: int
) -> tuple[list[float], int, int]:
    """(feasible matched densities, monarch wins, comparisons) for the
    tiled-projection vs oracle-top-k contest on synthetic maps."""
    plans = {}
    for plan in monarch_plan_candidates(shape):
        dens = param_count(plan).density
        if dens <= max_density + 1e-12:
            key = round(dens, 12)
            if key not in plans or plan.num_tiles < plans[key].num_tiles:
                plans[key] = plan
    densities = sorted(plans)
    wins = 0
    comparisons = 0
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        semantic = random_semantic_pattern(shape, 5, rng)
        spec = SyntheticModelSpec(
            shape=shape, kernels=default_kernels(shape), semantic=semantic,
            normalize="row", seed=seed,
        )
        a = generate(spec).matrix
        for dens in densities:
            plan = plans[dens]
            order = plan.ordering().to_phi()
            target = a[np.ix_(order, order)]
            monarch_mse = frobenius_mse(densify_tiled(project_tiled(target, plan)), target)
            k = max(1, int(np.floor(dens * shape.n)))
            topk_mse = frobenius_mse(topk_oracle(a, k), a)
            comparisons += 1
            if monarch_mse < topk_mse:
                wins += 1
    return densities, wins, comparisons


def check_matched_budget(
    shape: VideoShape = VideoShape(4, 6, 8),
    max_density: float = 0.12,
    seeds: int = 40,
    budget_s: float = 60.0,
) -> CheckResult:
    """Tiled projection vs oracle top-k at matched densities <= max_density."""

    def run():
        densities, wins, comparisons = matched_budget_contest(shape, max_density, seeds)
        if not densities:
            feasible = sorted({round(param_count(p).density, 6) for p in monarch_plan_candidates(shape)})
            return False, (
                f"no monarch plan with density <= {max_density} exists at {shape.astuple()} "
                f"(minimum feasible density is {feasible[0]}); criterion cannot be exercised "
                f"at this scale - see the project notes"
            )
        frac = wins / comparisons
        detail = (
            f"densities {[round(d, 4) for d in densities]}, monarch wins "
            f"{wins}/{comparisons} ({100 * frac:.1f}%)"
        )
        return frac >= 0.95, detail

    result = _wrap(f"matched-budget contest {shape.astuple()}", run)
    if result.passed and result.seconds >= budget_s:
        result.passed = False
        result.detail += f"; runtime {result.seconds:.1f}s exceeded {budget_s}s"
    return result


def check_alignment() -> CheckResult:
    """Aligned (6,3) recovers the separable map exactly; misaligned (9,2) cannot."""

    def run():
        shape = VideoShape(2, 3, 3)
        d = generate(SyntheticModelSpec(shape=shape, kernels=default_kernels(shape))).positional
        aligned = aligned_config(shape, ("f", "h"))
        order = aligned.ordering().to_phi()
        target = d[np.ix_(order, order)]
        aligned_mse = frobenius_mse(densify(project(target, aligned)), target)
        mis = config_from_sizes(shape, 9, 2)
        mis_mse = frobenius_mse(densify(project(d, mis)), d)
        detail = f"aligned (6,3) mse = {aligned_mse:.3e}, misaligned (9,2) mse = {mis_mse:.3e}"
        ok = aligned_mse <= 1e-18 and mis_mse >= 1e3 * max(aligned_mse, 1e-30) and mis_mse > 0
        return ok, detail

    return _wrap("alignment ablation (6,3) vs (9,2)", run)


def check_iterations(cases: int = 100) -> CheckResult:
    """More refinement helps: MSE at T=10 <= MSE at T=1 on >= 90% of cases;
    objective monotonicity is a soft check (warn only)."""

    def run():
        rng = np.random.default_rng(1234)
        mse_wins = 0
        monotone = 0
        for idx in range(cases):
            b1, b2 = _ORACLE_SIZES[idx % len(_ORACLE_SIZES)]
            n = b1 * b2
            d = 4
            problem = AttentionProblem(
                rng.standard_normal((n, d)), rng.standard_normal((n, d)),
                rng.standard_normal((n, d)), VideoShape(1, b1, b2),
            )
            _, trace = solve(
                problem, _line_config(n, b1, b2),
                SolverConfig(iterations=10, trace_objective=True, trace_mse=True),
            )
            if trace.mses[9] <= trace.mses[0] + 1e-15:
                mse_wins += 1
            obj = np.asarray(trace.objectives)
            rel_drop = np.diff(obj) / np.maximum(np.abs(obj[:-1]), 1e-30)
            if (rel_drop >= -1e-8).all():
                monotone += 1
        detail = f"mse(T=10) <= mse(T=1) on {mse_wins}/{cases}; objective monotone on {monotone}/{cases}"
        if monotone < 0.95 * cases:
            warnings.warn(
                f"objective trace monotonicity below 95%: {monotone}/{cases} "
                "(soft check per the update-equation caveats)",
                stacklevel=2,
            )
        return mse_wins >= 0.90 * cases, detail

    return _wrap("iteration ablation", run)


def check_top_p() -> CheckResult:
    """Coverage sanity: uniform rows, one-hot rows, and flat-kernel head > 48%."""

    def run():
        from .baselines import top_p_coverage

        n = 20
        counts, _ = top_p_coverage(np.full((3, n), 1.0 / n), 0.95)
        if not (counts == int(np.ceil(0.95 * n))).all():
            return False, f"uniform rows gave counts {counts}"
        one_hot = np.zeros((4, n))
        one_hot[np.arange(4), [0, 3, 9, 19]] = 1.0
        counts, _ = top_p_coverage(one_hot, 0.95)
        if not (counts == 1).all():
            return False, f"one-hot rows gave counts {counts}"
        shape = VideoShape(2, 4, 4)
        a = generate(
            SyntheticModelSpec(
                shape=shape, kernels=default_kernels(shape, "constant"), normalize="row"
            )
        ).matrix
        _, fraction = top_p_coverage(a, 0.95)
        return fraction > 0.48, f"flat-kernel head coverage fraction = {fraction:.3f}"

    return _wrap("top-p coverage sanity", run)


def check_param_accounting() -> CheckResult:
    """Tiled factor counts are exactly c2x (L) and c1x (R) the untiled counts,
    and match literal tensor element counts."""

    def run():
        rng = np.random.default_rng(7)
        for b1, b2, c1, c2 in _ORACLE_TILED + ((4, 4, 1, 1), (6, 3, 6, 3)):
            n = b1 * b2
            cfg = _line_config(n, b1, b2)
            plan = TilePlan(cfg, c1, c2)
            untiled = param_count(cfg)
            tiled = param_count(plan)
            if tiled.l_params != c2 * untiled.l_params or tiled.r_params != c1 * untiled.r_params:
                return False, f"b=({b1},{b2}) c=({c1},{c2}) counts off"
            src = MonarchFactors(
                b1, b2, rng.standard_normal((b2, b1, b1)), rng.standard_normal((b1, b2, b2))
            )
            emb = embed_tied(src, plan)
            if emb.l_blocks.size != tiled.l_params or emb.r_blocks.size != tiled.r_params:
                return False, f"b=({b1},{b2}) c=({c1},{c2}) literal element counts off"
            if src.l_blocks.size != untiled.l_params or src.r_blocks.size != untiled.r_params:
                return False, f"b=({b1},{b2}) untiled literal element counts off"
        return True, "all tested plans: tiled counts = (c2 x L, c1 x R), literal sizes agree"

    return _wrap("parameter accounting", run)


def run_all_checks(overrides: dict[str, str] | None = None) -> list[CheckResult]:
    """Criteria 1..12 in order (13, CLI determinism, is exercised by the CLI tests).

    ``overrides`` may relax or tighten tolerances via ``verify.*`` config keys
    (rank1_tol, containment_tol, oracle_tol, dense_tol, row_sum_tol,
    contest_shape, contest_max_density, contest_seeds).
    """
    kv = overrides or {}
    contest_shape = VideoShape(
        *(int(x) for x in kv.get("verify.contest_shape", "4,6,8").split(","))
    )
    return [
        check_aligned_blockwise_rank1(tol=float(kv.get("verify.rank1_tol", 1e-12))),
        check_containment(tol=float(kv.get("verify.containment_tol", 1e-13))),
        check_strictness(),
        check_solver_oracle(tol=float(kv.get("verify.oracle_tol", 1e-10))),
        check_dense_degenerate(tol=float(kv.get("verify.dense_tol", 1e-8))),
        check_row_stochastic(tol=float(kv.get("verify.row_sum_tol", 1e-10))),
        check_projection_optimality(),
        check_matched_budget(
            shape=contest_shape,
            max_density=float(kv.get("verify.contest_max_density", 0.12)),
            seeds=int(kv.get("verify.contest_seeds", 40)),
        ),
        check_alignment(),
        check_iterations(),
        check_top_p(),
        check_param_accounting(),
    ]
