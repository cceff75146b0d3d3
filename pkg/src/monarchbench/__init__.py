"""Monarch and tiled-Monarch structured approximation of softmax attention."""

from .baselines import (
    ApproxReport,
    BudgetError,
    budget_match,
    dense_attention,
    dense_attention_matrix,
    lowrank_oracle,
    top_p_coverage,
    topk_oracle,
)
from .factors import (
    MonarchFactors,
    TiledMonarchFactors,
    apply_factors,
    densify,
    densify_tiled,
    dump_text,
    embed_tied,
    identity_factors,
    load_factors,
    param_count,
    project,
    project_tiled,
    save_factors,
    strictness_counterexample,
)
from .layout import (
    BlockConfig,
    LayoutPermutation,
    TilePlan,
    TokenOrdering,
    VideoShape,
    aligned_config,
    build_permutation,
    config_from_sizes,
    enumerate_aligned_configs,
    flatten_index,
    make_tile_plan,
    phi_ordering,
    rho_ordering,
)
from .qkv_io import load_problem, save_problem
from .solver import (
    AttentionProblem,
    SolverConfig,
    SolverTrace,
    SolverWorkspace,
    approx_attention_matrix,
    attention_output,
    objective,
    solve,
    solve_tiled,
)
from .synth import (
    DistanceKernel,
    SemanticPattern,
    SyntheticModelSpec,
    case_fixture,
    default_kernels,
    generate,
    random_semantic_pattern,
    verify_blockwise_rank1,
)
from .tensorops import (
    Blocked4View,
    SvdResult,
    contract,
    frobenius_mse,
    softmax_rows,
    truncated_svd,
)

__all__ = [name for name in dir() if not name.startswith("_")]
