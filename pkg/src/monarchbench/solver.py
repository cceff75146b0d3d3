"""Alternating-refinement estimation of Monarch factors from Q and K.

One iteration updates R with L held fixed, then L with R fixed, each an exact
coordinate maximization of the variational softmax objective

    <A, Q K^T> + H(A)

restricted to row-stochastic factor blocks, so the densified approximation
always has unit row sums and the attention matrix is never materialized.
L starts as stacked identities; Q is pre-scaled by the problem's logit scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import dense_attention_matrix
from .factors import MonarchFactors, TiledMonarchFactors, densify, densify_tiled
from .layout import BlockConfig, TilePlan, VideoShape
from .tensorops import contract, frobenius_mse, softmax_axes, softmax_rows


class SolverError(ValueError):
    pass


@dataclass(frozen=True)
class AttentionProblem:
    """Q, K, V of shape (N, d) over a video token grid; scale defaults to 1/sqrt(d)."""

    q: np.ndarray
    k: np.ndarray
    v: np.ndarray
    shape: VideoShape
    scale: float | None = None

    def __post_init__(self) -> None:
        n = self.shape.n
        d = self.q.shape[1] if self.q.ndim == 2 else -1
        for name, m in (("q", self.q), ("k", self.k), ("v", self.v)):
            if m.ndim != 2 or m.shape[0] != n:
                raise SolverError(f"{name} must be ({n}, d), got {m.shape}")
            if not np.isfinite(m).all():
                raise SolverError(f"{name} has non-finite entries")
        if self.k.shape[1] != d:
            raise SolverError("q and k must share the head dimension")

    @property
    def n(self) -> int:
        return self.shape.n

    @property
    def head_dim(self) -> int:
        return self.q.shape[1]

    @property
    def logit_scale(self) -> float:
        return float(self.scale) if self.scale is not None else 1.0 / np.sqrt(self.head_dim)


@dataclass(frozen=True)
class SolverConfig:
    iterations: int = 1
    eps_div: float = 1e-30
    eps_log: float = 1e-300
    trace_objective: bool = False
    trace_mse: bool = False
    keep_workspace: bool = False

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise SolverError("iterations must be >= 1")
        for name, eps in (("eps_div", self.eps_div), ("eps_log", self.eps_log)):
            if not 0.0 < eps <= 1e-6:
                raise SolverError(f"{name} must lie in (0, 1e-6], got {eps}")


@dataclass
class SolverWorkspace:
    """Update intermediates of the final iteration (transient, never serialized)."""

    alpha_r: np.ndarray
    c_r: np.ndarray
    beta_r: np.ndarray
    z_r: np.ndarray
    alpha_l: np.ndarray
    c_l: np.ndarray
    beta_l: np.ndarray
    z_l: np.ndarray


@dataclass
class SolverTrace:
    """Per-iteration objective values and (optionally) MSE against dense attention."""

    objectives: list[float] = field(default_factory=list)
    mses: list[float] = field(default_factory=list)
    workspace: SolverWorkspace | None = None


def _ordered_qkv(problem: AttentionProblem, order: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    qs = (problem.q * problem.logit_scale)[order]
    ks = problem.k[order]
    return qs, ks


def _dense_reference(problem: AttentionProblem, order: np.ndarray) -> np.ndarray:
    a = dense_attention_matrix(problem.q, problem.k, problem.logit_scale)
    return a[np.ix_(order, order)]


def solve(
    problem: AttentionProblem,
    config: BlockConfig,
    solver: SolverConfig = SolverConfig(),
) -> tuple[MonarchFactors, SolverTrace]:
    """Estimate untiled factors for softmax(scale * Q K^T) under ``config``.

    Q and K are brought into the config's slot ordering and viewed as
    (b1, b2, d) tensors; the returned factors carry that ordering so output
    and densified comparisons can be mapped back to row-major tokens.
    """
    if config.shape != problem.shape:
        raise SolverError(f"config shape {config.shape} != problem shape {problem.shape}")
    b1, b2 = config.b1, config.b2
    order = config.ordering().to_phi()
    qs, ks = _ordered_qkv(problem, order)
    if not (np.isfinite(qs).all() and np.isfinite(ks).all()):
        raise SolverError("non-finite logits")
    d = problem.head_dim
    qb = qs.reshape(b1, b2, d)
    kb = ks.reshape(b1, b2, d)
    l = np.broadcast_to(np.eye(b1), (b2, b1, b1)).copy()
    r = np.zeros((b1, b2, b2))
    trace = SolverTrace()
    dense_ref = _dense_reference(problem, order) if solver.trace_mse else None
    for _ in range(solver.iterations):
        alpha_r = contract("alpha_r", l, qb)
        c_r = contract("c_r", l)
        beta_r = contract("beta_r", alpha_r, kb)
        z_r = beta_r / np.maximum(c_r, solver.eps_div)[:, :, None]
        r = softmax_rows(z_r)
        alpha_l = contract("alpha_l", r, kb)
        c_l = contract("c_l", r * np.log(np.maximum(r, solver.eps_log)))
        beta_l = contract("beta_l", alpha_l, qb)
        z_l = beta_l - c_l[:, None, :]
        l = softmax_rows(z_l)
        if solver.keep_workspace:
            trace.workspace = SolverWorkspace(alpha_r, c_r, beta_r, z_r, alpha_l, c_l, beta_l, z_l)
        if solver.trace_objective or solver.trace_mse:
            approx = densify(MonarchFactors(b1, b2, l, r))
            if solver.trace_objective:
                trace.objectives.append(_objective_of_matrix(approx, qs @ ks.T))
            if dense_ref is not None:
                trace.mses.append(frobenius_mse(approx, dense_ref))
    return MonarchFactors(b1, b2, l, r, order=order), trace


def solve_tiled(
    problem: AttentionProblem,
    plan: TilePlan,
    solver: SolverConfig = SolverConfig(),
) -> tuple[TiledMonarchFactors, SolverTrace]:
    """Tiled variant: every tile refines independently; R' rows are softmaxed
    over i2 and L' rows jointly over (k1, k2, i1), so each query row's weights
    across all tiles sum to 1."""
    if plan.shape != problem.shape:
        raise SolverError(f"plan shape {plan.shape} != problem shape {problem.shape}")
    c1, c2 = plan.c1, plan.c2
    s1, s2 = plan.tile_b1, plan.tile_b2
    order = plan.ordering().to_phi()
    qs, ks = _ordered_qkv(problem, order)
    if not (np.isfinite(qs).all() and np.isfinite(ks).all()):
        raise SolverError("non-finite logits")
    d = problem.head_dim
    qb = qs.reshape(c1, s1, c2, s2, d)  # [l1, l2, j1, j2, v]
    kb = ks.reshape(c1, s1, c2, s2, d)  # [k1, k2, i1, i2, v]
    l = np.broadcast_to(np.eye(s1), (c1, c2, c1, c2, s2, s1, s1)).copy()
    r = np.zeros((c1, c2, c1, c2, s1, s2, s2))
    trace = SolverTrace()
    dense_ref = _dense_reference(problem, order) if solver.trace_mse else None
    for _ in range(solver.iterations):
        alpha_r = contract("t_alpha_r", l, qb)
        c_r = contract("t_c_r", l)
        beta_r = contract("t_beta_r", alpha_r, kb)
        z_r = beta_r / np.maximum(c_r, solver.eps_div)[..., None]
        r = softmax_rows(z_r)
        alpha_l = contract("t_alpha_l", r, kb)
        c_l = contract("t_c_l", r * np.log(np.maximum(r, solver.eps_log)))
        beta_l = contract("t_beta_l", alpha_l, qb)
        # joint softmax over (k1, i1, k2) = axes (2, 3, 6) of [l1,j1,k1,i1,j2,l2,k2]
        z_l = beta_l - c_l[:, :, :, :, :, None, :]
        l = softmax_axes(z_l, (2, 3, 6))
        if solver.keep_workspace:
            trace.workspace = SolverWorkspace(alpha_r, c_r, beta_r, z_r, alpha_l, c_l, beta_l, z_l)
        if solver.trace_objective or solver.trace_mse:
            approx = densify_tiled(TiledMonarchFactors(plan, l, r))
            if solver.trace_objective:
                trace.objectives.append(_objective_of_matrix(approx, qs @ ks.T))
            if dense_ref is not None:
                trace.mses.append(frobenius_mse(approx, dense_ref))
    return TiledMonarchFactors(plan, l, r, order=order), trace


def attention_output(factors: MonarchFactors | TiledMonarchFactors, v: np.ndarray) -> np.ndarray:
    """Apply solver factors to a row-major V and return a row-major output."""
    from .factors import apply_factors

    v = np.asarray(v, dtype=np.float64)
    if factors.order is None:
        return apply_factors(factors, v)
    out_ordered = apply_factors(factors, v[factors.order])
    out = np.empty_like(out_ordered)
    out[factors.order] = out_ordered
    return out


def approx_attention_matrix(factors: MonarchFactors | TiledMonarchFactors) -> np.ndarray:
    """Densified approximation mapped back to row-major token order."""
    m = densify(factors) if isinstance(factors, MonarchFactors) else densify_tiled(factors)
    if factors.order is None:
        return m
    out = np.empty_like(m)
    out[np.ix_(factors.order, factors.order)] = m
    return out


def _objective_of_matrix(approx: np.ndarray, logits: np.ndarray) -> float:
    if approx.min() < 0:
        raise SolverError("objective needs a non-negative approximation")
    ent = np.where(approx > 0, approx * np.log(np.maximum(approx, 1e-300)), 0.0)
    return float(np.sum(approx * logits) - np.sum(ent))


def objective(
    factors: MonarchFactors | TiledMonarchFactors,
    q: np.ndarray,
    k: np.ndarray,
    scale: float | None = None,
) -> float:
    """Variational value <A', scale * Q K^T> + H(A') of the densified factors.

    Entropy uses the 0 * log 0 = 0 convention; factors with negative entries
    (anything not produced by the solver) are rejected.
    """
    if scale is None:
        scale = 1.0 / np.sqrt(q.shape[1])
    if factors.order is not None:
        q = q[factors.order]
        k = k[factors.order]
    m = densify(factors) if isinstance(factors, MonarchFactors) else densify_tiled(factors)
    return _objective_of_matrix(m, (q * scale) @ k.T)
