"""Reference dense attention and the oracle sparse / low-rank approximators.

Oracles operate on the exact attention matrix A: top-k keeps the k largest
entries per row (the NNZ-constrained Frobenius minimizer for per-row budgets),
low-rank truncates the SVD. ``top_p_coverage`` measures how many keys per
query are needed to reach attention mass p, and ``budget_match`` converts a
target parameter density into each method's budget.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

from .factors import param_count
from .layout import TilePlan, VideoShape, aligned_config, make_tile_plan
from .tensorops import softmax_rows, truncated_svd

if TYPE_CHECKING:
    from .solver import AttentionProblem


class BudgetError(ValueError):
    """No feasible budget at the requested density."""


@dataclass(frozen=True)
class ApproxReport:
    """One measured approximation: method, budget, and error versus dense A."""

    method: str
    params: int
    density: float
    mse: float
    wall_ns: int
    seed: int
    shape: tuple[int, int, int]
    descriptor: str = ""
    iterations: int = 0
    objective_final: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.density <= 1.0:
            raise ValueError(f"density must lie in (0, 1], got {self.density}")
        if self.mse < 0.0:
            raise ValueError("mse must be non-negative")


def dense_attention_matrix(q: np.ndarray, k: np.ndarray, scale: float) -> np.ndarray:
    return softmax_rows((q * scale) @ k.T)


def dense_attention(problem: "AttentionProblem") -> tuple[np.ndarray, np.ndarray]:
    """Exact A = softmax(scale * Q K^T) and the output A @ V."""
    a = dense_attention_matrix(problem.q, problem.k, problem.logit_scale)
    return a, a @ problem.v


def topk_oracle(a: np.ndarray, k: int, renormalize: bool = False) -> np.ndarray:
    """Keep the k largest entries per row, zero the rest.

    Ties keep the lowest column index. No renormalization by default: the
    sparse family is defined by Frobenius fit, not stochasticity; pass
    ``renormalize=True`` for output-space comparisons.
    """
    a = np.asarray(a, dtype=np.float64)
    n_cols = a.shape[1]
    if not 1 <= k <= n_cols:
        raise IndexError(f"k = {k} out of range [1, {n_cols}]")
    keep = np.argsort(-a, axis=1, kind="stable")[:, :k]
    out = np.zeros_like(a)
    rows = np.arange(a.shape[0])[:, None]
    out[rows, keep] = a[rows, keep]
    if renormalize:
        sums = out.sum(axis=1, keepdims=True)
        out = np.divide(out, sums, out=np.zeros_like(out), where=sums != 0)
    return out


def lowrank_oracle(a: np.ndarray, rank: int) -> np.ndarray:
    """Frobenius-optimal rank-``rank`` reconstruction of A."""
    a = np.asarray(a, dtype=np.float64)
    n = min(a.shape)
    if not 1 <= rank <= n:
        raise IndexError(f"rank = {rank} out of range [1, {n}]")
    if rank == n:
        return a.copy()
    return truncated_svd(a, rank).reconstruct()


def top_p_coverage(a: np.ndarray, p: float) -> tuple[np.ndarray, float]:
    """Per-row minimal count of largest entries reaching mass >= p.

    Returns (counts, mean(count) / N). Rows must be non-negative and sum to 1
    within 1e-6; rows whose cumulative mass never reaches p (possible only
    through rounding at p = 1) count all N keys.
    """
    a = np.asarray(a, dtype=np.float64)
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    if a.min() < 0:
        raise ValueError("rows must be non-negative")
    row_sums = a.sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-6:
        raise ValueError("rows must sum to 1 within 1e-6")
    n = a.shape[1]
    cum = np.cumsum(np.sort(a, axis=1)[:, ::-1], axis=1)
    reached = cum >= p
    counts = np.where(reached.any(axis=1), reached.argmax(axis=1) + 1, n)
    return counts, float(counts.mean() / n)


def monarch_plan_candidates(shape: VideoShape) -> list[TilePlan]:
    """All neighborhood-derived tile plans on the (fh, w) base config."""
    base = aligned_config(shape, ("f", "h"))
    divs = lambda s: [d for d in range(1, s + 1) if s % d == 0]
    plans = []
    for n_f in divs(shape.f):
        for n_h in divs(shape.h):
            for n_w in divs(shape.w):
                plans.append(make_tile_plan(shape, base, (n_f, n_h, n_w)))
    return plans


def budget_match(shape: VideoShape, method: str, density: float):
    """Method-specific budget whose parameter density does not exceed the target.

    top-k: k = floor(density * N); low-rank: rank = floor(density * N / 2)
    (2N params per rank unit); monarch: the neighborhood plan with the largest
    density <= target, ties broken by fewest tiles then coarsest neighborhoods.
    """
    if not 0.0 < density <= 1.0:
        raise BudgetError(f"target density must lie in (0, 1], got {density}")
    n = shape.n
    if method == "topk":
        k = int(np.floor(density * n))
        if k < 1:
            raise BudgetError(f"density {density} gives k = 0 at N = {n}")
        return k
    if method == "lowrank":
        rank = int(np.floor(density * n / 2))
        if rank < 1:
            raise BudgetError(f"density {density} gives rank = 0 at N = {n}")
        return min(rank, n)
    if method == "monarch":
        candidates = monarch_plan_candidates(shape)
        feasible = [p for p in candidates if param_count(p).density <= density + 1e-12]
        if not feasible:
            nearest = sorted({round(param_count(p).density, 12) for p in candidates})[:4]
            raise BudgetError(
                f"no monarch plan at density <= {density} for shape {shape.astuple()}; "
                f"nearest feasible densities: {nearest}"
            )
        feasible.sort(
            key=lambda p: (-param_count(p).density, p.num_tiles, tuple(-x for x in p.neighborhoods))
        )
        return feasible[0]
    raise BudgetError(f"unknown method {method!r}")
