"""Synthetic 3D attention maps: separable positional kernels + sparse semantic
spikes + noise, with fixtures for the blockwise rank-1 structure checks.

The positional component is D[(f0,h0,w0),(f1,h1,w1)] =
d_t(f0,f1) * d_h(h0,h1) * d_w(w0,w1) with each per-axis kernel monotonically
non-increasing in |delta| and equal to 1 on the diagonal. Semantic entries are
0/1 (scalable); noise is zero-mean uniform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .layout import BlockConfig, VideoShape, phi_ordering
from .tensorops import truncated_svd

DEFAULT_GAMMAS = (0.7, 0.85, 0.85)  # (t, h, w): visible banding at desk scale

Position = tuple[int, int, int]


@dataclass(frozen=True)
class DistanceKernel:
    """Per-axis distance kernel; values lie in (0, 1] and d(x, x) = 1."""

    kind: str  # "exponential" | "rational" | "constant"
    size: int
    gamma: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("exponential", "rational", "constant"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "exponential":
            if self.gamma is None or not 0.0 < self.gamma <= 1.0:
                raise ValueError("exponential kernel needs gamma in (0, 1]")

    def matrix(self) -> np.ndarray:
        idx = np.arange(self.size)
        delta = np.abs(idx[:, None] - idx[None, :]).astype(np.float64)
        if self.kind == "exponential":
            return np.power(self.gamma, delta)
        if self.kind == "rational":
            return 1.0 / (1.0 + delta)
        return np.ones((self.size, self.size))


def default_kernels(shape: VideoShape, kind: str = "exponential") -> tuple[DistanceKernel, ...]:
    if kind == "exponential":
        gt, gh, gw = DEFAULT_GAMMAS
        return (
            DistanceKernel("exponential", shape.f, gt),
            DistanceKernel("exponential", shape.h, gh),
            DistanceKernel("exponential", shape.w, gw),
        )
    return (
        DistanceKernel(kind, shape.f),
        DistanceKernel(kind, shape.h),
        DistanceKernel(kind, shape.w),
    )


@dataclass(frozen=True)
class SemanticPattern:
    """Sparse long-range interactions as (query position, key position) pairs."""

    pairs: tuple[tuple[Position, Position], ...] = ()
    case: str = "empty"  # {empty, singleton, row_confined, col_confined, adversarial}


def random_semantic_pattern(shape: VideoShape, count: int, rng: np.random.Generator) -> SemanticPattern:
    """``count`` distinct off-diagonal (query, key) spikes, reproducible from rng."""
    n = shape.n
    ordering = phi_ordering(shape)
    chosen: set[tuple[int, int]] = set()
    while len(chosen) < count:
        q, k = int(rng.integers(n)), int(rng.integers(n))
        if q != k:
            chosen.add((q, k))
    positions = [
        (f0, h0, w0)
        for f0 in range(shape.f)
        for h0 in range(shape.h)
        for w0 in range(shape.w)
    ]
    by_index = {ordering.index(p): p for p in positions}
    pairs = tuple((by_index[q], by_index[k]) for q, k in sorted(chosen))
    tag = "empty" if count == 0 else ("singleton" if count == 1 else "adversarial")
    return SemanticPattern(pairs, tag)


@dataclass(frozen=True)
class SyntheticModelSpec:
    shape: VideoShape
    kernels: tuple[DistanceKernel, DistanceKernel, DistanceKernel]
    semantic: SemanticPattern = SemanticPattern()
    noise: float = 0.0
    normalize: str = "raw"  # "raw" | "row"
    seed: int = 0
    semantic_scale: float = 1.0

    def __post_init__(self) -> None:
        kt, kh, kw = self.kernels
        for kern, size in ((kt, self.shape.f), (kh, self.shape.h), (kw, self.shape.w)):
            if kern.size != size:
                raise ValueError(f"kernel size {kern.size} does not match axis size {size}")
        if self.normalize not in ("raw", "row"):
            raise ValueError(f"normalize must be 'raw' or 'row', got {self.normalize!r}")
        if self.noise < 0:
            raise ValueError("noise must be >= 0")


@dataclass(frozen=True)
class GeneratedMap:
    """matrix = requested variant; raw = positional + semantic + noise exactly."""

    matrix: np.ndarray
    positional: np.ndarray
    semantic: np.ndarray
    noise: np.ndarray
    raw: np.ndarray


def generate(spec: SyntheticModelSpec) -> GeneratedMap:
    shape = spec.shape
    kt, kh, kw = spec.kernels
    d = np.kron(kt.matrix(), np.kron(kh.matrix(), kw.matrix()))
    ordering = phi_ordering(shape)
    s = np.zeros((shape.n, shape.n))
    for qpos, kpos in spec.semantic.pairs:
        s[ordering.index(qpos), ordering.index(kpos)] = spec.semantic_scale
    rng = np.random.default_rng(spec.seed)
    eps = rng.uniform(-spec.noise, spec.noise, size=d.shape) if spec.noise > 0 else np.zeros_like(d)
    raw = d + s + eps
    matrix = raw / raw.sum(axis=1, keepdims=True) if spec.normalize == "row" else raw
    return GeneratedMap(matrix, d, s, eps, raw)


@dataclass(frozen=True)
class BlockRankReport:
    """Second-to-first singular value ratio of every post-permutation block."""

    ratios: np.ndarray  # (b2, b1) indexed [j, k]
    tol: float

    @property
    def max_ratio(self) -> float:
        return float(self.ratios.max())

    @property
    def passed(self) -> bool:
        return bool((self.ratios <= self.tol).all())


def verify_blockwise_rank1(matrix: np.ndarray, config: BlockConfig, tol: float) -> BlockRankReport:
    """Check that every (j, k) block of the permuted matrix is rank-1.

    The row-major matrix is first conjugated into the config's slot ordering,
    then sliced along (l, i); each b1 x b2 block's full (Jacobi) spectrum
    yields the sigma_2 / sigma_1 ratio.
    """
    order = config.ordering().to_phi()
    mc = np.asarray(matrix, dtype=np.float64)[np.ix_(order, order)]
    b1, b2 = config.b1, config.b2
    t4 = mc.reshape(b1, b2, b1, b2)
    ratios = np.zeros((b2, b1))
    for j in range(b2):
        for k in range(b1):
            block = t4[:, j, k, :]
            sv = truncated_svd(block, min(block.shape)).singular_values
            if sv.size > 1 and sv[0] > 0:
                ratios[j, k] = sv[1] / sv[0]
    return BlockRankReport(ratios, tol)


def case_fixture(case: str, shape: VideoShape, config: BlockConfig) -> np.ndarray:
    """A single b1 x b2 block realizing one semantic-occupancy case.

    empty: purely positional, separable, exactly rank-1. singleton: one
    dominant spike with the positional term zeroed. row/col_confined: several
    spikes confined to one row/column (attention-sink style), still rank-1.
    adversarial: two spikes on a diagonal, provably rank >= 2.
    """
    b1, b2 = config.b1, config.b2
    block = np.zeros((b1, b2))
    if case == "empty":
        u = np.power(0.8, np.abs(np.arange(b1) - b1 // 2).astype(float))
        v = np.power(0.9, np.abs(np.arange(b2) - b2 // 2).astype(float))
        return np.outer(u, v)
    if case == "singleton":
        block[b1 // 2, b2 // 2] = 1.0
        return block
    if case == "row_confined":
        block[0, : min(3, b2)] = 1.0
        return block
    if case == "col_confined":
        block[: min(3, b1), 0] = 1.0
        return block
    if case == "adversarial":
        if b1 < 2 or b2 < 2:
            raise ValueError("adversarial case needs b1, b2 >= 2")
        block[0, 0] = 1.0
        block[1, 1] = 1.0
        return block
    raise ValueError(f"unknown case {case!r}")
