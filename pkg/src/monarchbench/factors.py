"""Monarch and tiled-Monarch factors: densification, application, projection.

A Monarch matrix with block sizes (b1, b2), N = b1*b2, is parameterized by
L of shape (b2, b1, b1) and R of shape (b1, b2, b2) through

    M[l*b2 + j, k*b2 + i] = L[j, l, k] * R[k, j, i],

i.e. after the reshape-transpose permutation every (j, k) slice along (l, i)
is the rank-1 outer product L[j, :, k] (x) R[k, j, :]. The tiled variant
subdivides each slice into a (c1, c2) grid of independent rank-1 tiles.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .layout import BlockConfig, TilePlan, VideoShape
from .tensorops import ShapeError, batched_top_triplet, contract

DENSIFY_LIMIT = 4096  # dense materialization is a verification path only

_MAGIC = b"MNR1"


class FactorError(ValueError):
    pass


@dataclass(frozen=True)
class MonarchFactors:
    """Untiled factors; ``order`` (when set) maps block positions to row-major
    token ids of the problem the factors were fitted in."""

    b1: int
    b2: int
    l_blocks: np.ndarray  # (b2, b1, b1), indexed [j, l, k]
    r_blocks: np.ndarray  # (b1, b2, b2), indexed [k, j, i]
    order: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.l_blocks.shape != (self.b2, self.b1, self.b1):
            raise FactorError(f"L shape {self.l_blocks.shape} != {(self.b2, self.b1, self.b1)}")
        if self.r_blocks.shape != (self.b1, self.b2, self.b2):
            raise FactorError(f"R shape {self.r_blocks.shape} != {(self.b1, self.b2, self.b2)}")
        if not (np.isfinite(self.l_blocks).all() and np.isfinite(self.r_blocks).all()):
            raise FactorError("factor entries must be finite")

    @property
    def n(self) -> int:
        return self.b1 * self.b2


@dataclass(frozen=True)
class TiledMonarchFactors:
    """Per-tile factors for a TilePlan.

    L' has shape (c1, c2, c1, c2, b2/c2, b1/c1, b1/c1) indexed
    [l1, j1, k1, i1, j2, l2, k2]; R' has shape (c1, c2, c1, c2, b1/c1,
    b2/c2, b2/c2) indexed [l1, j1, k1, i1, k2, j2, i2].
    """

    plan: TilePlan
    l_blocks: np.ndarray
    r_blocks: np.ndarray
    order: np.ndarray | None = None

    def __post_init__(self) -> None:
        c1, c2 = self.plan.c1, self.plan.c2
        s1, s2 = self.plan.tile_b1, self.plan.tile_b2
        if self.l_blocks.shape != (c1, c2, c1, c2, s2, s1, s1):
            raise FactorError(f"L' shape {self.l_blocks.shape} != {(c1, c2, c1, c2, s2, s1, s1)}")
        if self.r_blocks.shape != (c1, c2, c1, c2, s1, s2, s2):
            raise FactorError(f"R' shape {self.r_blocks.shape} != {(c1, c2, c1, c2, s1, s2, s2)}")
        if not (np.isfinite(self.l_blocks).all() and np.isfinite(self.r_blocks).all()):
            raise FactorError("factor entries must be finite")

    @property
    def n(self) -> int:
        return self.plan.config.b1 * self.plan.config.b2


def identity_factors(b1: int, b2: int) -> MonarchFactors:
    """Factors whose densification is the N x N identity (delta_lk * delta_ji)."""
    l = np.broadcast_to(np.eye(b1), (b2, b1, b1)).copy()
    r = np.broadcast_to(np.eye(b2), (b1, b2, b2)).copy()
    return MonarchFactors(b1, b2, l, r)


def _check_densify_size(n: int) -> None:
    if n > DENSIFY_LIMIT:
        raise FactorError(f"densify is a verification path, refusing N = {n} > {DENSIFY_LIMIT}")


def densify(factors: MonarchFactors) -> np.ndarray:
    _check_densify_size(factors.n)
    m4 = contract("dense4", factors.l_blocks, factors.r_blocks)
    return m4.reshape(factors.n, factors.n)


def densify_tiled(factors: TiledMonarchFactors) -> np.ndarray:
    _check_densify_size(factors.n)
    m8 = contract("t_dense8", factors.l_blocks, factors.r_blocks)
    return m8.reshape(factors.n, factors.n)


def apply_factors(factors: MonarchFactors | TiledMonarchFactors, v: np.ndarray) -> np.ndarray:
    """densify(factors) @ v without materializing the dense matrix."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 2 or v.shape[0] != factors.n:
        raise ShapeError(f"v must have {factors.n} rows, got {v.shape}")
    d = v.shape[1]
    if isinstance(factors, MonarchFactors):
        vb = v.reshape(factors.b1, factors.b2, d)
        y = contract("y", factors.r_blocks, vb)
        out = contract("out", factors.l_blocks, y)
        return out.reshape(factors.n, d)
    plan = factors.plan
    vb = v.reshape(plan.c1, plan.tile_b1, plan.c2, plan.tile_b2, d)
    y = contract("t_y", factors.r_blocks, vb)
    out = contract("t_out", factors.l_blocks, y)
    return out.reshape(factors.n, d)


def project(target: np.ndarray, config: BlockConfig) -> MonarchFactors:
    """Frobenius-optimal Monarch factors for an N x N target.

    Independent rank-1 projections on each (j, k) slice; the singular value is
    folded into the L-side vector and the right vector keeps unit norm.
    """
    b1, b2 = config.b1, config.b2
    n = b1 * b2
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (n, n):
        raise ShapeError(f"target must be {n}x{n}")
    t4 = target.reshape(b1, b2, b1, b2)
    slices = t4.transpose(1, 2, 0, 3).reshape(b2 * b1, b1, b2)  # stacked (j, k)
    sigma, u, v = batched_top_triplet(slices)
    l = (sigma[:, None] * u).reshape(b2, b1, b1).transpose(0, 2, 1).copy()  # [j, l, k]
    r = v.reshape(b2, b1, b2).transpose(1, 0, 2).copy()  # [k, j, i]
    return MonarchFactors(b1, b2, l, r)


def project_tiled(target: np.ndarray, plan: TilePlan) -> TiledMonarchFactors:
    """Per-tile, per-slice optimal rank-1 projection (tiles cover disjoint entries)."""
    c1, c2 = plan.c1, plan.c2
    s1, s2 = plan.tile_b1, plan.tile_b2
    n = plan.config.b1 * plan.config.b2
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (n, n):
        raise ShapeError(f"target must be {n}x{n}")
    t8 = target.reshape(c1, s1, c2, s2, c1, s1, c2, s2)  # [l1,l2,j1,j2,k1,k2,i1,i2]
    slices = t8.transpose(0, 2, 4, 6, 3, 5, 1, 7).reshape(-1, s1, s2)  # (l1,j1,k1,i1,j2,k2)
    sigma, u, v = batched_top_triplet(slices)
    l = (sigma[:, None] * u).reshape(c1, c2, c1, c2, s2, s1, s1).transpose(0, 1, 2, 3, 4, 6, 5).copy()
    r = v.reshape(c1, c2, c1, c2, s2, s1, s2).transpose(0, 1, 2, 3, 5, 4, 6).copy()
    return TiledMonarchFactors(plan, l, r)


@dataclass(frozen=True)
class ParamCount:
    l_params: int
    r_params: int
    total: int
    density: float


def param_count(spec: BlockConfig | TilePlan | MonarchFactors | TiledMonarchFactors) -> ParamCount:
    """Literal factor element counts and their density relative to N^2."""
    if isinstance(spec, MonarchFactors):
        b1, b2, c1, c2 = spec.b1, spec.b2, 1, 1
    elif isinstance(spec, TiledMonarchFactors):
        b1, b2, c1, c2 = spec.plan.config.b1, spec.plan.config.b2, spec.plan.c1, spec.plan.c2
    elif isinstance(spec, TilePlan):
        b1, b2, c1, c2 = spec.config.b1, spec.config.b2, spec.c1, spec.c2
    else:
        b1, b2, c1, c2 = spec.b1, spec.b2, 1, 1
    n = b1 * b2
    l_params = c2 * b2 * b1 * b1
    r_params = c1 * b1 * b2 * b2
    total = l_params + r_params
    return ParamCount(l_params, r_params, total, total / float(n * n))


def embed_tied(source: MonarchFactors, plan: TilePlan) -> TiledMonarchFactors:
    """Tiled factors tying parameters across tiles so that densify is preserved.

    L'[l1,j1,k1,i1,j2,l2,k2] = L[j1*s2+j2, l1*s1+l2, k1*s1+k2] (independent of
    i1) and R'[l1,j1,k1,i1,k2,j2,i2] = R[k1*s1+k2, j1*s2+j2, i1*s2+i2]
    (independent of l1).
    """
    if plan.config.b1 != source.b1 or plan.config.b2 != source.b2:
        raise FactorError("plan base block sizes must match the source factors")
    c1, c2 = plan.c1, plan.c2
    s1, s2 = plan.tile_b1, plan.tile_b2
    lr = source.l_blocks.reshape(c2, s2, c1, s1, c1, s1)  # [j1,j2,l1,l2,k1,k2]
    lp = lr.transpose(2, 0, 4, 1, 3, 5)  # [l1,j1,k1,j2,l2,k2]
    lp = np.broadcast_to(lp[:, :, :, None], (c1, c2, c1, c2, s2, s1, s1)).copy()
    rr = source.r_blocks.reshape(c1, s1, c2, s2, c2, s2)  # [k1,k2,j1,j2,i1,i2]
    rp = rr.transpose(0, 2, 4, 1, 3, 5)  # [k1,j1,i1,k2,j2,i2]
    rp = np.broadcast_to(rp[None], (c1, c1, c2, c2, s1, s2, s2)).transpose(0, 2, 1, 3, 4, 5, 6).copy()
    return TiledMonarchFactors(plan, lp, rp)


def strictness_counterexample(
    plan: TilePlan,
    placement: tuple[tuple[int, int], tuple[int, int]] | None = None,
) -> np.ndarray:
    """A matrix inside the tiled family but outside the untiled one.

    Places two unit entries in the (j, k) = (0, 0) slice, in different tiles
    and on distinct rows and columns, so the slice's restricted 2x2 submatrix
    is the identity and has rank 2. The default placement puts them at
    ((0, 0), (tile_b1, 1)) when c1 > 1, else ((0, 0), (1, tile_b2)).
    """
    if plan.untiled:
        raise FactorError("strictness needs c1 > 1 or c2 > 1")
    b1, b2 = plan.config.b1, plan.config.b2
    s1, s2 = plan.tile_b1, plan.tile_b2
    if placement is None:
        if plan.c1 > 1:
            if b2 < 2:
                raise FactorError("strictness construction needs b2 >= 2")
            placement = ((0, 0), (s1, 1))
        else:
            if b1 < 2:
                raise FactorError("strictness construction needs b1 >= 2")
            placement = ((0, 0), (1, s2))
    (r1, s1_), (r2, s2_) = placement
    if r1 == r2 or s1_ == s2_:
        raise FactorError("placement rows and columns must be distinct")
    if (r1 // s1, s1_ // s2) == (r2 // s1, s2_ // s2):
        raise FactorError("placement entries must sit in different tiles")
    n = b1 * b2
    m = np.zeros((n, n))
    for r, s in placement:
        m[r * b2, s] = 1.0  # slice (j,k)=(0,0): rows l*b2, cols i
    return m


def save_factors(factors: MonarchFactors | TiledMonarchFactors, path) -> None:
    """Flat binary container: b"MNR1", five little-endian uint32 fields
    (kind, b1, b2, c1, c2), then L and R as raw float64."""
    if isinstance(factors, MonarchFactors):
        header = struct.pack("<5I", 0, factors.b1, factors.b2, 1, 1)
    else:
        plan = factors.plan
        header = struct.pack("<5I", 1, plan.config.b1, plan.config.b2, plan.c1, plan.c2)
    payload = (
        _MAGIC
        + header
        + np.ascontiguousarray(factors.l_blocks, dtype="<f8").tobytes()
        + np.ascontiguousarray(factors.r_blocks, dtype="<f8").tobytes()
    )
    if hasattr(path, "write"):
        path.write(payload)
    else:
        with open(path, "wb") as fh:
            fh.write(payload)


def load_factors(path) -> MonarchFactors | TiledMonarchFactors:
    """Inverse of save_factors. Deserialized tiled plans carry a canonical
    (1, b1, b2) video shape since the container stores block sizes only."""
    if hasattr(path, "read"):
        data = path.read()
    else:
        with open(path, "rb") as fh:
            data = fh.read()
    if data[:4] != _MAGIC:
        raise FactorError(f"bad magic {data[:4]!r}, expected {_MAGIC!r}")
    if len(data) < 4 + 20:
        raise FactorError(f"truncated header: {len(data)} bytes")
    kind, b1, b2, c1, c2 = struct.unpack_from("<5I", data, 4)
    off = 24
    if kind == 0:
        l_count, r_count = b2 * b1 * b1, b1 * b2 * b2
        l_shape, r_shape = (b2, b1, b1), (b1, b2, b2)
    elif kind == 1:
        s1, s2 = b1 // c1, b2 // c2
        l_count = c1 * c2 * c1 * c2 * s2 * s1 * s1
        r_count = c1 * c2 * c1 * c2 * s1 * s2 * s2
        l_shape = (c1, c2, c1, c2, s2, s1, s1)
        r_shape = (c1, c2, c1, c2, s1, s2, s2)
    else:
        raise FactorError(f"unknown kind tag {kind}")
    need = off + 8 * (l_count + r_count)
    if len(data) != need:
        raise FactorError(f"container has {len(data)} bytes, expected {need}")
    l = np.frombuffer(data, dtype="<f8", count=l_count, offset=off).reshape(l_shape).copy()
    r = np.frombuffer(data, dtype="<f8", count=r_count, offset=off + 8 * l_count).reshape(r_shape).copy()
    if kind == 0:
        return MonarchFactors(b1, b2, l, r)
    cfg = BlockConfig(VideoShape(1, b1, b2), b1, b2, ("f", "h"), ("w",))
    return TiledMonarchFactors(TilePlan(cfg, c1, c2), l, r)


def dump_text(factors: MonarchFactors | TiledMonarchFactors) -> str:
    """Human-readable dump used for golden files."""
    lines: list[str] = []
    if isinstance(factors, MonarchFactors):
        lines.append(f"monarch b1={factors.b1} b2={factors.b2}")
    else:
        plan = factors.plan
        lines.append(
            f"tiled-monarch b1={plan.config.b1} b2={plan.config.b2} c1={plan.c1} c2={plan.c2}"
        )
    for name, tensor in (("L", factors.l_blocks), ("R", factors.r_blocks)):
        lines.append(f"{name} shape={'x'.join(map(str, tensor.shape))}")
        lines.extend(format(x, ".17g") for x in tensor.ravel())
    return "\n".join(lines) + "\n"
