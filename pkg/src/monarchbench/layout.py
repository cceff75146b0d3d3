"""3D video token grid: flatten orderings, permutations, block configs, tile plans.

A token ordering is a mixed-radix positional system over per-axis digits.
The row-major ordering ``phi`` lists digits (f, h, w); the width-noncontiguous
ordering ``rho`` lists (w, f, h). An aligned block configuration assigns each
video axis wholly to one of the two Monarch block slots; its natural ordering
puts the b1-slot axes in the slow digits and the b2-slot axes in the fast
digits. Tile plans refine an axis into (coarse neighborhood, fine offset)
digit pairs so every tile covers one spatiotemporal neighborhood.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

AXES = ("f", "h", "w")


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class VideoShape:
    f: int
    h: int
    w: int

    def __post_init__(self) -> None:
        if min(self.f, self.h, self.w) < 1:
            raise LayoutError(f"axis sizes must be >= 1, got {self}")

    @property
    def n(self) -> int:
        return self.f * self.h * self.w

    def axis_size(self, axis: str) -> int:
        return {"f": self.f, "h": self.h, "w": self.w}[axis]

    def astuple(self) -> tuple[int, int, int]:
        return (self.f, self.h, self.w)


@dataclass(frozen=True)
class AxisDigit:
    """One positional digit: value = (coord // stride) % size."""

    axis: str
    size: int
    stride: int = 1


@dataclass(frozen=True)
class TokenOrdering:
    """A bijection from (f0, h0, w0) positions to [0, N), Horner over digits."""

    shape: VideoShape
    kind: str
    digits: tuple[AxisDigit, ...]

    def __post_init__(self) -> None:
        cover: dict[str, int] = {a: 1 for a in AXES}
        for d in self.digits:
            cover[d.axis] *= d.size
        for a in AXES:
            if cover[a] != self.shape.axis_size(a):
                raise LayoutError(f"digits do not tile axis {a!r} of {self.shape}")

    def index(self, pos: tuple[int, int, int]) -> int:
        f0, h0, w0 = pos
        coords = {"f": f0, "h": h0, "w": w0}
        idx = 0
        for d in self.digits:
            idx = idx * d.size + (coords[d.axis] // d.stride) % d.size
        return idx

    def positions_by_phi(self) -> np.ndarray:
        """ordering index of every token, listed in phi (row-major) order."""
        s = self.shape
        fs, hs, ws = np.meshgrid(np.arange(s.f), np.arange(s.h), np.arange(s.w), indexing="ij")
        coords = {"f": fs.ravel(), "h": hs.ravel(), "w": ws.ravel()}
        idx = np.zeros(s.n, dtype=np.int64)
        for d in self.digits:
            idx = idx * d.size + (coords[d.axis] // d.stride) % d.size
        return idx

    def to_phi(self) -> np.ndarray:
        """Array p with p[ordering_index] = phi_index; A[np.ix_(p, p)] reorders."""
        of_phi = self.positions_by_phi()
        p = np.empty(self.shape.n, dtype=np.int64)
        p[of_phi] = np.arange(self.shape.n)
        return p


def phi_ordering(shape: VideoShape) -> TokenOrdering:
    """Standard row-major (f, h, w) flattening: ((f0*h) + h0)*w + w0."""
    return TokenOrdering(
        shape, "phi", (AxisDigit("f", shape.f), AxisDigit("h", shape.h), AxisDigit("w", shape.w))
    )


def rho_ordering(shape: VideoShape) -> TokenOrdering:
    """Width-noncontiguous flattening: w0*f*h + (f0*h + h0)."""
    return TokenOrdering(
        shape, "rho", (AxisDigit("w", shape.w), AxisDigit("f", shape.f), AxisDigit("h", shape.h))
    )


def generalized_ordering(shape: VideoShape, slow_axes: tuple[str, ...], fast_axes: tuple[str, ...]) -> TokenOrdering:
    """Slot ordering for an aligned config: b1 axes slow, b2 axes fast."""
    digits = tuple(AxisDigit(a, shape.axis_size(a)) for a in slow_axes + fast_axes)
    return TokenOrdering(shape, "generalized", digits)


def flatten_index(ordering: TokenOrdering, pos: tuple[int, int, int]) -> int:
    s = ordering.shape
    f0, h0, w0 = pos
    if not (0 <= f0 < s.f and 0 <= h0 < s.h and 0 <= w0 < s.w):
        raise IndexError(f"position {pos} outside shape {s.astuple()}")
    return ordering.index(pos)


@dataclass(frozen=True)
class LayoutPermutation:
    """Permutation P with P[to(pos), from(pos)] = 1 for a pair of orderings.

    ``forward[i]`` is the destination row of source index i, so applying the
    permutation to from-ordered rows yields to-ordered rows.
    """

    forward: np.ndarray
    inverse: np.ndarray

    @property
    def n(self) -> int:
        return self.forward.size

    def matrix(self) -> np.ndarray:
        p = np.zeros((self.n, self.n), dtype=np.int64)
        p[self.forward, np.arange(self.n)] = 1
        return p

    def apply_rows(self, x: np.ndarray) -> np.ndarray:
        """P @ x for x whose rows follow the source ordering."""
        out = np.empty_like(np.asarray(x))
        out[self.forward] = x
        return out

    def apply_rows_inverse(self, x: np.ndarray) -> np.ndarray:
        """P.T @ x."""
        return np.asarray(x)[self.forward]


def build_permutation(shape: VideoShape, from_ordering: TokenOrdering, to_ordering: TokenOrdering) -> LayoutPermutation:
    if from_ordering.shape != shape or to_ordering.shape != shape:
        raise LayoutError("orderings must be defined over the given shape")
    from_of_phi = from_ordering.positions_by_phi()
    to_of_phi = to_ordering.positions_by_phi()
    forward = np.empty(shape.n, dtype=np.int64)
    forward[from_of_phi] = to_of_phi
    inverse = np.empty(shape.n, dtype=np.int64)
    inverse[forward] = np.arange(shape.n)
    return LayoutPermutation(forward, inverse)


@dataclass(frozen=True)
class BlockConfig:
    """Monarch block sizes plus the axis assignment that makes them aligned.

    ``g1``/``g2`` list the axes composing each block slot. A config built from
    raw sizes that split an axis across slots has no assignment and is not
    aligned; it blocks the plain row-major flattening directly.
    """

    shape: VideoShape
    b1: int
    b2: int
    g1: tuple[str, ...] | None = None
    g2: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        if self.b1 * self.b2 != self.shape.n:
            raise LayoutError(f"b1*b2 = {self.b1 * self.b2} != N = {self.shape.n}")
        if (self.g1 is None) != (self.g2 is None):
            raise LayoutError("both slot assignments or neither")
        if self.g1 is not None:
            assert self.g2 is not None
            if sorted(self.g1 + self.g2) != sorted(AXES):
                raise LayoutError(f"slots must partition {AXES}: {self.g1} | {self.g2}")
            p1 = int(np.prod([self.shape.axis_size(a) for a in self.g1], initial=1))
            if p1 != self.b1:
                raise LayoutError(f"g1 {self.g1} has size {p1}, expected b1 = {self.b1}")

    @property
    def aligned(self) -> bool:
        return self.g1 is not None

    @property
    def dense_degenerate(self) -> bool:
        return self.b1 == 1 or self.b2 == 1

    def ordering(self) -> TokenOrdering:
        if self.aligned:
            assert self.g1 is not None and self.g2 is not None
            return generalized_ordering(self.shape, self.g1, self.g2)
        return phi_ordering(self.shape)

    def descriptor(self) -> str:
        # comma-free so the string can sit inside one CSV field
        if self.aligned:
            assert self.g1 is not None and self.g2 is not None
            return f"b1={self.b1}({''.join(self.g1) or '-'});b2={self.b2}({''.join(self.g2) or '-'})"
        return f"b1={self.b1};b2={self.b2};raw"


def aligned_config(shape: VideoShape, g1: tuple[str, ...]) -> BlockConfig:
    g2 = tuple(a for a in AXES if a not in g1)
    b1 = int(np.prod([shape.axis_size(a) for a in g1], initial=1))
    return BlockConfig(shape, b1, shape.n // b1, g1, g2)


def config_from_sizes(shape: VideoShape, b1: int, b2: int) -> BlockConfig:
    """Raw (b1, b2) blocking of the row-major flattening.

    Detects the two splits that respect phi's axis nesting ((fh, w) and
    (f, hw)) plus the dense-degenerate split; anything else straddles an axis
    and comes back unaligned.
    """
    if b2 == shape.w:
        return BlockConfig(shape, b1, b2, ("f", "h"), ("w",))
    if b2 == shape.h * shape.w:
        return BlockConfig(shape, b1, b2, ("f",), ("h", "w"))
    if b2 == 1:
        return BlockConfig(shape, b1, b2, ("f", "h", "w"), ())
    if b1 == 1:
        return BlockConfig(shape, b1, b2, (), ("f", "h", "w"))
    return BlockConfig(shape, b1, b2)


_SLOT_SPLITS: tuple[tuple[str, ...], ...] = (
    ("f", "h"),
    ("w",),
    ("f",),
    ("h", "w"),
    ("f", "w"),
    ("h",),
)


def enumerate_aligned_configs(shape: VideoShape) -> list[BlockConfig]:
    """The aligned block configurations for this shape, deduplicated.

    There are exactly six for pairwise-distinct axes > 1; configs whose block
    sizes collapse to the dense cases (N, 1) / (1, N) are excluded, and
    degenerate axes of size 1 merge otherwise-identical configs.
    """
    configs: list[BlockConfig] = []
    seen: set[tuple] = set()
    for g1 in _SLOT_SPLITS:
        cfg = aligned_config(shape, g1)
        if cfg.dense_degenerate:
            continue
        assert cfg.g1 is not None and cfg.g2 is not None
        key = (
            cfg.b1,
            cfg.b2,
            tuple(a for a in cfg.g1 if shape.axis_size(a) > 1),
            tuple(a for a in cfg.g2 if shape.axis_size(a) > 1),
        )
        if key in seen:
            continue
        seen.add(key)
        configs.append(cfg)
    return configs


@dataclass(frozen=True)
class TilePlan:
    """Tiling of a base block config into c1 x c2 sub-blocks per block.

    When derived from neighborhood sizes (n_f, n_h, n_w) on the (fh, w) base,
    c1 = (f/n_f)*(h/n_h) and c2 = w/n_w, and the plan's token ordering nests
    coarse neighborhood digits above fine offsets so each tile holds a single
    spatiotemporal neighborhood.
    """

    config: BlockConfig
    c1: int
    c2: int
    neighborhoods: tuple[int, int, int] | None = None

    def __post_init__(self) -> None:
        if self.c1 < 1 or self.c2 < 1 or self.config.b1 % self.c1 or self.config.b2 % self.c2:
            raise LayoutError(f"tiling ({self.c1},{self.c2}) must divide blocks "
                              f"({self.config.b1},{self.config.b2})")

    @property
    def shape(self) -> VideoShape:
        return self.config.shape

    @property
    def tile_b1(self) -> int:
        return self.config.b1 // self.c1

    @property
    def tile_b2(self) -> int:
        return self.config.b2 // self.c2

    @property
    def num_tiles(self) -> int:
        return self.c1 * self.c2

    @property
    def untiled(self) -> bool:
        return self.c1 == 1 and self.c2 == 1

    def ordering(self) -> TokenOrdering:
        if self.neighborhoods is None:
            return self.config.ordering()
        n_f, n_h, n_w = self.neighborhoods
        s = self.shape
        digits = (
            AxisDigit("f", s.f // n_f, n_f),
            AxisDigit("h", s.h // n_h, n_h),
            AxisDigit("f", n_f),
            AxisDigit("h", n_h),
            AxisDigit("w", s.w // n_w, n_w),
            AxisDigit("w", n_w),
        )
        return TokenOrdering(s, "tiled", digits)

    def descriptor(self) -> str:
        base = self.config.descriptor()
        if self.neighborhoods is not None:
            n_f, n_h, n_w = self.neighborhoods
            return f"{base}|c1={self.c1};c2={self.c2}|n={n_f}x{n_h}x{n_w}"
        return f"{base}|c1={self.c1};c2={self.c2}"


def make_tile_plan(shape: VideoShape, config: BlockConfig, neighborhoods: tuple[int, int, int]) -> TilePlan:
    """Neighborhood-derived tile plan over the (fh, w)-style base config."""
    if config.g1 != ("f", "h") or config.g2 != ("w",):
        raise LayoutError("neighborhood tiling requires the (fh, w) base config")
    n_f, n_h, n_w = neighborhoods
    if n_f < 1 or n_h < 1 or n_w < 1 or shape.f % n_f or shape.h % n_h or shape.w % n_w:
        raise LayoutError(f"neighborhoods {neighborhoods} must divide shape {shape.astuple()}")
    c1 = (shape.f // n_f) * (shape.h // n_h)
    c2 = shape.w // n_w
    return TilePlan(config, c1, c2, (n_f, n_h, n_w))
