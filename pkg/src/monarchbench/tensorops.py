"""Dense numeric kernels shared by every other module.

Matrices are plain float64 ``numpy.ndarray`` objects in row-major order.
Everything here is a pure function; nothing mutates its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

POWER_ITER_TOL = 1e-12
POWER_ITER_MAX = 500
JACOBI_SWEEP_MAX = 60


class ShapeError(ValueError):
    """Operand shapes are inconsistent with the requested operation."""


def softmax_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max-subtraction.

    Works on the last axis of any array, so blocked solver workspaces can
    reuse it. Every output row is positive and sums to 1.
    """
    m = np.asarray(m, dtype=np.float64)
    z = m - m.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def softmax_axes(m: np.ndarray, axes: tuple[int, ...]) -> np.ndarray:
    """Softmax normalizing jointly over several axes (tiled L update)."""
    m = np.asarray(m, dtype=np.float64)
    z = m - m.max(axis=axes, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axes, keepdims=True)


def frobenius_mse(a: np.ndarray, b: np.ndarray) -> float:
    """Mean of squared entrywise differences (per-entry scale, not raw ||.||_F^2)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    d = a - b
    return float(np.mean(d * d))


@dataclass(frozen=True)
class SvdResult:
    """Top-r singular triplets: ``u[:, t] * s[t] @ v[:, t].T`` reconstructs rank r.

    Singular values are non-increasing; singular vectors are unit columns with
    the sign fixed so the first nonzero component of each right vector is
    non-negative.
    """

    singular_values: np.ndarray  # (r,)
    u: np.ndarray  # (rows, r)
    v: np.ndarray  # (cols, r)

    def reconstruct(self, rank: int | None = None) -> np.ndarray:
        r = self.singular_values.size if rank is None else rank
        return (self.u[:, :r] * self.singular_values[:r]) @ self.v[:, :r].T


def _fix_signs(u: np.ndarray, v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # first nonzero component of each right vector made non-negative
    for t in range(v.shape[1]):
        col = v[:, t]
        nz = np.flatnonzero(col)
        if nz.size and col[nz[0]] < 0:
            v[:, t] = -col
            u[:, t] = -u[:, t]
    return u, v


def _jacobi_svd(m: np.ndarray) -> SvdResult:
    """Full SVD by one-sided Jacobi rotations. Exact for small matrices."""
    rows, cols = m.shape
    transposed = rows < cols
    a = (m.T if transposed else m).astype(np.float64).copy()
    n = a.shape[1]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    tol = 1e-15 * max(scale, 1.0)
    for _ in range(JACOBI_SWEEP_MAX):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                app = a[:, p] @ a[:, p]
                aqq = a[:, q] @ a[:, q]
                apq = a[:, p] @ a[:, q]
                if abs(apq) <= tol * np.sqrt(max(app * aqq, tol * tol)):
                    continue
                rotated = True
                tau = (aqq - app) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p], a[:, q] = c * ap - s * aq, s * ap + c * aq
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p], v[:, q] = c * vp - s * vq, s * vp + c * vq
        if not rotated:
            break
    sigma = np.linalg.norm(a, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    a = a[:, order]
    v = v[:, order]
    u = np.zeros_like(a)
    nonzero = sigma > 0
    u[:, nonzero] = a[:, nonzero] / sigma[nonzero]
    if transposed:
        u, v = v, u
    u, v = _fix_signs(u, v)
    return SvdResult(sigma, u, v)


def _power_top_triplet(m: np.ndarray) -> tuple[float, np.ndarray, np.ndarray]:
    """Dominant singular triplet by power iteration on m^T m."""
    rows, cols = m.shape
    v = np.linalg.norm(m, axis=0)
    nv = np.linalg.norm(v)
    if nv == 0.0:  # zero matrix: projection of a zero slice is zero
        return 0.0, np.zeros(rows), np.zeros(cols)
    v = v / nv
    for _ in range(POWER_ITER_MAX):
        w = m @ v
        v_new = m.T @ w
        nv = np.linalg.norm(v_new)
        if nv == 0.0:
            break
        v_new /= nv
        # vector-change criterion: sigma stabilizes quadratically faster than
        # the direction, and deflation orthogonality needs the direction
        delta = np.linalg.norm(v_new - v)
        v = v_new
        if delta <= POWER_ITER_TOL:
            break
    u = m @ v
    nu = np.linalg.norm(u)
    if nu == 0.0:
        return 0.0, np.zeros(rows), np.zeros(cols)
    return float(nu), u / nu, v


def batched_top_triplet(blocks: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Dominant singular triplet of a stack of small matrices, all at once.

    ``blocks`` has shape (count, rows, cols); returns (sigma, u, v) with shapes
    (count,), (count, rows), (count, cols). Power iteration on B^T B, run until
    every block's sigma estimate is stable to POWER_ITER_TOL. Zero blocks yield
    zero triplets. Deterministic: the start vector is the column-norm profile.
    """
    blocks = np.asarray(blocks, dtype=np.float64)
    count, rows, cols = blocks.shape
    v = np.linalg.norm(blocks, axis=1)  # (count, cols)
    nv = np.linalg.norm(v, axis=1, keepdims=True)
    alive = nv[:, 0] > 0.0
    v = np.where(nv > 0, v / np.where(nv > 0, nv, 1.0), 0.0)
    bt = blocks.transpose(0, 2, 1)
    for _ in range(POWER_ITER_MAX):
        w = np.einsum("brc,bc->br", blocks, v)
        v_new = np.einsum("bcr,br->bc", bt, w)
        nv = np.linalg.norm(v_new, axis=1)
        ok = nv > 0.0
        v_new[ok] /= nv[ok, None]
        v_new = np.where(ok[:, None], v_new, v)
        delta = np.linalg.norm(v_new - v, axis=1)
        v = v_new
        if bool(np.all((delta <= POWER_ITER_TOL) | ~alive)):
            break
    u = np.einsum("brc,bc->br", blocks, v)
    nu = np.linalg.norm(u, axis=1)
    ok = nu > 0.0
    u[ok] /= nu[ok, None]
    u[~ok] = 0.0
    v[~ok] = 0.0
    sigma = np.where(ok, nu, 0.0)
    # sign fix on v's first nonzero component, applied to u and v together
    first = (np.abs(v) > 0).argmax(axis=1)
    sign = np.sign(v[np.arange(count), first])
    sign = np.where(sign == 0, 1.0, sign)
    return sigma, u * sign[:, None], v * sign[:, None]


def truncated_svd(m: np.ndarray, rank: int) -> SvdResult:
    """Top-``rank`` singular triplets.

    A full-rank request runs one-sided Jacobi (exact small decomposition);
    partial ranks run power iteration with deflation, which is the projection
    production path (tol 1e-12, max 500 iterations per triplet).
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError("truncated_svd expects a 2D matrix")
    min_dim = min(m.shape)
    if not 1 <= rank <= min_dim:
        raise IndexError(f"rank {rank} out of range [1, {min_dim}]")
    if rank == min_dim:
        full = _jacobi_svd(m)
        return SvdResult(full.singular_values[:rank], full.u[:, :rank], full.v[:, :rank])
    rows, cols = m.shape
    sigma = np.zeros(rank)
    u = np.zeros((rows, rank))
    v = np.zeros((cols, rank))
    residual = m.copy()
    for t in range(rank):
        s, ut, vt = _power_top_triplet(residual)
        sigma[t], u[:, t], v[:, t] = s, ut, vt
        if s == 0.0:
            break
        residual -= s * np.outer(ut, vt)
    u, v = _fix_signs(u, v)
    return SvdResult(sigma, u, v)


@dataclass(frozen=True)
class Blocked4View:
    """4D blocked view of an N x N matrix with N = b1 * b2.

    View index (l, j, k, i) maps to base entry (l*b2 + j, k*b2 + i); the
    (j, k) slice taken along l and i is the b1 x b2 block whose rank-1
    structure the Monarch factors parameterize.
    """

    b1: int
    b2: int
    base: np.ndarray

    def __post_init__(self) -> None:
        n = self.b1 * self.b2
        if self.base.shape != (n, n):
            raise ShapeError(f"base must be {n}x{n} for blocks ({self.b1},{self.b2})")

    def tensor(self) -> np.ndarray:
        return self.base.reshape(self.b1, self.b2, self.b1, self.b2)

    def slice(self, j: int, k: int) -> np.ndarray:
        """The (j, k) slice along (l, i): a b1 x b2 block."""
        return self.tensor()[:, j, k, :]

    def slices(self) -> np.ndarray:
        """All slices stacked as (b2*b1, b1, b2), ordered (j, k) row-major."""
        return self.tensor().transpose(1, 2, 0, 3).reshape(self.b2 * self.b1, self.b1, self.b2)


# Contraction patterns used by the solver and densify paths. Letters follow
# the update equations: untiled L[j,l,k], R[k,j,i], Q/K/V blocked [l,j,v] or
# [k,i,v]; tiled uses a=l1, b=j1, c=k1, e=i1, l=l2, j=j2, k=k2, i=i2.
CONTRACT_PATTERNS: dict[str, str] = {
    "alpha_r": "jlk,ljv->kjv",
    "c_r": "jlk->kj",
    "beta_r": "kjv,kiv->kji",
    "alpha_l": "kji,kiv->jkv",
    "c_l": "kji->jk",
    "beta_l": "jkv,ljv->jlk",
    "y": "kji,kiv->kjv",
    "out": "jlk,kjv->ljv",
    "dense4": "jlk,kji->ljki",
    "t_alpha_r": "abcejlk,albjv->abcekjv",
    "t_c_r": "abcejlk->abcekj",
    "t_beta_r": "abcekjv,ckeiv->abcekji",
    "t_alpha_l": "abcekji,ckeiv->abcejkv",
    "t_c_l": "abcekji->abcejk",
    "t_beta_l": "abcejkv,albjv->abcejlk",
    "t_y": "abcekji,ckeiv->abcejkv",
    "t_out": "abcejlk,abcejkv->albjv",
    "t_dense8": "abcejlk,abcekji->albjckei",
}


def contract(pattern: str, *operands: np.ndarray) -> np.ndarray:
    """Fixed-pattern contraction: exact sum of products per the named pattern.

    Only the enumerated solver patterns are supported; operand shapes must
    bind every index label consistently.
    """
    try:
        spec = CONTRACT_PATTERNS[pattern]
    except KeyError:
        raise KeyError(f"unknown contraction pattern {pattern!r}") from None
    lhs, _ = spec.split("->")
    terms = lhs.split(",")
    if len(terms) != len(operands):
        raise ShapeError(f"pattern {pattern!r} takes {len(terms)} operands, got {len(operands)}")
    dims: dict[str, int] = {}
    for term, op in zip(terms, operands):
        if np.ndim(op) != len(term):
            raise ShapeError(f"pattern {pattern!r}: operand rank {np.ndim(op)} != {len(term)}")
        for label, size in zip(term, np.shape(op)):
            if dims.setdefault(label, size) != size:
                raise ShapeError(
                    f"pattern {pattern!r}: index {label!r} bound to both {dims[label]} and {size}"
                )
    return np.einsum(spec, *operands)
