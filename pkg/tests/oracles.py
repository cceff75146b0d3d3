"""Independent brute-force oracles shared across test modules.

Everything here is deliberately naive (nested Python loops, numpy.linalg
reference decompositions) and shares no code with the production paths it
checks.
"""

from __future__ import annotations

import itertools

import numpy as np


def loop_einsum(spec: str, *operands: np.ndarray) -> np.ndarray:
    """Evaluate an einsum spec by explicit nested loops."""
    lhs, rhs = spec.split("->")
    terms = lhs.split(",")
    dims: dict[str, int] = {}
    for term, op in zip(terms, operands):
        for label, size in zip(term, op.shape):
            dims[label] = size
    out_labels = list(rhs)
    sum_labels = sorted(set("".join(terms)) - set(out_labels))
    out = np.zeros(tuple(dims[l] for l in out_labels))
    for out_idx in itertools.product(*(range(dims[l]) for l in out_labels)):
        bound = dict(zip(out_labels, out_idx))
        total = 0.0
        for sum_idx in itertools.product(*(range(dims[l]) for l in sum_labels)):
            bound.update(zip(sum_labels, sum_idx))
            prod = 1.0
            for term, op in zip(terms, operands):
                prod *= op[tuple(bound[l] for l in term)]
            total += prod
        out[out_idx] = total
    return out


def loop_densify(l_blocks: np.ndarray, r_blocks: np.ndarray) -> np.ndarray:
    """M[l*b2+j, k*b2+i] = L[j,l,k] * R[k,j,i] by four explicit loops."""
    b2, b1, _ = l_blocks.shape
    n = b1 * b2
    m = np.zeros((n, n))
    for l in range(b1):
        for j in range(b2):
            for k in range(b1):
                for i in range(b2):
                    m[l * b2 + j, k * b2 + i] = l_blocks[j, l, k] * r_blocks[k, j, i]
    return m


def loop_densify_tiled(l_blocks: np.ndarray, r_blocks: np.ndarray) -> np.ndarray:
    c1, c2, _, _, s2, s1, _ = l_blocks.shape
    b1, b2 = c1 * s1, c2 * s2
    n = b1 * b2
    m = np.zeros((n, n))
    for l1 in range(c1):
        for l2 in range(s1):
            for j1 in range(c2):
                for j2 in range(s2):
                    row = (l1 * s1 + l2) * b2 + (j1 * s2 + j2)
                    for k1 in range(c1):
                        for k2 in range(s1):
                            for i1 in range(c2):
                                for i2 in range(s2):
                                    col = (k1 * s1 + k2) * b2 + (i1 * s2 + i2)
                                    m[row, col] = (
                                        l_blocks[l1, j1, k1, i1, j2, l2, k2]
                                        * r_blocks[l1, j1, k1, i1, k2, j2, i2]
                                    )
    return m


def loop_mse(a: np.ndarray, b: np.ndarray) -> float:
    total = 0.0
    for i in range(a.shape[0]):
        for j in range(a.shape[1]):
            d = a[i, j] - b[i, j]
            total += d * d
    return total / (a.shape[0] * a.shape[1])


def best_row_sparse_residual(a: np.ndarray, k: int) -> float:
    """Exhaustive minimum squared error over all per-row k-subsets."""
    total = 0.0
    for row in a:
        best = np.inf
        for keep in itertools.combinations(range(row.size), k):
            dropped = [i for i in range(row.size) if i not in keep]
            best = min(best, float(np.sum(row[dropped] ** 2)))
        total += best
    return total / a.size


def np_singular_values(m: np.ndarray) -> np.ndarray:
    return np.linalg.svd(m, compute_uv=False)


def random_row_stochastic_factors(rng: np.random.Generator, b1: int, b2: int):
    """Random factors whose L rows (over k) and R rows (over i) sum to 1."""
    l = rng.random((b2, b1, b1)) + 1e-3
    l /= l.sum(axis=2, keepdims=True)
    r = rng.random((b1, b2, b2)) + 1e-3
    r /= r.sum(axis=2, keepdims=True)
    return l, r
