"""Loop-level transcription of the alternating update equations.

This is the slow verification oracle for the production solver: every sum is
written as explicit Python loops in the exact index form of the update
equations, sharing no code with the einsum implementation. Inputs are the
already-scaled, already-ordered Q/K/V arrays.
"""

from __future__ import annotations

import math

import numpy as np


def _softmax_1d(row: list[float]) -> list[float]:
    m = max(row)
    e = [math.exp(x - m) for x in row]
    s = sum(e)
    return [x / s for x in e]


def reference_solve(q: np.ndarray, k: np.ndarray, b1: int, b2: int, t_steps: int):
    """Untiled updates; returns (L, R) after the final L update."""
    d = q.shape[1]
    qb = q.reshape(b1, b2, d)
    kb = k.reshape(b1, b2, d)
    bl = [[[1.0 if el == kk else 0.0 for kk in range(b1)] for el in range(b1)] for _ in range(b2)]
    br = [[[0.0] * b2 for _ in range(b2)] for _ in range(b1)]
    for _ in range(t_steps):
        alpha_r = [[[sum(bl[j][el][kk] * qb[el, j, v] for el in range(b1)) for v in range(d)]
                    for j in range(b2)] for kk in range(b1)]
        c_r = [[sum(bl[j][el][kk] for el in range(b1)) for j in range(b2)] for kk in range(b1)]
        beta_r = [[[sum(alpha_r[kk][j][v] * kb[kk, i, v] for v in range(d)) for i in range(b2)]
                   for j in range(b2)] for kk in range(b1)]
        br = [[_softmax_1d([beta_r[kk][j][i] / c_r[kk][j] for i in range(b2)])
               for j in range(b2)] for kk in range(b1)]
        alpha_l = [[[sum(br[kk][j][i] * kb[kk, i, v] for i in range(b2)) for v in range(d)]
                    for kk in range(b1)] for j in range(b2)]
        c_l = [[sum(br[kk][j][i] * math.log(br[kk][j][i]) for i in range(b2))
                for kk in range(b1)] for j in range(b2)]
        beta_l = [[[sum(alpha_l[j][kk][v] * qb[el, j, v] for v in range(d)) for kk in range(b1)]
                   for el in range(b1)] for j in range(b2)]
        bl = [[_softmax_1d([beta_l[j][el][kk] - c_l[j][kk] for kk in range(b1)])
               for el in range(b1)] for j in range(b2)]
    return np.array(bl), np.array(br)


def reference_output(bl: np.ndarray, br: np.ndarray, v: np.ndarray, b1: int, b2: int) -> np.ndarray:
    d = v.shape[1]
    vb = v.reshape(b1, b2, d)
    y = [[[sum(br[kk][j][i] * vb[kk, i, vv] for i in range(b2)) for vv in range(d)]
          for j in range(b2)] for kk in range(b1)]
    o = [[[sum(bl[j][el][kk] * y[kk][j][vv] for kk in range(b1)) for vv in range(d)]
          for j in range(b2)] for el in range(b1)]
    return np.array(o).reshape(b1 * b2, d)


def reference_solve_tiled(q: np.ndarray, k: np.ndarray, b1: int, b2: int, c1: int, c2: int, t_steps: int):
    """Tiled updates; index names follow the L'/R' subscripts directly."""
    d = q.shape[1]
    s1, s2 = b1 // c1, b2 // c2
    qb = q.reshape(c1, s1, c2, s2, d)  # [l1, l2, j1, j2, v]
    kb = k.reshape(c1, s1, c2, s2, d)  # [k1, k2, i1, i2, v]
    r1, r2 = range(c1), range(c2)
    f1, f2 = range(s1), range(s2)
    bl = np.zeros((c1, c2, c1, c2, s2, s1, s1))
    for l1 in r1:
        for j1 in r2:
            for k1 in r1:
                for i1 in r2:
                    for j2 in f2:
                        for l2 in f1:
                            bl[l1, j1, k1, i1, j2, l2, l2] = 1.0
    br = np.zeros((c1, c2, c1, c2, s1, s2, s2))
    for _ in range(t_steps):
        alpha_r = np.zeros((c1, c2, c1, c2, s1, s2, d))
        c_r = np.zeros((c1, c2, c1, c2, s1, s2))
        for l1 in r1:
            for j1 in r2:
                for k1 in r1:
                    for i1 in r2:
                        for k2 in f1:
                            for j2 in f2:
                                for v in range(d):
                                    alpha_r[l1, j1, k1, i1, k2, j2, v] = sum(
                                        bl[l1, j1, k1, i1, j2, l2, k2] * qb[l1, l2, j1, j2, v]
                                        for l2 in f1
                                    )
                                c_r[l1, j1, k1, i1, k2, j2] = sum(
                                    bl[l1, j1, k1, i1, j2, l2, k2] for l2 in f1
                                )
        for l1 in r1:
            for j1 in r2:
                for k1 in r1:
                    for i1 in r2:
                        for k2 in f1:
                            for j2 in f2:
                                z = [
                                    sum(
                                        alpha_r[l1, j1, k1, i1, k2, j2, v] * kb[k1, k2, i1, i2, v]
                                        for v in range(d)
                                    ) / c_r[l1, j1, k1, i1, k2, j2]
                                    for i2 in f2
                                ]
                                br[l1, j1, k1, i1, k2, j2, :] = _softmax_1d(z)
        alpha_l = np.zeros((c1, c2, c1, c2, s2, s1, d))
        c_l = np.zeros((c1, c2, c1, c2, s2, s1))
        for l1 in r1:
            for j1 in r2:
                for k1 in r1:
                    for i1 in r2:
                        for j2 in f2:
                            for k2 in f1:
                                for v in range(d):
                                    alpha_l[l1, j1, k1, i1, j2, k2, v] = sum(
                                        br[l1, j1, k1, i1, k2, j2, i2] * kb[k1, k2, i1, i2, v]
                                        for i2 in f2
                                    )
                                c_l[l1, j1, k1, i1, j2, k2] = sum(
                                    br[l1, j1, k1, i1, k2, j2, i2]
                                    * math.log(br[l1, j1, k1, i1, k2, j2, i2])
                                    for i2 in f2
                                )
        # joint softmax over (k1, k2, i1) per (l1, j1, j2, l2)
        for l1 in r1:
            for j1 in r2:
                for j2 in f2:
                    for l2 in f1:
                        idx = [(k1, i1, k2) for k1 in r1 for i1 in r2 for k2 in f1]
                        z = [
                            sum(
                                alpha_l[l1, j1, k1, i1, j2, k2, v] * qb[l1, l2, j1, j2, v]
                                for v in range(d)
                            ) - c_l[l1, j1, k1, i1, j2, k2]
                            for (k1, i1, k2) in idx
                        ]
                        sm = _softmax_1d(z)
                        for pos, (k1, i1, k2) in enumerate(idx):
                            bl[l1, j1, k1, i1, j2, l2, k2] = sm[pos]
    return bl, br


def reference_output_tiled(
    bl: np.ndarray, br: np.ndarray, v: np.ndarray, b1: int, b2: int, c1: int, c2: int
) -> np.ndarray:
    d = v.shape[1]
    s1, s2 = b1 // c1, b2 // c2
    vb = v.reshape(c1, s1, c2, s2, d)
    y = np.zeros((c1, c2, c1, c2, s2, s1, d))
    for l1 in range(c1):
        for j1 in range(c2):
            for k1 in range(c1):
                for i1 in range(c2):
                    for j2 in range(s2):
                        for k2 in range(s1):
                            for vv in range(d):
                                y[l1, j1, k1, i1, j2, k2, vv] = sum(
                                    br[l1, j1, k1, i1, k2, j2, i2] * vb[k1, k2, i1, i2, vv]
                                    for i2 in range(s2)
                                )
    out = np.zeros((c1, s1, c2, s2, d))
    for l1 in range(c1):
        for l2 in range(s1):
            for j1 in range(c2):
                for j2 in range(s2):
                    for vv in range(d):
                        out[l1, l2, j1, j2, vv] = sum(
                            bl[l1, j1, k1, i1, j2, l2, k2] * y[l1, j1, k1, i1, j2, k2, vv]
                            for k1 in range(c1)
                            for i1 in range(c2)
                            for k2 in range(s1)
                        )
    return out.reshape(b1 * b2, d)
