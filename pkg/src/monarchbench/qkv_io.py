"""QKV1 tensor container: attention problems as a flat binary file.

Layout: magic b"QKV1", little-endian header (f, h, w, d) as uint32, then Q, K,
V as row-major float64 blocks of shape (f*h*w, d) each. Trivially parseable
from any language for cross-checking.
"""

from __future__ import annotations

import struct

import numpy as np

from .layout import VideoShape
from .solver import AttentionProblem

_MAGIC = b"QKV1"
_HEADER = struct.Struct("<4I")


class TensorFileError(ValueError):
    pass


def save_problem(problem: AttentionProblem, path) -> None:
    s = problem.shape
    payload = (
        _MAGIC
        + _HEADER.pack(s.f, s.h, s.w, problem.head_dim)
        + np.ascontiguousarray(problem.q, dtype="<f8").tobytes()
        + np.ascontiguousarray(problem.k, dtype="<f8").tobytes()
        + np.ascontiguousarray(problem.v, dtype="<f8").tobytes()
    )
    with open(path, "wb") as fh:
        fh.write(payload)


def load_problem(path, scale: float | None = None) -> AttentionProblem:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != _MAGIC:
        raise TensorFileError(f"bad magic {data[:4]!r} at byte 0, expected {_MAGIC!r}")
    if len(data) < 4 + _HEADER.size:
        raise TensorFileError(f"truncated header: have {len(data)} bytes, need {4 + _HEADER.size}")
    f, h, w, d = _HEADER.unpack_from(data, 4)
    if min(f, h, w, d) < 1:
        raise TensorFileError(f"invalid header (f,h,w,d) = {(f, h, w, d)} at byte 4")
    n = f * h * w
    body = 3 * n * d * 8
    need = 4 + _HEADER.size + body
    if len(data) != need:
        missing = need - len(data)
        raise TensorFileError(
            f"container holds {len(data)} bytes but header (f,h,w,d)={(f, h, w, d)} "
            f"requires {need} ({missing} missing)" if missing > 0 else
            f"container holds {len(data)} bytes but header requires {need} "
            f"({-missing} trailing)"
        )
    off = 4 + _HEADER.size
    q = np.frombuffer(data, dtype="<f8", count=n * d, offset=off).reshape(n, d).copy()
    k = np.frombuffer(data, dtype="<f8", count=n * d, offset=off + n * d * 8).reshape(n, d).copy()
    v = np.frombuffer(data, dtype="<f8", count=n * d, offset=off + 2 * n * d * 8).reshape(n, d).copy()
    return AttentionProblem(q, k, v, VideoShape(f, h, w), scale=scale)
