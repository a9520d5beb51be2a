"""Runtime values and helpers used by generated executor code.

Inside generated code a memref is the tuple ``(buf, offset, sizes, strides)``
and an llvmlite pointer is ``(buf, index)``; buffers are flat Python lists.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np


class ExecError(Exception):
    """Definite execution failure (out-of-bounds, step limit, unsupported op)."""

    def __init__(self, message: str, loc=None):
        super().__init__(message)
        self.loc = loc


@dataclass
class MemRef:
    """A host-side memref argument/result with a flat buffer."""

    buf: List[float]
    sizes: Tuple[int, ...]
    strides: Tuple[int, ...] = ()
    offset: int = 0

    def __post_init__(self):
        self.sizes = tuple(self.sizes)
        if not self.strides:
            acc, out = 1, []
            for d in reversed(self.sizes):
                out.append(acc)
                acc *= d
            self.strides = tuple(reversed(out))
        self.strides = tuple(self.strides)

    @classmethod
    def filled(cls, shape: Sequence[int], value=0.0) -> "MemRef":
        n = 1
        for d in shape:
            n *= d
        return cls([value] * n, tuple(shape))

    @classmethod
    def from_array(cls, arr) -> "MemRef":
        arr = np.asarray(arr)
        vals = [float(x) for x in arr.ravel()] if arr.dtype.kind == "f" else [int(x) for x in arr.ravel()]
        return cls(vals, arr.shape)

    def to_array(self) -> np.ndarray:
        flat = np.asarray(self.buf)
        return np.lib.stride_tricks.as_strided(
            flat[self.offset:], shape=self.sizes,
            strides=tuple(s * flat.itemsize for s in self.strides),
        ).copy()

    def copy(self) -> "MemRef":
        return MemRef(list(self.buf), self.sizes, self.strides, self.offset)

    def as_tuple(self):
        return (self.buf, self.offset, self.sizes, self.strides)


@dataclass
class ExecResult:
    returns: tuple
    buffers: List[list] = field(default_factory=list)  # final contents of memref/ptr arguments
    calls: List[tuple] = field(default_factory=list)  # calls to external functions, in order


def oob(loc, what="memref access"):
    raise ExecError(f"out-of-bounds {what}", loc)


def subview(src, offs, sizes, strides, loc):
    buf, base, ssz, sst = src
    for d, (o, n, s) in enumerate(zip(offs, sizes, strides)):
        if o < 0 or n < 0 or s < 1 or (n > 0 and o + (n - 1) * s >= ssz[d]):
            oob(loc, "subview")
    off = base + sum(o * st for o, st in zip(offs, sst))
    return (buf, off, tuple(sizes), tuple(s * st for s, st in zip(strides, sst)))


def reinterpret(src, off, sizes, strides, loc):
    buf = src[0]
    if off < 0:
        oob(loc, "reinterpret_cast")
    hi = off + sum((n - 1) * s for n, s in zip(sizes, strides) if n > 0)
    if any(n > 0 for n in sizes) and hi >= len(buf):
        oob(loc, "reinterpret_cast")
    return (buf, off, tuple(sizes), tuple(strides))


def strided_metadata(m):
    buf, off, sizes, strides = m
    return ((buf, 0, (len(buf),), (1,)), off) + tuple(sizes) + tuple(strides)


def ptr_load(p, loc):
    buf, i = p
    if not 0 <= i < len(buf):
        oob(loc, "pointer load")
    return buf[i]


def ptr_store(v, p, loc):
    buf, i = p
    if not 0 <= i < len(buf):
        oob(loc, "pointer store")
    buf[i] = v


def ptr_to_memref(p, sizes, strides, loc):
    if sizes is None:
        raise ExecError("cannot view a pointer as a dynamically shaped memref", loc)
    return reinterpret((p[0],), p[1], sizes, strides, loc)


def call_kernel(a, b, c, batch, i0, j0, k0, m, n, k, loc, batch_count=1):
    """C[.., i0+i, j0+j] += sum_kk A[.., i0+i, k0+kk] * B[.., k0+kk, j0+j].

    With ``batch_count`` > 1 the last batch index runs over that many
    consecutive values.
    """
    if batch_count != 1:
        if not batch:
            raise ExecError("batch_count needs a batch index", loc)
        for t in range(batch_count):
            call_kernel(a, b, c, tuple(batch[:-1]) + (batch[-1] + t,), i0, j0, k0, m, n, k, loc)
        return
    def tile(ref, r0, c0, rows, cols):
        buf, off, sizes, strides = ref
        lead = list(batch)
        if len(lead) + 2 != len(sizes):
            raise ExecError("kernel operand rank mismatch", loc)
        for d, x in enumerate(lead):
            if not 0 <= x < sizes[d]:
                oob(loc, "kernel access")
        if r0 < 0 or c0 < 0 or r0 + rows > sizes[-2] or c0 + cols > sizes[-1]:
            oob(loc, "kernel access")
        base = off + sum(x * s for x, s in zip(lead, strides))
        rs, cs = strides[-2], strides[-1]
        idx = (base + (r0 + np.arange(rows))[:, None] * rs + (c0 + np.arange(cols))[None, :] * cs)
        return buf, idx
    abuf, aidx = tile(a, i0, k0, m, k)
    bbuf, bidx = tile(b, k0, j0, k, n)
    cbuf, cidx = tile(c, i0, j0, m, n)
    av = np.array([abuf[x] for x in aidx.ravel()]).reshape(m, k)
    bv = np.array([bbuf[x] for x in bidx.ravel()]).reshape(k, n)
    cv = np.array([cbuf[x] for x in cidx.ravel()]).reshape(m, n)
    out = cv + av @ bv
    for x, v in zip(cidx.ravel().tolist(), out.ravel().tolist()):
        cbuf[x] = v


def results_match(a: ExecResult, b: ExecResult, rel_tol: float = 0.0) -> bool:
    """Exact comparison, or relative tolerance on floats when ``rel_tol`` > 0."""
    def close(x, y):
        if isinstance(x, float) or isinstance(y, float):
            if rel_tol == 0.0:
                return x == y
            return abs(x - y) <= rel_tol * max(abs(x), abs(y), 1e-300) or x == y
        return x == y

    def seq_close(xs, ys):
        return len(xs) == len(ys) and all(close(x, y) for x, y in zip(xs, ys))

    if not seq_close(a.returns, b.returns):
        return False
    if len(a.buffers) != len(b.buffers) or not all(seq_close(x, y) for x, y in zip(a.buffers, b.buffers)):
        return False
    if len(a.calls) != len(b.calls):
        return False
    return all(n1 == n2 and seq_close(x1, x2) for (n1, x1), (n2, x2) in zip(a.calls, b.calls))


def step_limit_exceeded(limit):
    raise ExecError(f"execution exceeded the step limit of {limit} ops")


def describe_args(args) -> tuple:
    """Call-log view of arguments: scalars as-is, buffers by layout only."""
    out = []
    for a in args:
        if isinstance(a, tuple) and len(a) == 4:
            out.append(("memref", a[1], tuple(a[2]), tuple(a[3])))
        elif isinstance(a, tuple) and len(a) == 2:
            out.append(("ptr", a[1]))
        else:
            out.append(a)
    return tuple(out)
