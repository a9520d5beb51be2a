"""Semantic types carried by payload and script values."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Tuple

DYNAMIC = None  # marker for a dynamic dim/stride/offset


class Type:
    """Base class; all types are immutable and hashable."""


@dataclass(frozen=True)
class ScalarType(Type):
    name: str  # index | i1 | i64 | f64

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class PtrType(Type):
    """Flat pointer of the llvmlite target dialect."""

    def __str__(self) -> str:
        return "ptr"


@dataclass(frozen=True)
class MemRefType(Type):
    shape: Tuple[Optional[int], ...]
    element: ScalarType
    strides: Optional[Tuple[Optional[int], ...]] = None  # None means identity layout
    offset: Optional[int] = 0

    def __post_init__(self):
        if not self.shape:
            raise ValueError("memref rank must be >= 1")
        for d in self.shape:
            if d is not None and d < 0:
                raise ValueError(f"negative memref dim {d}")
        object.__setattr__(self, "shape", tuple(self.shape))
        strides = identity_strides(self.shape) if self.strides is None else tuple(self.strides)
        if len(strides) != len(self.shape):
            raise ValueError("stride count must equal rank")
        if self.offset == 0 and strides == identity_strides(self.shape):
            object.__setattr__(self, "strides", None)
        else:
            object.__setattr__(self, "strides", strides)

    @property
    def rank(self) -> int:
        return len(self.shape)

    def layout_strides(self) -> Tuple[Optional[int], ...]:
        if self.strides is not None:
            return self.strides
        return identity_strides(self.shape)

    def is_identity_layout(self) -> bool:
        return self.offset == 0 and self.strides is None

    def num_elements(self) -> Optional[int]:
        n = 1
        for d in self.shape:
            if d is None:
                return None
            n *= d
        return n

    def __str__(self) -> str:
        dims = "x".join("?" if d is None else str(d) for d in self.shape)
        text = f"memref<{dims}x{self.element}"
        if self.strides is not None or self.offset != 0:
            strides = ", ".join("?" if s is None else str(s) for s in self.layout_strides())
            off = "?" if self.offset is None else str(self.offset)
            text += f", strided<[{strides}], offset: {off}>"
        return text + ">"


@dataclass(frozen=True)
class TransformType(Type):
    """Type of a transform-script value: a handle constrained by an op set, or a parameter."""

    kind: str  # handle | param
    ops: Tuple[str, ...] = ()  # empty tuple means any_op

    def __str__(self) -> str:
        if self.kind == "param":
            return "!transform.param"
        if not self.ops:
            return "!transform.any_op"
        return "!transform.op<" + ", ".join(f'"{o}"' for o in self.ops) + ">"


def identity_strides(shape) -> Tuple[Optional[int], ...]:
    out = []
    acc: Optional[int] = 1
    for d in reversed(shape):
        out.append(acc)
        acc = None if (acc is None or d is None) else acc * d
    return tuple(reversed(out))


INDEX = ScalarType("index")
I1 = ScalarType("i1")
I64 = ScalarType("i64")
F64 = ScalarType("f64")
PTR = PtrType()
ANY_HANDLE = TransformType("handle")
PARAM = TransformType("param")

_SCALARS = {"index": INDEX, "i1": I1, "i64": I64, "f64": F64}
_MEMREF_RE = re.compile(
    r"memref<\s*((?:[0-9?]+\s*x\s*)+)(f64|i64|index|i1)"
    r"(?:\s*,\s*strided<\s*\[([^\]]*)\]\s*(?:,\s*offset\s*:\s*([0-9?]+))?\s*>)?\s*>$"
)
_TOP_RE = re.compile(r'!transform\.op<\s*((?:"[^"]*"\s*,?\s*)+)>$')


def _dim(tok: str) -> Optional[int]:
    tok = tok.strip()
    return None if tok == "?" else int(tok)


def parse_type(text: str) -> Type:
    """Parse the textual form of a type; raises ValueError on failure."""
    text = text.strip()
    if text in _SCALARS:
        return _SCALARS[text]
    if text == "ptr":
        return PTR
    if text == "!transform.any_op":
        return ANY_HANDLE
    if text == "!transform.param":
        return PARAM
    m = _TOP_RE.match(text)
    if m:
        return TransformType("handle", tuple(re.findall(r'"([^"]*)"', m.group(1))))
    m = _MEMREF_RE.match(text)
    if m:
        dims = tuple(_dim(t) for t in m.group(1).split("x") if t.strip())
        elem = _SCALARS[m.group(2)]
        strides = None
        offset: Optional[int] = 0
        if m.group(3) is not None:
            strides = tuple(_dim(t) for t in m.group(3).split(","))
            offset = _dim(m.group(4)) if m.group(4) is not None else 0
        return MemRefType(dims, elem, strides, offset)
    raise ValueError(f"unknown type {text!r}")


def is_integer_like(t: Type) -> bool:
    return isinstance(t, ScalarType) and t.name in ("index", "i64", "i1")
