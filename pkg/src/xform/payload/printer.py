"""Printer for the generic textual format; inverse of :mod:`parser`."""

from __future__ import annotations

import json
from typing import Dict, List

from .core import Block, Operation, Region, Sym, Value


def format_attr(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        text = repr(v)
        return text if any(c in text for c in ".eE") else text + ".0"
    if isinstance(v, str):
        return json.dumps(v)
    if isinstance(v, Sym):
        return str(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(format_attr(x) for x in v) + "]"
    raise TypeError(f"cannot print attribute value {v!r}")


class Printer:
    def __init__(self, canonical: bool = False, indent: str = "  "):
        self.canonical = canonical
        self.indent = indent
        self.names: Dict[Value, str] = {}
        self.used: set = set()
        self.lines: List[str] = []
        self.block_names: Dict[Block, str] = {}

    def name_of(self, v: Value) -> str:
        name = self.names.get(v)
        if name is None:
            # operands defined outside the printed tree still get a stable name
            name = self._assign(v)
        return "%" + name

    def _assign(self, v: Value) -> str:
        if self.canonical or not v.hint:
            k = len(self.names)
            while True:
                name = f"v{k}" if self.canonical else str(k)
                if name not in self.used:
                    break
                k += 1
        else:
            name = v.hint
            n = 1
            while name in self.used:
                name = f"{v.hint}_{n}"
                n += 1
        self.used.add(name)
        self.names[v] = name
        return name

    def print_op(self, op: Operation, depth: int) -> None:
        pad = self.indent * depth
        head = ""
        if op.results:
            head = ", ".join("%" + self._assign(r) for r in op.results) + " = "
        text = head + op.name
        sym = op.attributes.get("sym_name")
        if isinstance(sym, str):
            text += " @" + sym
        if op.operands:
            text += "(" + ", ".join(self.name_of(v) for v in op.operands) + ")"
        if op.successors:
            text += " [" + ", ".join(self.block_names[b] for b in op.successors) + "]"
        attrs = {k: v for k, v in op.attributes.items() if not (k == "sym_name" and isinstance(v, str))}
        if attrs:
            text += " {" + ", ".join(f"{k} = {format_attr(attrs[k])}" for k in sorted(attrs)) + "}"
        if op.results:
            types = [str(r.type) for r in op.results]
            text += " : " + (types[0] if len(types) == 1 else "(" + ", ".join(types) + ")")
        if not op.regions:
            self.lines.append(pad + text)
            return
        for i, region in enumerate(op.regions):
            sep = " " if i == 0 else ", "
            if self._trivially_empty(region):
                text += sep + "{ }"
                continue
            self.lines.append(pad + text + sep + "{")
            self.print_region(region, depth + 1)
            text = pad + "}"
            pad = ""
        self.lines.append(pad + text)

    @staticmethod
    def _trivially_empty(region: Region) -> bool:
        return len(region.blocks) == 1 and not region.blocks[0].ops and not region.blocks[0].args

    def print_region(self, region: Region, depth: int) -> None:
        for i, block in enumerate(region.blocks):
            self.block_names[block] = f"^bb{i}"
        labelled = len(region.blocks) > 1 or any(b.args for b in region.blocks)
        for block in region.blocks:
            if labelled:
                args = ", ".join(f"%{self._assign(a)}: {a.type}" for a in block.args)
                label = self.block_names[block] + (f"({args})" if block.args else "") + ":"
                self.lines.append(self.indent * (depth - 1) + label)
            for op in block.ops:
                self.print_op(op, depth)


def print_payload(op: Operation, canonical: bool = False) -> str:
    """Render an op tree (normally a ``builtin.module``) as text."""
    p = Printer(canonical=canonical)
    p.print_op(op, 0)
    return "\n".join(p.lines) + "\n"


def structural_key(op: Operation) -> str:
    """Text that identifies an op tree up to value names and op ids."""
    return print_payload(op, canonical=True)


def structurally_equal(a: Operation, b: Operation) -> bool:
    return structural_key(a) == structural_key(b)
