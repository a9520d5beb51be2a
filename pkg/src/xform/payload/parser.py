"""Parser for the generic one-op-per-line textual format.

    op     := [results "="] opname [@symbol] ["(" operands ")"] ["[" successors "]"]
              [attr-dict] [":" type | ":" "(" types ")"] [region ("," region)*]
    region := "{" [block-label] ops {block-label ops} "}"
    label  := "^" ident ["(" %arg ":" type, ... ")"] ":"

Both payload modules and transform scripts use this syntax.
"""

from __future__ import annotations

import bisect
import json
import re
from typing import Dict, List, Optional, Tuple

from .core import Block, Operation, Region, Sym, Value, new_module
from .diagnostics import error
from .types import Type, parse_type

_WS = re.compile(r"(?:\s+|//[^\n]*)*")
_VALUE = re.compile(r"%([A-Za-z0-9_$.\-]+)")
_OPNAME = re.compile(r"[A-Za-z_][\w$]*(?:\.[\w$]+)+")
_SYMBOL = re.compile(r"@([A-Za-z_][\w$.\-]*)")
_LABEL = re.compile(r"\^([A-Za-z0-9_]+)")
_IDENT = re.compile(r"[A-Za-z_][\w]*")
_NUMBER = re.compile(r"-?(?:\d+\.\d*(?:[eE][-+]?\d+)?|\d+[eE][-+]?\d+|\d+)")
_STRING = re.compile(r'"(?:[^"\\]|\\.)*"')
_ATTR_START = re.compile(r"\{\s*(?://[^\n]*\s*)*(?:[A-Za-z_][\w]*\s*=|\})")
_TYPE_HEAD = re.compile(r"!?[A-Za-z_][\w.]*")


class _Scanner:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self._lines = [0] + [m.end() for m in re.finditer(r"\n", text)]

    def loc(self, pos: Optional[int] = None) -> Tuple[int, int]:
        pos = self.pos if pos is None else pos
        line = bisect.bisect_right(self._lines, pos)
        return line, pos - self._lines[line - 1] + 1

    def ws(self) -> None:
        self.pos = _WS.match(self.text, self.pos).end()

    def peek(self, s: str) -> bool:
        self.ws()
        return self.text.startswith(s, self.pos)

    def accept(self, s: str) -> bool:
        if self.peek(s):
            self.pos += len(s)
            return True
        return False

    def expect(self, s: str) -> None:
        if not self.accept(s):
            raise error(f"expected '{s}' but found {self._near()}", self.loc())

    def match(self, rx: re.Pattern):
        self.ws()
        m = rx.match(self.text, self.pos)
        if m:
            self.pos = m.end()
        return m

    def at_end(self) -> bool:
        self.ws()
        return self.pos >= len(self.text)

    def _near(self) -> str:
        frag = self.text[self.pos:self.pos + 12].split("\n")[0]
        return repr(frag) if frag else "end of input"

    def fail(self, msg: str):
        raise error(f"{msg} near {self._near()}", self.loc())

    # -- types -------------------------------------------------------
    def type_text(self) -> str:
        self.ws()
        m = _TYPE_HEAD.match(self.text, self.pos)
        if not m:
            self.fail("expected a type")
        end = m.end()
        if end < len(self.text) and self.text[end] == "<":
            depth, i, in_str = 0, end, False
            while i < len(self.text):
                c = self.text[i]
                if c == '"':
                    in_str = not in_str
                elif not in_str and c == "<":
                    depth += 1
                elif not in_str and c == ">":
                    depth -= 1
                    if depth == 0:
                        break
                i += 1
            else:
                self.fail("unterminated type")
            end = i + 1
        text = self.text[self.pos:end]
        self.pos = end
        return text

    def type(self) -> Type:
        start = self.pos
        text = self.type_text()
        try:
            return parse_type(text)
        except ValueError as exc:
            raise error(str(exc), self.loc(start))

    # -- attributes --------------------------------------------------
    def attr_value(self):
        self.ws()
        if self.peek("["):
            self.expect("[")
            items = []
            if not self.accept("]"):
                while True:
                    items.append(self.attr_value())
                    if self.accept("]"):
                        break
                    self.expect(",")
            return items
        m = self.match(_STRING)
        if m:
            return json.loads(m.group(0))
        m = self.match(_SYMBOL)
        if m:
            return Sym(m.group(1))
        m = self.match(_NUMBER)
        if m:
            tok = m.group(0)
            return float(tok) if any(c in tok for c in ".eE") else int(tok)
        m = self.match(_IDENT)
        if m and m.group(0) in ("true", "false"):
            return m.group(0) == "true"
        self.fail("expected an attribute value")

    def attr_dict(self) -> Dict[str, object]:
        self.expect("{")
        attrs: Dict[str, object] = {}
        if self.accept("}"):
            return attrs
        while True:
            m = self.match(_IDENT)
            if not m:
                self.fail("expected attribute name")
            key = m.group(0)
            if key in attrs:
                self.fail(f"duplicate attribute '{key}'")
            self.expect("=")
            attrs[key] = self.attr_value()
            if self.accept("}"):
                return attrs
            self.expect(",")


def parse_attr_dict(text: str) -> Dict[str, object]:
    s = _Scanner(text)
    attrs = s.attr_dict()
    if not s.at_end():
        s.fail("trailing input after attribute dictionary")
    return attrs


ISOLATED_OPS = frozenset({"func.func", "llvmlite.func", "transform.named_sequence"})


class Parser:
    def __init__(self, text: str):
        self.s = _Scanner(text)
        self.scopes: List[Dict[str, Value]] = [{}]
        self.all_names: set = set()
        self.block_tables: List[dict] = []

    # -- value scoping -----------------------------------------------
    def lookup(self, name: str, loc) -> Value:
        for scope in reversed(self.scopes):
            if name in scope:
                return scope[name]
        raise error(f"value %{name} is not defined before this use (dominance violation)", loc)

    def define(self, name: str, v: Value, loc) -> None:
        if name in self.all_names:
            raise error(f"value %{name} is bound more than once", loc)
        self.all_names.add(name)
        self.scopes[-1][name] = v
        v.hint = name

    # -- grammar -----------------------------------------------------
    def parse_top(self) -> Operation:
        ops = []
        while not self.s.at_end():
            ops.append(self.parse_op())
        if len(ops) == 1 and ops[0].name == "builtin.module":
            return ops[0]
        module = new_module()
        for op in ops:
            module.body.append(op)
        return module

    def parse_op(self) -> Operation:
        s = self.s
        s.ws()
        start = s.pos
        loc = s.loc()
        result_names: List[Tuple[str, Tuple[int, int]]] = []
        if s.peek("%"):
            while True:
                m = s.match(_VALUE)
                if not m:
                    s.fail("expected result name")
                result_names.append((m.group(1), s.loc(m.start())))
                if not s.accept(","):
                    break
            s.expect("=")
        m = s.match(_OPNAME)
        if not m:
            s.fail("expected an operation name")
        name = m.group(0)
        attrs: Dict[str, object] = {}
        m = s.match(_SYMBOL)
        if m:
            attrs["sym_name"] = m.group(1)
        operands: List[Value] = []
        if s.accept("("):
            if not s.accept(")"):
                while True:
                    mv = s.match(_VALUE)
                    if not mv:
                        s.fail("expected operand")
                    operands.append(self.lookup(mv.group(1), s.loc(mv.start())))
                    if s.accept(")"):
                        break
                    s.expect(",")
        succ_labels: List[Tuple[str, Tuple[int, int]]] = []
        if s.accept("["):
            while True:
                ml = s.match(_LABEL)
                if not ml:
                    s.fail("expected successor block label")
                succ_labels.append((ml.group(1), s.loc(ml.start())))
                if s.accept("]"):
                    break
                s.expect(",")
        s.ws()
        if _ATTR_START.match(s.text, s.pos):
            extra = s.attr_dict()
            if "sym_name" in extra and "sym_name" in attrs:
                s.fail("symbol given twice")
            attrs.update(extra)
        result_types: List[Type] = []
        if s.accept(":"):
            if s.accept("("):
                if not s.accept(")"):
                    while True:
                        result_types.append(s.type())
                        if s.accept(")"):
                            break
                        s.expect(",")
            else:
                result_types.append(s.type())
        if len(result_types) != len(result_names):
            raise error(
                f"'{name}' declares {len(result_names)} results but {len(result_types)} types", loc
            )
        op = Operation(name, operands, result_types, attrs, loc=loc)
        op.successors = [self._block_ref(label, l) for label, l in succ_labels]
        if s.peek("{"):
            # names are unique per isolated-from-above op (functions, sequences)
            isolated = name in ISOLATED_OPS
            if isolated:
                saved, self.all_names = self.all_names, set()
            while True:
                op.add_region(self.parse_region())
                if not s.accept(","):
                    break
                if not s.peek("{"):
                    s.fail("expected region after ','")
            if isolated:
                self.all_names = saved
        # results become visible only after the op's own regions
        for (rname, rloc), res in zip(result_names, op.results):
            self.define(rname, res, rloc)
        return op

    def _block_ref(self, label: str, loc) -> Block:
        table = self.block_tables[-1] if self.block_tables else None
        if table is None:
            raise error("successor outside of a region", loc)
        if label not in table:
            table[label] = (Block(), loc, False)
        return table[label][0]

    def parse_region(self) -> Region:
        s = self.s
        s.expect("{")
        self.block_tables.append({})
        table = self.block_tables[-1]
        self.scopes.append({})
        region = Region()
        block: Optional[Block] = None
        while not s.accept("}"):
            if s.at_end():
                s.fail("unterminated region")
            ml = s.match(_LABEL)
            if ml:
                label = ml.group(1)
                lloc = s.loc(ml.start())
                entry = table.get(label)
                if entry is not None and entry[2]:
                    raise error(f"block ^{label} defined twice", lloc)
                block = entry[0] if entry is not None else Block()
                table[label] = (block, lloc, True)
                if s.accept("("):
                    if not s.accept(")"):
                        while True:
                            mv = s.match(_VALUE)
                            if not mv:
                                s.fail("expected block argument")
                            s.expect(":")
                            arg = block.add_arg(s.type())
                            self.define(mv.group(1), arg, s.loc(mv.start()))
                            if s.accept(")"):
                                break
                            s.expect(",")
                s.expect(":")
                region.add_block(block)
                continue
            if block is None:
                block = region.add_block(Block())
            block.append(self.parse_op())
        if not region.blocks:
            region.add_block(Block())
        for label, (blk, lloc, defined) in table.items():
            if not defined:
                raise error(f"branch to undefined block ^{label}", lloc)
        self.scopes.pop()
        self.block_tables.pop()
        return region


def parse_ir(text: str) -> Operation:
    """Parse text into a ``builtin.module`` op without verification."""
    return Parser(text).parse_top()
