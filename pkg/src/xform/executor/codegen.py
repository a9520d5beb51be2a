"""Compile payload functions to Python source for fast deterministic execution.

Every block gets a counter slot. Straight-line blocks add 1 when entered and
loop bodies add their trip count once at loop entry, so the per-op histogram
is ``sum(block_count * static op counts)`` without per-op bookkeeping.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from ..payload.core import Block, Operation, Sym, Value, symbol_table
from ..payload.types import F64, MemRefType, PtrType, ScalarType
from . import runtime as rt
from .runtime import ExecError

_CMP = {"eq": "==", "ne": "!=", "slt": "<", "sle": "<=", "sgt": ">", "sge": ">="}
_BINARY = {
    "arith.addi": "+", "arith.subi": "-", "arith.muli": "*", "arith.addf": "+", "arith.mulf": "*",
    "llvmlite.add": "+", "llvmlite.sub": "-", "llvmlite.mul": "*", "llvmlite.fadd": "+",
    "llvmlite.fmul": "*",
}
_AFFINE_TOKEN = re.compile(r"\s*(?:(?P<sym>[sd]\d+)|(?P<num>\d+)|(?P<kw>floordiv|ceildiv|mod)|(?P<op>[-+*()]))")


@dataclass
class BlockInfo:
    names: Counter
    weight: Fraction
    size: int
    vectorized: bool = False


def _zero(t) -> object:
    return 0.0 if t == F64 else 0


def affine_to_python(expr: str, operands: List[str], loc=None) -> str:
    """Translate an affine map string such as ``s0*64+s1`` to a Python expression."""
    out, pos = [], 0
    while pos < len(expr):
        m = _AFFINE_TOKEN.match(expr, pos)
        if not m or m.end() == pos:
            if expr[pos:].strip() == "":
                break
            raise ExecError(f"malformed affine map '{expr}'", loc)
        pos = m.end()
        if m.group("sym"):
            k = int(m.group("sym")[1:])
            if k >= len(operands):
                raise ExecError(f"affine map '{expr}' uses missing symbol {m.group('sym')}", loc)
            out.append(operands[k])
        elif m.group("num"):
            out.append(m.group("num"))
        elif m.group("kw"):
            out.append({"floordiv": "//", "mod": "%", "ceildiv": "//-"}[m.group("kw")])
        else:
            out.append(m.group("op"))
    text = " ".join(out)
    if "//-" in text:
        raise ExecError("ceildiv is not supported in affine maps", loc)
    return "(" + text + ")"


class ModuleCompiler:
    def __init__(self, module: Operation, weights: Dict[str, Fraction], vector_width: int,
                 kernel_alpha: Fraction, step_limit: int):
        self.module = module
        self.weights = weights
        self.vector_width = vector_width
        self.kernel_alpha = kernel_alpha
        self.step_limit = step_limit
        self.symbols = symbol_table(module)
        self.blocks: List[BlockInfo] = []
        self.fn_names: Dict[str, str] = {}
        self.source: List[str] = []
        self.consts: Dict[str, object] = {}

    def weight(self, name: str) -> Fraction:
        return Fraction(self.weights.get(name, 1))

    def new_block(self, block: Block, vectorized: bool = False) -> int:
        names = Counter(op.name for op in block.ops)
        weight = sum((self.weight(op.name) for op in block.ops if op.name != "lib.call_kernel"), Fraction(0))
        self.blocks.append(BlockInfo(names, weight, len(block.ops), vectorized))
        return len(self.blocks) - 1

    def is_defined(self, name: str) -> bool:
        f = self.symbols.get(name)
        return (
            f is not None and f.name in ("func.func", "llvmlite.func")
            and bool(f.regions) and bool(f.regions[0].blocks) and bool(f.regions[0].blocks[0].ops)
        )

    def compile(self, entry: str) -> Dict[str, object]:
        if not self.is_defined(entry):
            raise ExecError(f"entry function @{entry} not found")
        for name in self.symbols:
            if self.is_defined(name):
                self.fn_names[name] = f"_fn{len(self.fn_names)}"
        todo, done = [entry], set()
        while todo:
            name = todo.pop()
            if name in done:
                continue
            done.add(name)
            gen = _FunctionGen(self, self.symbols[name], self.fn_names[name])
            self.source.extend(gen.generate())
            todo.extend(c for c in gen.callees if c not in done)
        namespace = {
            "_rt": rt, "_oob": rt.oob, "_subview": rt.subview, "_reinterpret": rt.reinterpret,
            "_meta": rt.strided_metadata, "_pload": rt.ptr_load, "_pstore": rt.ptr_store,
            "_p2m": rt.ptr_to_memref, "_kernel": rt.call_kernel, "_ExecError": ExecError,
            "_LIMIT": self.step_limit,
        }
        namespace.update(self.consts)
        code = "\n".join(self.source)
        exec(compile(code, "<payload>", "exec"), namespace)
        return namespace


class _FunctionGen:
    def __init__(self, mc: ModuleCompiler, func: Operation, pyname: str):
        self.mc = mc
        self.func = func
        self.pyname = pyname
        self.lines: List[str] = []
        self.names: Dict[Value, str] = {}
        self.callees: List[str] = []
        self.ranges: Dict[Value, Optional[Tuple[int, int]]] = {}
        self.tmp = 0

    # -- naming ------------------------------------------------------------
    def var(self, v: Value) -> str:
        name = self.names.get(v)
        if name is None:
            name = f"v{len(self.names)}"
            self.names[v] = name
        return name

    def fresh(self, prefix: str = "t") -> str:
        self.tmp += 1
        return f"_{prefix}{self.tmp}"

    def const(self, obj) -> str:
        name = f"_k{len(self.mc.consts)}"
        self.mc.consts[name] = obj
        return name

    def emit(self, depth: int, text: str) -> None:
        self.lines.append("    " * depth + text)

    # -- range analysis for bounds-check elision --------------------------
    def range_of(self, v: Value) -> Optional[Tuple[int, int]]:
        if v in self.ranges:
            return self.ranges[v]
        self.ranges[v] = None
        r = None
        op = v.defining_op
        if op is not None:
            if op.name in ("arith.constant", "llvmlite.constant"):
                c = op.attributes.get("value")
                if isinstance(c, int) and not isinstance(c, bool):
                    r = (c, c)
            elif op.name in ("arith.addi", "llvmlite.add"):
                a, b = (self.range_of(x) for x in op.operands)
                if a and b:
                    r = (a[0] + b[0], a[1] + b[1])
            elif op.name in ("arith.subi", "llvmlite.sub"):
                a, b = (self.range_of(x) for x in op.operands)
                if a and b:
                    r = (a[0] - b[1], a[1] - b[0])
            elif op.name in ("arith.muli", "llvmlite.mul"):
                a, b = (self.range_of(x) for x in op.operands)
                if a and b:
                    prods = [x * y for x in a for y in b]
                    r = (min(prods), max(prods))
            elif op.name in ("arith.index_cast", "builtin.unrealized_conversion_cast"):
                if op.operands and isinstance(op.operands[0].type, ScalarType):
                    r = self.range_of(op.operands[0])
        else:
            owner = v.owner.parent_op if isinstance(v.owner, Block) else None
            if owner is not None and owner.name == "scf.for":
                lb, ub, st = (self.range_of(x) for x in owner.operands)
                if lb and ub and st and lb[0] == lb[1] and ub[0] == ub[1] and st[0] == st[1] and st[0] > 0:
                    lo, hi, s = lb[0], ub[0], st[0]
                    r = (lo, lo + ((hi - lo - 1) // s) * s) if hi > lo else (lo, lo)
            elif owner is not None and owner.name == "scf.forall":
                d = v.index
                lo = owner.attributes["lower_bounds"][d]
                hi = owner.attributes["upper_bounds"][d]
                s = owner.attributes["steps"][d]
                if min(lo, hi, s) >= 0 and s > 0:
                    r = (lo, lo + ((hi - lo - 1) // s) * s) if hi > lo else (lo, lo)
        self.ranges[v] = r
        return r

    # -- memref helpers -----------------------------------------------------
    def unpack(self, depth: int, v: Value, check_loc=None) -> None:
        """Bind ``x_b, x_o, x_z<d>, x_s<d>`` for a memref value ``x``."""
        t = v.type
        x = self.var(v)
        zs = ", ".join(f"{x}_z{d}" for d in range(t.rank)) + ","
        ss = ", ".join(f"{x}_s{d}" for d in range(t.rank)) + ","
        self.emit(depth, f"{x}_b, {x}_o, ({zs}), ({ss}) = {x}")
        static = [(d, s) for d, s in enumerate(t.shape) if s is not None]
        if static:
            cond = " or ".join(f"{x}_z{d} != {s}" for d, s in static)
            self.emit(depth, f"if {cond}: raise _ExecError('memref shape does not match its type {t}', {check_loc!r})")

    def access_index(self, depth: int, m: Value, idx: List[Value], loc) -> str:
        t = m.type
        x = self.var(m)
        checks = []
        for d, iv in enumerate(idx):
            r = self.range_of(iv)
            size = t.shape[d]
            if r is not None and size is not None and r[0] >= 0 and r[1] < size:
                continue
            checks.append(f"0 <= {self.var(iv)} < {x}_z{d}")
        if checks:
            self.emit(depth, f"if not ({' and '.join(checks)}): _oob({loc!r})")
        terms = [f"{x}_o"] + [f"{self.var(iv)}*{x}_s{d}" for d, iv in enumerate(idx)]
        return " + ".join(terms)

    # -- driver -------------------------------------------------------------
    def generate(self) -> List[str]:
        func = self.func
        region = func.regions[0]
        entry = region.blocks[0]
        params = [self.var(a) for a in entry.args]
        self.emit(0, f"def {self.pyname}({', '.join(params)}):")
        self.emit(1, "_c = _C; _s = _S")
        for a in entry.args:
            if isinstance(a.type, MemRefType):
                self.unpack(1, a, func.loc)
        if len(region.blocks) == 1:
            k = self.mc.new_block(entry)
            self.count(1, k, "1")
            self.emit_ops(entry, 1)
            if not self._ends_with_return(entry):
                self.emit(1, "return ()")
        else:
            self.emit_cfg(region.blocks, 1)
        return self.lines + [""]

    @staticmethod
    def _ends_with_return(block: Block) -> bool:
        t = block.terminator
        return t is not None and t.name in ("func.return", "llvmlite.return")

    def count(self, depth: int, k: int, mult: str) -> None:
        size = self.mc.blocks[k].size
        self.emit(depth, f"_c[{k}] += {mult}")
        if size:
            self.emit(depth, f"_s[0] += {mult}*{size}" if mult != "1" else f"_s[0] += {size}")
            self.emit(depth, "if _s[0] > _LIMIT: _rt.step_limit_exceeded(_LIMIT)")

    def emit_cfg(self, blocks: List[Block], depth: int) -> None:
        index = {b: i for i, b in enumerate(blocks)}
        self.block_index = index
        self.emit(depth, "_bb = 0")
        self.emit(depth, "while True:")
        for i, block in enumerate(blocks):
            self.emit(depth + 1, f"{'if' if i == 0 else 'elif'} _bb == {i}:")
            k = self.mc.new_block(block)
            if i > 0:
                for a in block.args:
                    if isinstance(a.type, MemRefType):
                        self.unpack(depth + 2, a)
            self.count(depth + 2, k, "1")
            self.emit_ops(block, depth + 2)
            term = block.terminator
            if term is None or term.name not in (
                "cf.br", "cf.cond_br", "llvmlite.br", "llvmlite.cond_br", "func.return", "llvmlite.return",
            ):
                self.emit(depth + 2, "return ()")
        self.emit(depth + 1, "else:")
        self.emit(depth + 2, "raise _ExecError('invalid block index')")

    def emit_ops(self, block: Block, depth: int) -> None:
        for op in block.ops:
            self.emit_op(op, depth)

    def branch_to(self, dest: Block, values: List[Value], depth: int) -> None:
        if dest.args:
            lhs = ", ".join(self.var(a) for a in dest.args) + ","
            rhs = ", ".join(self.var(v) for v in values) + ","
            self.emit(depth, f"{lhs} = {rhs}")
        self.emit(depth, f"_bb = {self.block_index[dest]}")

    # -- per-op emission ----------------------------------------------------
    def emit_op(self, op: Operation, depth: int) -> None:
        name = op.name
        loc = op.loc
        ins = [self.var(v) for v in op.operands]
        outs = [self.var(r) for r in op.results]
        e = lambda text: self.emit(depth, text)  # noqa: E731

        if name in ("arith.constant", "llvmlite.constant"):
            e(f"{outs[0]} = {op.attributes['value']!r}")
        elif name in _BINARY:
            e(f"{outs[0]} = {ins[0]} {_BINARY[name]} {ins[1]}")
        elif name in ("arith.cmpi", "llvmlite.icmp"):
            pred = op.attributes.get("predicate")
            if pred not in _CMP:
                raise ExecError(f"unknown predicate '{pred}'", loc)
            e(f"{outs[0]} = {ins[0]} {_CMP[pred]} {ins[1]}")
        elif name == "arith.index_cast":
            e(f"{outs[0]} = {ins[0]}")
        elif name == "affine.apply":
            e(f"{outs[0]} = {affine_to_python(op.attributes['map'], ins, loc)}")
        elif name == "builtin.unrealized_conversion_cast":
            self.emit_cast(op, depth)
        elif name == "llvmlite.undef":
            e(f"{outs[0]} = {_zero(op.results[0].type)!r}")
        elif name == "memref.alloc":
            t = op.results[0].type
            dyn = iter(ins)
            sizes = [str(s) if s is not None else next(dyn) for s in t.shape]
            n = " * ".join(sizes)
            strides = []
            for d in range(t.rank):
                strides.append(" * ".join(sizes[d + 1:]) or "1")
            e(f"{outs[0]} = ([{_zero(t.element)!r}] * ({n}), 0, ({', '.join(sizes)},), ({', '.join(strides)},))")
            self.unpack(depth, op.results[0], loc)
        elif name == "memref.load":
            idx = self.access_index(depth, op.operands[0], op.operands[1:], loc)
            e(f"{outs[0]} = {ins[0]}_b[{idx}]")
        elif name == "memref.store":
            idx = self.access_index(depth, op.operands[1], op.operands[2:], loc)
            e(f"{ins[1]}_b[{idx}] = {ins[0]}")
        elif name == "memref.subview":
            offs, sizes, strides = self.view_args(op)
            e(f"{outs[0]} = _subview({ins[0]}, {offs}, {sizes}, {strides}, {loc!r})")
            self.unpack(depth, op.results[0], loc)
        elif name == "memref.reinterpret_cast":
            offs, sizes, strides = self.view_args(op)
            e(f"{outs[0]} = _reinterpret({ins[0]}, {offs}[0], {sizes}, {strides}, {loc!r})")
            self.unpack(depth, op.results[0], loc)
        elif name == "memref.extract_strided_metadata":
            rank = op.operands[0].type.rank
            if len(outs) != 2 + 2 * rank:
                raise ExecError("extract_strided_metadata result count mismatch", loc)
            e(f"{', '.join(outs)}, = _meta({ins[0]})")
            self.unpack(depth, op.results[0], loc)
        elif name == "memref.extract_aligned_pointer_as_index":
            e(f"{outs[0]} = 0")
        elif name == "llvmlite.gep":
            e(f"{outs[0]} = ({ins[0]}[0], {ins[0]}[1] + {ins[1]})")
        elif name == "llvmlite.load":
            e(f"{outs[0]} = _pload({ins[0]}, {loc!r})")
        elif name == "llvmlite.store":
            e(f"_pstore({ins[0]}, {ins[1]}, {loc!r})")
        elif name == "llvmlite.alloca":
            elem = op.attributes.get("elem", "f64")
            zero = 0.0 if elem == "f64" else 0
            e(f"{outs[0]} = ([{zero!r}] * {int(op.attributes['size'])}, 0)")
        elif name == "llvmlite.ptrtoint":
            e(f"{outs[0]} = {ins[0]}[1]")
        elif name in ("func.call", "llvmlite.call"):
            self.emit_call(op, depth)
        elif name in ("func.return", "llvmlite.return"):
            e(f"return ({', '.join(ins)}{',' if ins else ''})")
        elif name == "scf.yield":
            pass
        elif name == "scf.for":
            self.emit_for(op, depth)
        elif name == "scf.forall":
            self.emit_forall(op, depth)
        elif name == "scf.if":
            self.emit_if(op, depth)
        elif name in ("cf.br", "llvmlite.br"):
            self.branch_to(op.successors[0], op.operands, depth)
            e("continue")
        elif name in ("cf.cond_br", "llvmlite.cond_br"):
            seg = op.segment_sizes or [1, 0, 0]
            t_args = op.operands[1:1 + seg[1]]
            f_args = op.operands[1 + seg[1]:]
            e(f"if {ins[0]}:")
            self.branch_to(op.successors[0], t_args, depth + 1)
            e("else:")
            self.branch_to(op.successors[1], f_args, depth + 1)
            e("continue")
        elif name == "lib.call_kernel":
            self.emit_kernel(op, depth)
        else:
            raise ExecError(f"unknown op '{name}' in executable subset", loc)

    def view_args(self, op: Operation) -> Tuple[str, str, str]:
        groups = []
        for g, key in ((1, "static_offsets"), (2, "static_sizes"), (3, "static_strides")):
            dyn = iter(self.var(v) for v in op.operand_group(g))
            items = [next(dyn) if s == -1 else str(s) for s in op.attributes[key]]
            groups.append("(" + ", ".join(items) + ("," if len(items) == 1 else "") + ")")
        return groups[0], groups[1], groups[2]

    def emit_cast(self, op: Operation, depth: int) -> None:
        src, dst = op.operands[0].type, op.results[0].type
        x, out = self.var(op.operands[0]), self.var(op.results[0])
        if isinstance(src, MemRefType) and isinstance(dst, PtrType):
            self.emit(depth, f"{out} = ({x}[0], {x}[1])")
        elif isinstance(src, PtrType) and isinstance(dst, MemRefType):
            sizes = None if any(s is None for s in dst.shape) else tuple(dst.shape)
            strides = dst.layout_strides()
            if any(s is None for s in strides):
                raise ExecError("cannot cast a pointer to a memref with dynamic strides", op.loc)
            # the pointer addresses the view's first element
            self.emit(depth, f"{out} = _p2m({x}, {sizes!r}, {tuple(strides)!r}, {op.loc!r})")
            self.unpack(depth, op.results[0], op.loc)
        else:
            self.emit(depth, f"{out} = {x}")
            if isinstance(dst, MemRefType):
                self.unpack(depth, op.results[0], op.loc)

    def emit_call(self, op: Operation, depth: int) -> None:
        callee = op.attributes["callee"]
        callee = callee.name if isinstance(callee, Sym) else str(callee).lstrip("@")
        ins = [self.var(v) for v in op.operands]
        outs = [self.var(r) for r in op.results]
        args = ", ".join(ins)
        if self.mc.is_defined(callee):
            if callee not in self.callees:
                self.callees.append(callee)
            call = f"{self.mc.fn_names[callee]}({args})"
            if outs:
                self.emit(depth, f"{', '.join(outs)}, = {call}")
            else:
                self.emit(depth, call)
            for r in op.results:
                if isinstance(r.type, MemRefType):
                    self.unpack(depth, r, op.loc)
        else:
            for r in op.results:
                if not isinstance(r.type, ScalarType):
                    raise ExecError(f"external call @{callee} cannot return {r.type}", op.loc)
            self.emit(depth, f"_CALLS.append(({callee!r}, _rt.describe_args(({args}{',' if ins else ''}))))")
            for r in op.results:
                self.emit(depth, f"{self.var(r)} = {_zero(r.type)!r}")

    def emit_for(self, op: Operation, depth: int) -> None:
        lb, ub, st = (self.var(v) for v in op.operands)
        body = op.body
        iv = self.var(body.args[0])
        rng = self.fresh("r")
        n = self.fresh("n")
        sr = self.range_of(op.operands[2])
        if not (sr and sr[0] > 0):
            self.emit(depth, f"if {st} <= 0: raise _ExecError('scf.for step must be positive', {op.loc!r})")
        self.emit(depth, f"{rng} = range({lb}, {ub}, {st}); {n} = len({rng})")
        vectorized = bool(op.attributes.get("vectorized")) and self.mc.vector_width >= 1
        k = self.mc.new_block(body, vectorized=vectorized)
        self.count(depth, k, n)
        if vectorized:
            per = self.mc.blocks[k].weight / self.mc.vector_width
            self.emit(depth, f"_VC[0] += -(-({n} * {per.numerator}) // {per.denominator})")
        self.emit(depth, f"for {iv} in {rng}:")
        before = len(self.lines)
        self.emit_ops(body, depth + 1)
        if len(self.lines) == before:
            self.emit(depth + 1, "pass")

    def emit_forall(self, op: Operation, depth: int) -> None:
        body = op.body
        los, his, sts = (op.attributes[k] for k in ("lower_bounds", "upper_bounds", "steps"))
        trips = [len(range(lo, hi, s)) for lo, hi, s in zip(los, his, sts)]
        total = 1
        for t in trips:
            total *= t
        k = self.mc.new_block(body)
        self.count(depth, k, str(total))
        d = depth
        for a, lo, hi, s in zip(body.args, los, his, sts):
            self.emit(d, f"for {self.var(a)} in range({lo}, {hi}, {s}):")
            d += 1
        before = len(self.lines)
        self.emit_ops(body, d)
        if len(self.lines) == before:
            self.emit(d, "pass")

    def emit_if(self, op: Operation, depth: int) -> None:
        cond = self.var(op.operands[0])
        self.emit(depth, f"if {cond}:")
        for i, region in enumerate(op.regions):
            if i == 1:
                self.emit(depth, "else:")
            if region.blocks:
                k = self.mc.new_block(region.blocks[0])
                self.count(depth + 1, k, "1")
                self.emit_ops(region.blocks[0], depth + 1)
            self.emit(depth + 1, "pass")

    def emit_kernel(self, op: Operation, depth: int) -> None:
        ins = [self.var(v) for v in op.operands]
        m, n, kk = (int(op.attributes[x]) for x in ("m", "n", "k"))
        alpha = Fraction(str(op.attributes["alpha"])) if "alpha" in op.attributes else self.mc.kernel_alpha
        count = int(op.attributes.get("batch_count", 1))
        cost = self.const(alpha * m * n * kk * count)
        a, b, c = ins[:3]
        batch = ins[3:-3]
        i0, j0, k0 = ins[-3:]
        bt = "(" + ", ".join(batch) + ("," if len(batch) == 1 else "") + ")"
        self.emit(depth, f"_kernel({a}, {b}, {c}, {bt}, {i0}, {j0}, {k0}, {m}, {n}, {kk}, {op.loc!r}, {count})")
        self.emit(depth, f"_KC[0] += {cost}")
