"""The progressive lowering chain from scf/arith/cf/func/memref to llvmlite,
plus lower-affine, canonicalize and instrument-accumulate.

Type changes are bridged with explicit ``builtin.unrealized_conversion_cast``
ops; reconcile-unrealized-casts removes the pairs that cancel and rejects
any cast that stays live.
"""

from __future__ import annotations

import ast
from typing import Dict, List, Optional

from ..conditions import ConditionSignature
from ..errors import DefiniteFailure
from ..payload.core import Block, Operation, Region, Value
from ..payload.rewriter import Rewriter
from ..payload.types import F64, I1, I64, INDEX, PTR, MemRefType, ScalarType
from .patterns import CANONICAL, apply_patterns
from .registry import Pass, PassFailure

CAST = "builtin.unrealized_conversion_cast"
FUNC_LIKE = ("func.func", "llvmlite.func")

LEGALIZE_CAST_MSG = (
    "failed to legalize operation 'builtin.unrealized_conversion_cast' that was explicitly marked illegal"
)


def functions(target: Operation) -> List[Operation]:
    """Function ops at or below ``target``."""
    return [op for op in target.walk() if op.name in FUNC_LIKE]


def cast(v: Value, t, anchor: Operation, rw: Rewriter) -> Value:
    c = Operation(CAST, [v], [t], loc=anchor.loc)
    rw.insert_before(anchor, c)
    return c.result


def _new(name: str, operands, types, attrs=None, loc=None, successors=()) -> Operation:
    return Operation(name, list(operands), list(types), attrs or {}, successors=successors, loc=loc)


def _insert_block_after(anchor: Block, block: Block) -> None:
    region = anchor.parent
    block.parent = region
    region.blocks.insert(region.blocks.index(anchor) + 1, block)


def _split_after(op: Operation) -> Block:
    """Move the ops following ``op`` into a new block placed after op's block."""
    block = op.parent
    tail = Block()
    idx = block.index_of(op)
    for o in list(block.ops[idx + 1:]):
        block.detach(o)
        tail.append(o)
    _insert_block_after(block, tail)
    return tail


def _strip_yield(block: Block, rw: Rewriter) -> None:
    t = block.terminator
    if t is not None and t.name == "scf.yield":
        rw.erase(t)


# -- ① convert-scf-to-cf --------------------------------------------------

def _lower_forall(op: Operation, rw: Rewriter) -> None:
    lbs, ubs, sts = (op.attributes[k] for k in ("lower_bounds", "upper_bounds", "steps"))
    body = op.body
    outer: Optional[Operation] = None
    parent_block: Optional[Block] = None
    for d, (lo, hi, st) in enumerate(zip(lbs, ubs, sts)):
        consts = [_new("arith.constant", [], [INDEX], {"value": x}, op.loc) for x in (lo, hi, st)]
        loop_block = Block([INDEX], [body.args[d].hint])
        loop = Operation("scf.for", [c.result for c in consts], [], regions=[Region([loop_block])], loc=op.loc)
        if parent_block is None:
            for c in consts:
                rw.insert_before(op, c)
            outer = loop
        else:
            for c in consts:
                parent_block.append(c)
            parent_block.append(loop)
        body.args[d].replace_all_uses_with(loop_block.args[0])
        parent_block = loop_block
    _strip_yield(body, rw)
    for o in list(body.ops):
        body.detach(o)
        parent_block.append(o)
    rw.insert_before(op, outer)
    rw.replace(op, [outer])


def _lower_for(op: Operation, rw: Rewriter) -> None:
    lb, ub, step = op.operands
    block = op.parent
    exit_block = _split_after(op)
    body = op.regions[0].blocks[0]
    op.regions[0].blocks = []
    iv = body.args[0]
    header = Block([INDEX], [iv.hint])
    iv.replace_all_uses_with(header.args[0])
    body.args = []
    _strip_yield(body, rw)
    nxt = _new("arith.addi", [header.args[0], step], [INDEX], loc=op.loc)
    body.append(nxt)
    body.append(_new("cf.br", [nxt.result], [], loc=op.loc, successors=[header]))
    cmp = _new("arith.cmpi", [header.args[0], ub], [I1], {"predicate": "slt"}, op.loc)
    header.append(cmp)
    header.append(_new("cf.cond_br", [cmp.result], [], {"operand_segment_sizes": [1, 0, 0]}, op.loc,
                       successors=[body, exit_block]))
    _insert_block_after(block, header)
    _insert_block_after(header, body)
    br = _new("cf.br", [lb], [], loc=op.loc, successors=[header])
    rw.insert_before(op, br)
    rw.replace(op, [br])


def _lower_if(op: Operation, rw: Rewriter) -> None:
    block = op.parent
    exit_block = _split_after(op)
    targets = []
    anchor = block
    for region in op.regions:
        if not region.blocks:
            targets.append(exit_block)
            continue
        b = region.blocks[0]
        region.blocks = []
        _strip_yield(b, rw)
        b.append(_new("cf.br", [], [], loc=op.loc, successors=[exit_block]))
        _insert_block_after(anchor, b)
        anchor = b
        targets.append(b)
    if len(targets) == 1:
        targets.append(exit_block)
    br = _new("cf.cond_br", [op.operands[0]], [], {"operand_segment_sizes": [1, 0, 0]}, op.loc,
              successors=targets)
    rw.insert_before(op, br)
    rw.replace(op, [br])


def convert_scf_to_cf(target: Operation, options, rw: Rewriter) -> None:
    for func in functions(target):
        if not func.regions or not func.regions[0].blocks:
            continue
        region = func.regions[0]
        while True:
            pending = next((o for b in region.blocks for o in b.ops if o.dialect == "scf"), None)
            if pending is None:
                break
            if pending.name == "scf.forall":
                _lower_forall(pending, rw)
            elif pending.name == "scf.for":
                _lower_for(pending, rw)
            elif pending.name == "scf.if":
                if pending.results:
                    raise PassFailure("scf.if with results is not supported", payload_loc=pending.loc)
                _lower_if(pending, rw)
            else:
                raise PassFailure(f"cannot lower '{pending.name}'", payload_loc=pending.loc)


# -- ② convert-arith-to-llvmlite --------------------------------------------

_ARITH_MAP = {
    "arith.addi": "llvmlite.add", "arith.subi": "llvmlite.sub", "arith.muli": "llvmlite.mul",
    "arith.cmpi": "llvmlite.icmp", "arith.addf": "llvmlite.fadd", "arith.mulf": "llvmlite.fmul",
    "arith.constant": "llvmlite.constant",
}


def _to_i64(v: Value, anchor: Operation, rw: Rewriter) -> Value:
    return cast(v, I64, anchor, rw) if v.type == INDEX else v


def convert_arith_to_llvmlite(target: Operation, options, rw: Rewriter) -> None:
    for op in list(target.walk()):
        if op.erased or op.dialect != "arith":
            continue
        if op.name == "arith.index_cast":
            c = _new(CAST, op.operands, [op.results[0].type], loc=op.loc)
            rw.insert_before(op, c)
            rw.replace(op, [c])
            continue
        new_name = _ARITH_MAP.get(op.name)
        if new_name is None:
            raise PassFailure(f"no llvmlite lowering for '{op.name}'", payload_loc=op.loc)
        rtype = op.results[0].type
        ops = [_to_i64(v, op, rw) for v in op.operands]
        new = _new(new_name, ops, [I64 if rtype == INDEX else rtype], dict(op.attributes), op.loc)
        rw.insert_before(op, new)
        if rtype == INDEX:
            back = _new(CAST, [new.result], [INDEX], loc=op.loc)
            rw.insert_before(op, back)
            rw.replace(op, [new, back], [back.result])
        else:
            rw.replace(op, [new])


# -- ③ convert-cf-to-llvmlite -----------------------------------------------

def _retype_block_args(block: Block, conv: Dict[object, object], rw: Rewriter) -> None:
    """Change block arg types per ``conv`` and cast them back at block entry."""
    first = block.ops[0] if block.ops else None
    for arg in block.args:
        new_t = conv.get(arg.type)
        if new_t is None:
            continue
        old_t = arg.type
        c = Operation(CAST, [], [old_t], loc=first.loc if first else None)
        arg.replace_all_uses_with(c.result)
        arg.type = new_t
        c.add_operand(arg)
        if first is None:
            block.append(c)
        else:
            block.insert_before(first, c)


def convert_cf_to_llvmlite(target: Operation, options, rw: Rewriter) -> None:
    conv = {INDEX: I64}
    for func in functions(target):
        if not func.regions or not func.regions[0].blocks:
            continue
        for block in func.regions[0].blocks[1:]:
            _retype_block_args(block, conv, rw)
    for op in list(target.walk()):
        if op.erased or op.dialect != "cf":
            continue
        if op.name == "cf.br":
            groups = [(op.operands, op.successors[0])]
        elif op.name == "cf.cond_br":
            seg = op.segment_sizes or [1, 0, 0]
            groups = [(op.operands[1:1 + seg[1]], op.successors[0]),
                      (op.operands[1 + seg[1]:], op.successors[1])]
        else:
            raise PassFailure(f"no llvmlite lowering for '{op.name}'", payload_loc=op.loc)
        operands = [] if op.name == "cf.br" else [op.operands[0]]
        for values, dest in groups:
            for v, a in zip(values, dest.args):
                operands.append(cast(v, a.type, op, rw) if v.type != a.type else v)
        new = _new("llvmlite." + op.name.split(".", 1)[1], operands, [], dict(op.attributes), op.loc,
                   successors=list(op.successors))
        rw.insert_before(op, new)
        rw.replace(op, [new])


# -- ④ convert-func-to-llvmlite ----------------------------------------------

def _llvm_type(t):
    if t == INDEX:
        return I64
    if isinstance(t, MemRefType):
        return PTR
    return t


def _conv_operands(op: Operation, rw: Rewriter) -> List[Value]:
    out = []
    for v in op.operands:
        lt = _llvm_type(v.type)
        out.append(cast(v, lt, op, rw) if lt != v.type else v)
    return out


def convert_func_to_llvmlite(target: Operation, options, rw: Rewriter) -> Optional[Operation]:
    new_root = None
    for func in [f for f in functions(target) if f.name == "func.func"]:
        for op in list(func.nested_ops()):
            if op.erased:
                continue
            if op.name == "func.return":
                new = _new("llvmlite.return", _conv_operands(op, rw), [], loc=op.loc)
                rw.insert_before(op, new)
                rw.replace(op, [new])
            elif op.name == "func.call":
                args = _conv_operands(op, rw)
                rtypes = [r.type for r in op.results]
                new = _new("llvmlite.call", args, [_llvm_type(t) for t in rtypes], dict(op.attributes), op.loc)
                rw.insert_before(op, new)
                ops, values = [new], []
                for r, t in zip(new.results, rtypes):
                    if r.type != t:
                        c = _new(CAST, [r], [t], loc=op.loc)
                        rw.insert_before(op, c)
                        ops.append(c)
                        values.append(c.result)
                    else:
                        values.append(r)
                rw.replace(op, ops, values)
        if func.regions and func.regions[0].blocks:
            entry = func.regions[0].blocks[0]
            conv = {a.type: _llvm_type(a.type) for a in entry.args if _llvm_type(a.type) != a.type}
            _retype_block_args(entry, conv, rw)
        new_func = Operation("llvmlite.func", [], [], dict(func.attributes), loc=func.loc)
        for region in func.regions:
            new_func.add_region(region)
        func.regions = []
        rw.insert_before(func, new_func)
        rw.replace(func, [new_func])
        if func is target:
            new_root = new_func
    return new_root


# -- ⑤ expand-strided-metadata -------------------------------------------

def _static_strides(t: MemRefType, op: Operation, what: str) -> List[int]:
    strides = t.layout_strides()
    if any(s is None for s in strides):
        raise PassFailure(f"{what} needs a memref with static strides, got {t}", payload_loc=op.loc)
    return list(strides)


def _linear_map(terms: List[Optional[int]], const: int) -> str:
    """``s0*c0 + s1*c1 + ... + const``; a None coefficient means a bare symbol."""
    parts = []
    for i, c in enumerate(terms):
        parts.append(f"s{i}" if c in (None, 1) else f"s{i} * {c}")
    if const or not parts:
        parts.append(str(const))
    return " + ".join(parts)


def expand_strided_metadata(target: Operation, options, rw: Rewriter) -> None:
    for op in list(target.walk()):
        if op.erased or op.name != "memref.subview":
            continue
        src = op.operands[0]
        st = src.type
        strides = _static_strides(st, op, "expand-strided-metadata")
        rank = st.rank
        res_t = op.results[0].type
        elem = st.element
        esm = _new("memref.extract_strided_metadata", [src],
                   [MemRefType((None,), elem)] + [INDEX] * (1 + 2 * rank), loc=op.loc)
        rw.insert_before(op, esm)
        new_ops = [esm]
        offs_dyn = iter(op.operand_group(1))
        sizes_dyn = list(op.operand_group(2))
        strides_dyn = iter(op.operand_group(3))
        a = op.attributes
        # offset: static parts fold into a constant, dynamic ones go through affine.apply
        const = 0
        syms: List[Value] = []
        coeffs: List[Optional[int]] = []
        for o, s in zip(a["static_offsets"], strides):
            if o == -1:
                syms.append(next(offs_dyn))
                coeffs.append(s)
            else:
                const += o * s
        off_operands: List[Value] = []
        static_off = [-1]
        if syms or st.offset is None:
            # the source offset comes from the metadata; this is where affine.apply appears
            ap = _new("affine.apply", [esm.results[1]] + syms, [INDEX],
                      {"map": _linear_map([None] + coeffs, const)}, op.loc)
            rw.insert_before(op, ap)
            new_ops.append(ap)
            off_operands = [ap.result]
        else:
            static_off = [st.offset + const]
        stride_operands: List[Value] = []
        static_strides = []
        for s_sub, s_src in zip(a["static_strides"], strides):
            if s_sub == -1:
                ap = _new("affine.apply", [next(strides_dyn)], [INDEX], {"map": _linear_map([s_src], 0)}, op.loc)
                rw.insert_before(op, ap)
                new_ops.append(ap)
                stride_operands.append(ap.result)
                static_strides.append(-1)
            else:
                static_strides.append(s_sub * s_src)
        rc = _new("memref.reinterpret_cast", [esm.results[0]] + off_operands + sizes_dyn + stride_operands, [res_t], {
            "operand_segment_sizes": [1, len(off_operands), len(sizes_dyn), len(stride_operands)],
            "static_offsets": static_off,
            "static_sizes": list(a["static_sizes"]),
            "static_strides": static_strides,
        }, op.loc)
        rw.insert_before(op, rc)
        new_ops.append(rc)
        rw.replace(op, new_ops, [rc.result])


# -- ⑥ finalize-memref-to-llvmlite -----------------------------------------

def _llc(value: int, anchor: Operation, rw: Rewriter, t=I64) -> Value:
    c = _new("llvmlite.constant", [], [t], {"value": value}, anchor.loc)
    rw.insert_before(anchor, c)
    return c.result


def _emit(anchor: Operation, rw: Rewriter, name: str, operands, types, attrs=None) -> Operation:
    new = _new(name, operands, types, attrs, anchor.loc)
    rw.insert_before(anchor, new)
    return new


def _element_ptr(m: Value, idx: List[Value], anchor: Operation, rw: Rewriter) -> Value:
    strides = _static_strides(m.type, anchor, "finalize-memref-to-llvmlite")
    p = cast(m, PTR, anchor, rw)
    lin: Optional[Value] = None
    for v, s in zip(idx, strides):
        x = cast(v, I64, anchor, rw)
        if s != 1:
            x = _emit(anchor, rw, "llvmlite.mul", [x, _llc(s, anchor, rw)], [I64]).result
        lin = x if lin is None else _emit(anchor, rw, "llvmlite.add", [lin, x], [I64]).result
    if lin is None:
        return p
    return _emit(anchor, rw, "llvmlite.gep", [p, lin], [PTR]).result


def _base_ptr(m: Value, anchor: Operation, rw: Rewriter):
    """Pointer to the buffer base and the offset of ``m`` within it."""
    p = cast(m, PTR, anchor, rw)
    off = m.type.offset
    if off is None:
        return p, _llc(0, anchor, rw)
    if off:
        p = _emit(anchor, rw, "llvmlite.gep", [p, _llc(-off, anchor, rw)], [PTR]).result
    return p, _llc(off, anchor, rw)


def finalize_memref_to_llvmlite(target: Operation, options, rw: Rewriter) -> None:
    for op in list(target.walk()):
        if op.erased or op.dialect != "memref":
            continue
        name = op.name
        if name == "memref.load":
            q = _element_ptr(op.operands[0], list(op.operands[1:]), op, rw)
            new = _emit(op, rw, "llvmlite.load", [q], [op.results[0].type])
            rw.replace(op, [new])
        elif name == "memref.store":
            q = _element_ptr(op.operands[1], list(op.operands[2:]), op, rw)
            new = _emit(op, rw, "llvmlite.store", [op.operands[0], q], [])
            rw.replace(op, [new])
        elif name == "memref.alloc":
            t = op.results[0].type
            n = t.num_elements()
            if n is None or op.operands:
                raise PassFailure("finalize-memref-to-llvmlite needs statically shaped allocations",
                                  payload_loc=op.loc)
            a = _emit(op, rw, "llvmlite.alloca", [], [PTR], {"size": n, "elem": str(t.element)})
            rw.replace(op, [a], [cast(a.result, t, op, rw)])
        elif name == "memref.extract_strided_metadata":
            m = op.operands[0]
            t = m.type
            if any(d is None for d in t.shape):
                raise PassFailure("finalize-memref-to-llvmlite needs static sizes", payload_loc=op.loc)
            strides = _static_strides(t, op, "finalize-memref-to-llvmlite")
            p, off = _base_ptr(m, op, rw)
            values = [cast(p, op.results[0].type, op, rw), cast(off, INDEX, op, rw)]
            for x in list(t.shape) + strides:
                values.append(cast(_llc(x, op, rw), INDEX, op, rw))
            rw.replace_with_values(op, values)
        elif name in ("memref.reinterpret_cast", "memref.subview"):
            m = op.operands[0]
            a = op.attributes
            if op.segment_sizes[2] or op.segment_sizes[3]:
                raise PassFailure(f"{name} with dynamic sizes or strides cannot be finalized",
                                  payload_loc=op.loc)
            if name == "memref.subview":
                if op.segment_sizes[1]:
                    raise PassFailure("memref.subview with dynamic offsets must be expanded first",
                                      payload_loc=op.loc)
                strides = _static_strides(m.type, op, "finalize-memref-to-llvmlite")
                p = cast(m, PTR, op, rw)
                off = _llc(sum(o * s for o, s in zip(a["static_offsets"], strides)), op, rw)
            else:
                p = cast(m, PTR, op, rw)
                dyn = op.operand_group(1)
                off = cast(dyn[0], I64, op, rw) if dyn else _llc(a["static_offsets"][0], op, rw)
            q = _emit(op, rw, "llvmlite.gep", [p, off], [PTR])
            rw.replace(op, [q], [cast(q.result, op.results[0].type, op, rw)])
        elif name == "memref.extract_aligned_pointer_as_index":
            p, _ = _base_ptr(op.operands[0], op, rw)
            i = _emit(op, rw, "llvmlite.ptrtoint", [p], [I64])
            rw.replace(op, [i], [cast(i.result, INDEX, op, rw)])
        else:
            raise PassFailure(f"no llvmlite lowering for '{name}'", payload_loc=op.loc)


# -- ⑦ reconcile-unrealized-casts ---------------------------------------------

def reconcile_unrealized_casts(target: Operation, options, rw: Rewriter) -> None:
    changed = True
    while changed:
        changed = False
        for op in list(target.walk()):
            if op.erased or op.name != CAST:
                continue
            src = op.operands[0]
            if not op.has_uses():
                rw.erase(op)
                changed = True
            elif src.type == op.results[0].type:
                rw.replace_with_values(op, [src])
                changed = True
            else:
                inner = src.defining_op
                if inner is not None and inner.name == CAST and inner.operands[0].type == op.results[0].type:
                    rw.replace_with_values(op, [inner.operands[0]])
                    changed = True
    for op in target.walk():
        if op.name == CAST:
            raise PassFailure(LEGALIZE_CAST_MSG, payload_loc=op.loc)


# -- lower-affine ------------------------------------------------------------

def _affine_expr(node, syms: List[Value], anchor: Operation, rw: Rewriter) -> Value:
    if isinstance(node, ast.Expression):
        return _affine_expr(node.body, syms, anchor, rw)
    if isinstance(node, ast.Name) and node.id[0] in "sd" and node.id[1:].isdigit():
        k = int(node.id[1:])
        if k >= len(syms):
            raise PassFailure(f"affine map refers to missing symbol {node.id}", payload_loc=anchor.loc)
        return syms[k]
    if isinstance(node, ast.Constant) and isinstance(node.value, int):
        return _emit(anchor, rw, "arith.constant", [], [INDEX], {"value": node.value}).result
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.USub):
        inner = _affine_expr(node.operand, syms, anchor, rw)
        zero = _emit(anchor, rw, "arith.constant", [], [INDEX], {"value": 0}).result
        return _emit(anchor, rw, "arith.subi", [zero, inner], [INDEX]).result
    if isinstance(node, ast.BinOp) and type(node.op) in (ast.Add, ast.Sub, ast.Mult):
        a = _affine_expr(node.left, syms, anchor, rw)
        b = _affine_expr(node.right, syms, anchor, rw)
        name = {ast.Add: "arith.addi", ast.Sub: "arith.subi", ast.Mult: "arith.muli"}[type(node.op)]
        return _emit(anchor, rw, name, [a, b], [INDEX]).result
    raise PassFailure("lower-affine supports only +, - and * in affine maps", payload_loc=anchor.loc)


def lower_affine(target: Operation, options, rw: Rewriter) -> None:
    for op in list(target.walk()):
        if op.erased or op.name != "affine.apply":
            continue
        text = op.attributes["map"]
        try:
            tree = ast.parse(text, mode="eval")
        except SyntaxError:
            raise PassFailure(f"lower-affine cannot parse map '{text}'", payload_loc=op.loc) from None
        v = _affine_expr(tree, list(op.operands), op, rw)
        rw.replace_with_values(op, [v])


# -- canonicalize / instrument-accumulate --------------------------------------

def canonicalize(target: Operation, options, rw: Rewriter) -> None:
    apply_patterns(target, CANONICAL, rw)


_ACCUMULATE_FAMILIES = {"arith.addi": "arith", "llvmlite.add": "llvmlite"}


def instrument_accumulate(target: Operation, options, rw: Rewriter) -> None:
    """After every op named by ``op=``, insert a dead accumulation ``op(r, r)``.

    The option must name the add op of the dialect the payload is currently
    in; naming the other level's op is reported as a failure.
    """
    name = options.get("op")
    if not name:
        raise PassFailure("instrument-accumulate requires the 'op' option")
    if name not in _ACCUMULATE_FAMILIES:
        raise PassFailure(f"instrument-accumulate cannot accumulate with '{name}'")
    ops = [o for o in target.walk() if o.name == name]
    if not ops:
        others = sorted({o.name for o in target.walk() if o.name in _ACCUMULATE_FAMILIES and o.name != name})
        if others:
            raise PassFailure(
                f"instrument-accumulate: op={name} does not match the payload's abstraction level "
                f"(found {', '.join(others)})")
    for o in ops:
        r = o.results[0]
        acc = Operation(name, [r, r], [r.type], loc=o.loc)
        rw.insert_after(o, acc)


# -- registry --------------------------------------------------------------

CONSTR_SET = (
    "memref.subview.constr", "memref.extract_strided_metadata.constr",
    "memref.extract_aligned_pointer_as_index.constr", "memref.reinterpret_cast.constr",
    "memref.load.constr", "memref.store.constr", "memref.alloc.constr",
)

LOWERING_PIPELINE = [
    "convert-scf-to-cf", "convert-arith-to-llvmlite", "convert-cf-to-llvmlite", "convert-func-to-llvmlite",
    "expand-strided-metadata", "finalize-memref-to-llvmlite", "reconcile-unrealized-casts",
]


def builtin_passes() -> List[Pass]:
    S = ConditionSignature.of
    return [
        Pass("convert-scf-to-cf", convert_scf_to_cf, S(
            ["scf.*"], ["cf.br", "cf.cond_br", "arith.addi", "arith.cmpi", "arith.index_cast", "arith.constant", CAST]),
            description="lower structured control flow to blocks and branches"),
        Pass("convert-arith-to-llvmlite", convert_arith_to_llvmlite, S(
            ["arith.*"], ["llvmlite.add", "llvmlite.sub", "llvmlite.mul", "llvmlite.icmp", "llvmlite.constant",
                          "llvmlite.fadd", "llvmlite.fmul", CAST])),
        Pass("convert-cf-to-llvmlite", convert_cf_to_llvmlite, S(
            ["cf.*"], ["llvmlite.br", "llvmlite.cond_br", CAST])),
        Pass("convert-func-to-llvmlite", convert_func_to_llvmlite, S(
            ["func.*"], ["llvmlite.func", "llvmlite.return", "llvmlite.call", CAST])),
        Pass("expand-strided-metadata", expand_strided_metadata, S(
            ["memref.*"], list(CONSTR_SET) + ["affine.apply"])),
        Pass("finalize-memref-to-llvmlite", finalize_memref_to_llvmlite, S(
            list(CONSTR_SET), ["llvmlite.gep", "llvmlite.load", "llvmlite.store", "llvmlite.alloca",
                               "llvmlite.ptrtoint", "llvmlite.constant", "llvmlite.mul", "llvmlite.add", CAST])),
        Pass("reconcile-unrealized-casts", reconcile_unrealized_casts, S([CAST], [])),
        Pass("lower-affine", lower_affine, S(["affine.*"], ["arith.addi", "arith.subi", "arith.muli", "arith.constant"])),
        Pass("canonicalize", canonicalize, neutral=True,
             description="greedy application of all canonical patterns"),
        Pass("instrument-accumulate", instrument_accumulate, options=("op",), neutral=True,
             description="insert dead accumulations after each add of the given op"),
    ]
