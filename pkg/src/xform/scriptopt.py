"""Transformations and analyses on transform scripts themselves.

All entry points take a :class:`Script` and return a new one (or a list of
diagnostics); the input script is never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from .payload.core import Operation, Value, erase_op, symbol_table
from .payload.diagnostics import Diagnostic
from .payload.types import TransformType
from .script import (
    ParamValue, Script, ScriptError, TransformRegistry, callee_of, include_cycles, operand_consumed,
    transform_registry, verify_script,
)


def _is_param(v: Value) -> bool:
    return isinstance(v.type, TransformType) and v.type.kind == "param"


def _line(loc) -> str:
    return f"line {loc[0]}" if loc else "an unknown line"


def _finish(module: Operation, text: str = "") -> Script:
    diags = verify_script(module)
    if diags:
        raise ScriptError(diags[0])
    return Script(module, text)


# -- inlining --------------------------------------------------------------

def inline_includes(script: Script) -> Script:
    """Replace every ``transform.include`` by the callee body."""
    cycles = include_cycles(script.module)
    if cycles:
        cyc = " -> ".join("@" + c for c in cycles[0])
        raise ScriptError(Diagnostic("error", f"recursive include cycle: {cyc}", None))
    module = script.module.clone()
    seqs = {k: v for k, v in symbol_table(module).items() if v.name == "transform.named_sequence"}
    while True:
        inc = next((o for o in module.walk() if o.name == "transform.include"), None)
        if inc is None:
            break
        _inline_one(inc, seqs[callee_of(inc)])
    return _finish(module)


def _inline_one(inc: Operation, callee: Operation) -> None:
    block = callee.body
    vmap: Dict[Value, Value] = dict(zip(block.args, inc.operands))
    yielded: List[Value] = []
    for op in block.ops:
        if op.name == "transform.yield":
            yielded = [vmap.get(v, v) for v in op.operands]
            continue
        inc.parent.insert_before(inc, op.clone(vmap))
    for r, y in zip(inc.results, yielded):
        r.replace_all_uses_with(y)
    erase_op(inc)


# -- simplification ----------------------------------------------------------

PARAM_ATTR = {
    "loop.split": "at", "loop.tile": "tile_sizes", "loop.unroll": "factor",
    "loop.interchange": "permutation", "transform.assert": "value",
}


def _static_param(op: Operation, index: int, attr: str) -> Optional[ParamValue]:
    if index < len(op.operands):
        d = op.operands[index].defining_op
        if d is not None and d.name == "param.constant" and "value" in d.attributes:
            return ParamValue.of(d.attributes["value"])
        return None
    if attr in op.attributes:
        return ParamValue.of(op.attributes[attr])
    return None


def _forward(op: Operation) -> None:
    """Swap a consuming no-op for a marker that still consumes its operand."""
    fwd = Operation("transform.forward", [op.operands[0]], [r.type for r in op.results], loc=op.loc,
                    result_hints=[r.hint for r in op.results])
    op.parent.insert_before(op, fwd)
    for old, new in zip(op.results, fwd.results):
        old.replace_all_uses_with(new)
    erase_op(op)


def _ints(p: Optional[ParamValue]) -> Optional[List[int]]:
    if p is None or p.kind != "int_list":
        return None
    return list(p.value)


def _redundant_retile(op: Operation) -> bool:
    """tile(S2) on the point loops of tile(S1) where every loop it would touch
    already has fewer iterations than its new size (or size 0)."""
    src = op.operands[0]
    prev = src.defining_op
    if prev is None or prev.name != "loop.tile" or src.index != 1:
        return False
    s1 = _ints(_static_param(prev, 1, "tile_sizes"))
    s2 = _ints(_static_param(op, 1, "tile_sizes"))
    if s1 is None or s2 is None or not any(s1):
        return False
    first = next(i for i, s in enumerate(s1) if s)
    if len(s2) > len(s1) - first:
        return False
    for k, s in enumerate(s2):
        trips = s1[first + k]
        if s and not (trips and s > trips):
            return False
    return True


def _simplify_once(module: Operation) -> bool:
    for op in list(module.walk()):
        if op.erased:
            continue
        if op.name == "param.constant" and not op.results[0].users:
            erase_op(op)
            return True
        if op.name == "loop.unroll":
            f = _ints(_static_param(op, 1, "factor"))
            if f == [1]:
                _forward(op)
                return True
        if op.name == "loop.tile":
            sizes = _ints(_static_param(op, 1, "tile_sizes"))
            if sizes is not None and not any(sizes):
                _forward(op)
                return True
            if _redundant_retile(op):
                _forward(op)
                return True
        attr = PARAM_ATTR.get(op.name)
        index = 0 if op.name == "transform.assert" else 1
        if attr and index < len(op.operands) and _is_param(op.operands[index]):
            p = _static_param(op, index, attr)
            if p is not None and p.kind == "int_list":
                vals = list(p.value)
                op.attributes[attr] = vals if op.name in ("loop.tile", "loop.interchange") or len(vals) != 1 \
                    else vals[0]
                used = op.operands[index]
                op.operands[index].users.remove(op)
                del op.operands[index]
                if not used.users:
                    erase_op(used.defining_op)
                return True
    return False


def simplify_script(script: Script) -> Script:
    """Remove no-op transforms (keeping their consume effect), fold constant
    parameters into attributes and drop unused constants, to a fixpoint."""
    module = script.module.clone()
    while _simplify_once(module):
        pass
    return _finish(module)


# -- use-after-invalidation analysis ---------------------------------------------

Lineage = Tuple[Tuple[int, int], ...]  # (op id, result index) from the entry argument down


@dataclass
class _Freed:
    by: str
    loc: Optional[Tuple[int, int]]


def _may_alias(freed: Value, other: Value, lineage: Dict[Value, Lineage], enclosing: Dict[Value, bool]) -> bool:
    """May ``other`` hold an op inside the payload of ``freed``?"""
    if freed is other:
        return True
    a, b = lineage.get(freed), lineage.get(other)
    if a is None or b is None:
        return True
    n = 0
    while n < len(a) and n < len(b) and a[n] == b[n]:
        n += 1
    if n == len(a) == len(b):
        return True
    if n == len(a):
        return True  # other was derived from freed
    if n == len(b):
        # other encloses freed; it can only hold freed's ops if it may hold nested ops
        return enclosing.get(other, True)
    (op_a, ia), (op_b, ib) = a[n], b[n]
    if op_a == op_b and ia != ib:
        return False  # distinct results of one transform hold disjoint ops
    return True


def analyze_invalidation(script: Script, registry: Optional[TransformRegistry] = None) -> List[Diagnostic]:
    """Static use-after-free over handles: definitions allocate, consumed
    operands free, match results alias (possibly nested) their operand."""
    registry = registry or transform_registry()
    if any(o.name == "transform.include" for o in script.module.walk()) and not include_cycles(script.module):
        script = inline_includes(script)
    diags: List[Diagnostic] = []
    for seq in script.sequences.values():
        lineage: Dict[Value, Lineage] = {}
        enclosing: Dict[Value, bool] = {}
        for a in seq.body.args:
            lineage[a] = ()
            enclosing[a] = False
        _analyze_block(seq.body, {}, lineage, enclosing, registry, diags)
    diags.sort(key=lambda d: d.loc or (0, 0))
    return diags


def _analyze_block(block, freed: Dict[Value, _Freed], lineage, enclosing, registry, diags) -> Dict[Value, _Freed]:
    for op in block.ops:
        for v in op.operands:
            if v in freed:
                f = freed[v]
                diags.append(Diagnostic(
                    "error",
                    f"use of invalidated handle %{v.hint or '?'} by '{op.name}'; it was invalidated by "
                    f"'{f.by}' at {_line(f.loc)}", op.loc))
        handles = [v for v in op.operands if not _is_param(v)]
        base = lineage.get(handles[0], ()) if handles else ()
        if op.name in ("transform.alternatives", "transform.sequence"):
            outs = []
            for region in op.regions:
                for b in region.blocks:
                    for a in b.args:
                        lineage[a] = base
                        enclosing[a] = enclosing.get(handles[0], True) if handles else True
                    outs.append(_analyze_block(b, dict(freed), lineage, enclosing, registry, diags))
            for o in outs:
                freed.update(o)
        else:
            for i, v in enumerate(op.operands):
                if _is_param(v) or not operand_consumed(op, i, registry):
                    continue
                info = _Freed(op.name, op.loc)
                for h in list(lineage):
                    if h not in freed and not _is_param(h) and _may_alias(v, h, lineage, enclosing):
                        freed[h] = info
        # results are allocated after the operands are freed
        for i, r in enumerate(op.results):
            lineage[r] = base + ((op.id, i),)
            enclosing[r] = not (op.name == "structured.match" and op.attributes.get("outermost"))
            freed.pop(r, None)
    return freed


# -- pass-option inference ----------------------------------------------------

INSTRUMENT = "instrument-accumulate"
LEVEL_OP = {"arith": "arith.addi", "llvmlite": "llvmlite.add"}
LOWERS_ARITH = "convert-arith-to-llvmlite"


def infer_pass_options(script: Script) -> Script:
    """Give every unconfigured instrument-accumulate the ``op=`` option
    matching the abstraction level at its position."""
    from .passes.registry import format_options, parse_options

    if any(o.name == "transform.include" for o in script.module.walk()):
        script = inline_includes(script)
    module = script.module.clone()

    def walk(block, level: str) -> str:
        for op in block.ops:
            if op.name == "transform.alternatives" or op.name == "transform.sequence":
                ends = [walk(b, level) for r in op.regions for b in r.blocks] or [level]
                level = ends[0] if all(e == ends[0] for e in ends) else "ambiguous"
                continue
            if op.name != "transform.apply_registered_pass":
                continue
            name = op.attributes.get("pass")
            if name == LOWERS_ARITH:
                level = "llvmlite"
            elif name == INSTRUMENT:
                opts = parse_options(str(op.attributes.get("options", "")))
                if "op" in opts:
                    continue
                if level == "ambiguous":
                    raise ScriptError(Diagnostic(
                        "error", "cannot infer 'op' for instrument-accumulate: the abstraction level differs "
                                 "between alternatives regions", op.loc))
                opts["op"] = LEVEL_OP[level]
                op.attributes["options"] = format_options(opts)
        return level

    for seq in [o for o in module.walk() if o.name == "transform.named_sequence"]:
        walk(seq.body, "arith")
    return _finish(module)
