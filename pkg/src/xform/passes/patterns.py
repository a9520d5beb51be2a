"""Named rewrite patterns and the greedy fixpoint driver.

Each pattern documents the measure it strictly decreases, which is what
makes the driver terminate. ``regress_hoist_blocker`` is the exception: it
sinks loop-invariant code back into loops and exists to give the bisector a
cost regression to find.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence

from ..dialects import default_registry
from ..errors import DefiniteFailure
from ..payload.core import Operation, Value
from ..payload.rewriter import Rewriter
from ..payload.types import I1, MemRefType

REWRITE_CAP = 10 ** 5

_INT_CONSTS = ("arith.constant", "llvmlite.constant")
_CASTS = ("builtin.unrealized_conversion_cast", "arith.index_cast")


@dataclass(frozen=True)
class Pattern:
    name: str
    roots: tuple  # op names the pattern may fire on
    rewrite: Callable[[Operation, Rewriter], bool]
    measure: str = ""


def _int_value(v: Value) -> Optional[int]:
    op = v.defining_op
    if op is None or op.name not in _INT_CONSTS:
        return None
    c = op.attributes.get("value")
    if isinstance(c, int) and not isinstance(c, bool):
        return c
    return None


def _const_like(template: Operation, value, type) -> Operation:
    name = "llvmlite.constant" if template.dialect == "llvmlite" else "arith.constant"
    return Operation(name, [], [type], {"value": value}, loc=template.loc)


def _identity_operand(op: Operation, neutral: int) -> Optional[Value]:
    lhs, rhs = op.operands
    if _int_value(rhs) == neutral:
        return lhs
    if _int_value(lhs) == neutral:
        return rhs
    return None


def add_of_zero(op: Operation, rw: Rewriter) -> bool:
    keep = _identity_operand(op, 0)
    if keep is None:
        return False
    rw.replace_with_values(op, [keep])
    return True


def mul_of_one(op: Operation, rw: Rewriter) -> bool:
    keep = _identity_operand(op, 1)
    if keep is None:
        return False
    rw.replace_with_values(op, [keep])
    return True


_FOLDERS = {
    "arith.addi": lambda a, b: a + b, "llvmlite.add": lambda a, b: a + b,
    "arith.subi": lambda a, b: a - b, "llvmlite.sub": lambda a, b: a - b,
    "arith.muli": lambda a, b: a * b, "llvmlite.mul": lambda a, b: a * b,
}


def fold_constant_arith(op: Operation, rw: Rewriter) -> bool:
    a, b = (_int_value(v) for v in op.operands)
    if a is None or b is None:
        return False
    value = _FOLDERS[op.name](a, b)
    # reuse an operand that already holds the result so the outcome does not
    # depend on whether add_of_zero / mul_of_one fired first
    for v in op.operands:
        if _int_value(v) == value and v.type == op.results[0].type:
            rw.replace_with_values(op, [v])
            return True
    c = _const_like(op, value, op.results[0].type)
    rw.insert_before(op, c)
    rw.replace(op, [c])
    return True


_PREDICATES = {
    "eq": lambda a, b: a == b, "ne": lambda a, b: a != b,
    "slt": lambda a, b: a < b, "sle": lambda a, b: a <= b,
    "sgt": lambda a, b: a > b, "sge": lambda a, b: a >= b,
}


def cmpi_const_fold(op: Operation, rw: Rewriter) -> bool:
    a, b = (_int_value(v) for v in op.operands)
    pred = _PREDICATES.get(op.attributes.get("predicate"))
    if a is None or b is None or pred is None:
        return False
    c = _const_like(op, int(pred(a, b)), I1)
    rw.insert_before(op, c)
    rw.replace(op, [c])
    return True


def cast_of_cast_cancel(op: Operation, rw: Rewriter) -> bool:
    src = op.operands[0]
    if src.type == op.results[0].type:
        rw.replace_with_values(op, [src])
        return True
    inner = src.defining_op
    if inner is None or inner.name != op.name:
        return False
    orig = inner.operands[0]
    if orig.type != op.results[0].type:
        return False
    rw.replace_with_values(op, [orig])
    return True


def subview_identity_fold(op: Operation, rw: Rewriter) -> bool:
    seg = op.segment_sizes
    if seg is None or any(seg[1:]):
        return False
    src = op.operands[0]
    st = src.type
    if not isinstance(st, MemRefType) or op.results[0].type != st:
        return False
    a = op.attributes
    if any(o != 0 for o in a.get("static_offsets", [])) or any(s != 1 for s in a.get("static_strides", [])):
        return False
    if list(a.get("static_sizes", [])) != list(st.shape):
        return False
    rw.replace_with_values(op, [src])
    return True


def erase_dead_pure(op: Operation, rw: Rewriter) -> bool:
    if op.regions or op.has_uses() or not op.results:
        return False
    if not default_registry().has_trait(op.name, "pure"):
        return False
    rw.erase(op)
    return True


def regress_hoist_blocker(op: Operation, rw: Rewriter) -> bool:
    """Sink a pure op into the loop that holds all of its uses."""
    if op.regions or not op.results or not default_registry().has_trait(op.name, "pure"):
        return False
    block = op.parent
    if block is None:
        return False
    users = [u for r in op.results for u in r.users]
    if not users:
        return False
    for loop in block.ops[block.index_of(op) + 1:]:
        if loop.name != "scf.for" or not loop.regions[0].blocks:
            continue
        if all(u is not loop and loop.is_ancestor_of(u) for u in users):
            body = loop.body
            block.detach(op)
            body.insert(0, op)
            return True
    return False


_ARITH_INT = ("arith.addi", "llvmlite.add")
_ARITH_MUL = ("arith.muli", "llvmlite.mul")
_ANY = ()

PATTERNS: Dict[str, Pattern] = {p.name: p for p in [
    Pattern("add_of_zero", _ARITH_INT, add_of_zero, "number of ops"),
    Pattern("mul_of_one", _ARITH_MUL, mul_of_one, "number of ops"),
    Pattern("fold_constant_arith", tuple(_FOLDERS), fold_constant_arith, "number of non-constant ops"),
    Pattern("cast_of_cast_cancel", _CASTS, cast_of_cast_cancel, "number of cast ops"),
    Pattern("subview_identity_fold", ("memref.subview",), subview_identity_fold, "number of ops"),
    Pattern("cmpi_const_fold", ("arith.cmpi", "llvmlite.icmp"), cmpi_const_fold, "number of non-constant ops"),
    Pattern("erase_dead_pure", _ANY, erase_dead_pure, "number of ops"),
    Pattern("regress_hoist_blocker", _ANY, regress_hoist_blocker, "none (regresses cost on purpose)"),
]}

CANONICAL = [n for n in PATTERNS if n != "regress_hoist_blocker"]


def get_patterns(names: Sequence[str]) -> List[Pattern]:
    out = []
    for n in names:
        p = PATTERNS.get(n)
        if p is None:
            raise DefiniteFailure(f"unknown pattern '{n}'")
        out.append(p)
    return out


def apply_patterns(target: Operation, names: Sequence[str], rw: Optional[Rewriter] = None,
                   cap: int = REWRITE_CAP) -> int:
    """Apply the named patterns greedily inside ``target`` until none fires.

    Returns the number of rewrites; exceeding ``cap`` is a definite failure.
    """
    patterns = get_patterns(names)
    rw = rw or Rewriter()
    count = 0
    changed = True
    while changed:
        changed = False
        for op in list(target.walk()):
            if op is target or op.erased:
                continue
            for p in patterns:
                if p.roots and op.name not in p.roots:
                    continue
                if p.rewrite(op, rw):
                    count += 1
                    changed = True
                    if count > cap:
                        raise DefiniteFailure(f"pattern application did not converge within {cap} rewrites")
                    break
    return count
