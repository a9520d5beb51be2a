"""Loop transformations on ``scf.for`` nests.

All structural edits go through a :class:`Rewriter` so that handle
bookkeeping sees replace/erase events. Failures of preconditions raise
:class:`SilenceableFailure` before the payload is modified.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from ..dialects import default_registry
from ..errors import SilenceableFailure
from ..payload.core import Block, Operation, Region, Value
from ..payload.rewriter import Rewriter
from ..payload.types import INDEX, MemRefType


# -- small helpers ----------------------------------------------------------

def const_int(v: Value) -> Optional[int]:
    op = v.defining_op
    if op is not None and op.name in ("arith.constant", "llvmlite.constant"):
        c = op.attributes.get("value")
        if isinstance(c, int) and not isinstance(c, bool):
            return c
    return None


def make_const(value, type=INDEX, hint: Optional[str] = None) -> Operation:
    if hint is None and isinstance(value, int):
        hint = f"c{value}" if value >= 0 else f"cm{-value}"
    return Operation("arith.constant", [], [type], {"value": value}, result_hints=[hint])


def defined_inside(v: Value, op: Operation) -> bool:
    owner = v.defining_op
    if owner is None:
        owner = v.owner.parent_op
    return owner is not None and op.is_ancestor_of(owner)


def is_loop(op: Operation) -> bool:
    return op.name == "scf.for"


def body_ops(loop: Operation) -> List[Operation]:
    """Body ops without the trailing ``scf.yield``."""
    ops = loop.body.ops
    return ops[:-1] if ops and ops[-1].name == "scf.yield" else list(ops)


def static_bounds(loop: Operation) -> Optional[Tuple[int, int, int]]:
    lb, ub, st = (const_int(v) for v in loop.operands)
    if lb is None or ub is None or st is None or st <= 0:
        return None
    return lb, ub, st


def trip_count(loop: Operation) -> Optional[int]:
    b = static_bounds(loop)
    if b is None:
        return None
    lb, ub, st = b
    return len(range(lb, ub, st))


def _require_for(loop: Operation, what: str) -> Tuple[int, int, int]:
    if not is_loop(loop):
        raise SilenceableFailure(f"{what} expects an scf.for, got {loop.name}", payload_loc=loop.loc)
    b = static_bounds(loop)
    if b is None:
        raise SilenceableFailure(f"{what} needs static loop bounds", payload_loc=loop.loc)
    return b


def nest_plan(root: Operation, depth: int) -> Tuple[List[Operation], list]:
    """The first ``depth`` loops of a perfect nest rooted at ``root``, plus the
    index arithmetic that must sink into inner bodies to make it perfect."""
    nest, sinks = [root], []
    while len(nest) < depth:
        ops = body_ops(nest[-1])
        if len(ops) > 1 and is_loop(ops[-1]) and _sinkable(ops[:-1], ops[-1]):
            sinks.append((ops[:-1], ops[-1]))
            ops = ops[-1:]
        if len(ops) != 1 or not is_loop(ops[0]):
            raise SilenceableFailure(
                f"expected a perfect loop nest of depth {depth}, found depth {len(nest)}", payload_loc=root.loc)
        nest.append(ops[0])
    return nest, sinks


def sink_all(sinks) -> None:
    for ops, loop in sinks:
        for o in reversed(ops):
            o.parent.detach(o)
            loop.body.insert(0, o)


def perfect_nest(root: Operation, depth: int) -> List[Operation]:
    nest, sinks = nest_plan(root, depth)
    sink_all(sinks)
    return nest


SINKABLE = ("arith.constant", "arith.addi", "arith.subi", "arith.muli", "arith.index_cast")


def _sinkable(ops: List[Operation], loop: Operation) -> bool:
    """Pure index arithmetic between two loops (as earlier tiling leaves
    behind) can move into the inner body when the inner bounds don't use it."""
    if not all(o.name in SINKABLE for o in ops):
        return False
    results = {r for o in ops for r in o.results}
    return not any(v in results for v in loop.operands)


def new_for(lb: Value, ub: Value, step: Value, hint: Optional[str] = None, loc=None) -> Operation:
    block = Block([INDEX], [hint])
    return Operation("scf.for", [lb, ub, step], [], {}, regions=[Region([block])], loc=loc)


def _move_body(src: Operation, dst_block: Block) -> None:
    for op in body_ops(src):
        src.body.detach(op)
        dst_block.append(op)


# -- hoisting ---------------------------------------------------------------

def hoist_invariants(loop: Operation, rw: Rewriter) -> List[Operation]:
    """Move pure, region-free ops whose operands are defined outside ``loop``
    to just before it, to a fixpoint. Returns the moved ops in order."""
    if not is_loop(loop) or len(loop.regions[0].blocks) != 1:
        raise SilenceableFailure("hoist_invariants expects an scf.for with a single-block body",
                                 payload_loc=loop.loc)
    reg = default_registry()
    moved: List[Operation] = []
    changed = True
    while changed:
        changed = False
        for op in list(loop.nested_ops()):
            if op.erased or op.regions or not reg.has_trait(op.name, "pure"):
                continue
            if any(defined_inside(v, loop) for v in op.operands):
                continue
            rw.move_before(op, loop)
            moved.append(op)
            changed = True
    return moved


# -- splitting --------------------------------------------------------------

def split(loop: Operation, at: int, rw: Rewriter) -> Tuple[Operation, Operation]:
    lb, ub, st = _require_for(loop, "loop.split")
    if not lb <= at <= ub:
        raise SilenceableFailure(f"split point {at} outside [{lb}, {ub}]", payload_loc=loop.loc)
    if (at - lb) % st:
        raise SilenceableFailure(f"split point {at} is not aligned to step {st} from {lb}", payload_loc=loop.loc)
    c = make_const(at)
    rw.insert_before(loop, c)
    first = loop.clone()
    second = loop.clone()
    first.set_operands([loop.operands[0], c.result, loop.operands[2]])
    second.set_operands([c.result, loop.operands[1], loop.operands[2]])
    rw.insert_before(loop, first)
    rw.insert_before(loop, second)
    rw.replace(loop, [first, second])
    return first, second


# -- tiling -----------------------------------------------------------------

def tile(root: Operation, sizes: Sequence[int], rw: Rewriter) -> Tuple[List[Operation], List[Operation]]:
    """Strip-mine the first ``len(sizes)`` loops of a perfect nest and move all
    tile loops outside all point loops.

    A size of 0, or larger than the loop's trip count, leaves that loop alone.
    Returns (tile loops, point loops); when nothing is tiled, ([root], []).
    """
    sizes = list(sizes)
    if any(s < 0 for s in sizes):
        raise SilenceableFailure(f"negative tile size in {sizes}", payload_loc=root.loc)
    if not sizes:
        return [root], []
    nest, sinks = nest_plan(root, len(sizes))
    bounds = [_require_for(l, "loop.tile") for l in nest]
    for l in nest[1:]:
        if any(defined_inside(v, nest[0]) for v in l.operands):
            raise SilenceableFailure("loop.tile needs a rectangular nest", payload_loc=l.loc)
    tiled = []
    for k, (s, (lb, ub, st)) in enumerate(zip(sizes, bounds)):
        trips = len(range(lb, ub, st))
        if s == 0 or s > trips:
            continue
        if trips % s:
            raise SilenceableFailure(
                f"tile size {s} does not divide trip count {trips} of loop #{k}", payload_loc=nest[k].loc)
        tiled.append(k)
    if not tiled:
        return [root], []
    sink_all(sinks)

    consts: Dict[int, Value] = {}

    def const(v: int) -> Value:
        if v not in consts:
            c = make_const(v)
            rw.insert_before(root, c)
            consts[v] = c.result
        return consts[v]

    outers, inners, chain = [], [], []
    iv_map: Dict[Value, Tuple[str, Value, Optional[Value]]] = {}
    for k in tiled:
        lb, ub, st = bounds[k]
        o = new_for(nest[k].operands[0], nest[k].operands[1], const(sizes[k] * st),
                    hint=f"{nest[k].body.args[0].hint or 'i'}_o", loc=nest[k].loc)
        outers.append(o)
        chain.append(o)
    for k, l in enumerate(nest):
        old_iv = l.body.args[0]
        if k in tiled:
            st = bounds[k][2]
            inner = new_for(const(0), const(sizes[k] * st), l.operands[2], hint=f"{old_iv.hint or 'i'}_i", loc=l.loc)
            inners.append(inner)
            chain.append(inner)
        else:
            inner = new_for(*l.operands, hint=old_iv.hint, loc=l.loc)
            chain.append(inner)
    for parent, child in zip(chain, chain[1:]):
        parent.body.append(child)
    innermost = chain[-1].body
    # point index = tile iv + intra-tile iv, materialized at the innermost body start
    o_iter = iter(outers)
    for k, l in enumerate(nest):
        old_iv = l.body.args[0]
        loop_k = chain[len(outers) + k]
        if k in tiled:
            outer_iv = next(o_iter).body.args[0]
            add = Operation("arith.addi", [outer_iv, loop_k.body.args[0]], [INDEX], result_hints=[old_iv.hint])
            innermost.append(add)
            old_iv.replace_all_uses_with(add.result)
        else:
            old_iv.replace_all_uses_with(loop_k.body.args[0])
    _move_body(nest[-1], innermost)
    rw.insert_before(root, chain[0])
    rw.replace(root, [chain[0]])
    return outers, inners


# -- unrolling --------------------------------------------------------------

def unroll(loop: Operation, factor: int, rw: Rewriter) -> Optional[Operation]:
    """Unroll by ``factor`` (0 = fully). Returns the surviving loop, if any."""
    lb, ub, st = _require_for(loop, "loop.unroll")
    n = len(range(lb, ub, st))
    if factor < 0:
        raise SilenceableFailure(f"negative unroll factor {factor}", payload_loc=loop.loc)
    if factor == 1:
        return loop
    iv = loop.body.args[0]
    if factor == 0 or factor == n:
        new_ops: List[Operation] = []
        for t in range(n):
            c = make_const(lb + t * st)
            rw.insert_before(loop, c)
            new_ops.append(c)
            vmap = {iv: c.result}
            for op in body_ops(loop):
                copy = op.clone(vmap)
                rw.insert_before(loop, copy)
                new_ops.append(copy)
        if new_ops:
            rw.replace(loop, new_ops, [])
        else:
            rw.erase(loop)
        return None
    if n % factor:
        raise SilenceableFailure(f"unroll factor {factor} does not divide trip count {n}", payload_loc=loop.loc)
    step = make_const(st * factor)
    rw.insert_before(loop, step)
    new = new_for(loop.operands[0], loop.operands[1], step.result, hint=iv.hint, loc=loop.loc)
    new.attributes.update(loop.attributes)
    body = new.body
    new_iv = body.args[0]
    for u in range(factor):
        if u == 0:
            vmap = {iv: new_iv}
        else:
            off = make_const(u * st)
            add = Operation("arith.addi", [new_iv, off.result], [INDEX], result_hints=[iv.hint])
            body.append(off)
            body.append(add)
            vmap = {iv: add.result}
        for op in body_ops(loop):
            body.append(op.clone(vmap))
    rw.insert_before(loop, new)
    rw.replace(loop, [new])
    return new


# -- interchange ------------------------------------------------------------

def interchange(root: Operation, perm: Sequence[int], rw: Rewriter) -> Operation:
    perm = list(perm)
    if sorted(perm) != list(range(len(perm))):
        raise SilenceableFailure(f"{perm} is not a permutation", payload_loc=root.loc)
    nest = perfect_nest(root, len(perm))
    for l in nest:
        if not is_loop(l):
            raise SilenceableFailure("interchange expects scf.for loops", payload_loc=l.loc)
    for l in nest[1:]:
        if any(defined_inside(v, nest[0]) for v in l.operands):
            raise SilenceableFailure("loop.interchange needs a rectangular nest", payload_loc=l.loc)
    chain = []
    for p in perm:
        src = nest[p]
        new = new_for(*src.operands, hint=src.body.args[0].hint, loc=src.loc)
        new.attributes.update(src.attributes)
        src.body.args[0].replace_all_uses_with(new.body.args[0])
        chain.append(new)
    for parent, child in zip(chain, chain[1:]):
        parent.body.append(child)
    _move_body(nest[-1], chain[-1].body)
    rw.insert_before(root, chain[0])
    rw.replace(root, [chain[0]])
    return chain[0]


# -- vectorization marker -----------------------------------------------------

def vectorize_marker(loop: Operation) -> None:
    _require_for(loop, "loop.vectorize_marker")
    reg = default_registry()
    if any(reg.has_trait(op.name, "loop_like") for op in loop.nested_ops()):
        raise SilenceableFailure("vectorize_marker expects an innermost loop", payload_loc=loop.loc)
    loop.attributes["vectorized"] = True


# -- library call replacement -----------------------------------------------

@dataclass(frozen=True)
class KernelDef:
    name: str
    m: int
    n: int
    k: int
    alpha: Optional[float] = None
    element: str = "f64"

    def __post_init__(self):
        if min(self.m, self.n, self.k) < 1:
            raise ValueError(f"kernel {self.name}: sizes must be >= 1")


def parse_kernel_registry(text: str) -> List[KernelDef]:
    """Lines ``kernel <name> M N K [alpha]``; ``#`` and ``//`` start comments."""
    out = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].split("//", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] != "kernel" or len(parts) not in (5, 6):
            raise ValueError(f"line {lineno}: expected 'kernel <name> M N K [alpha]'")
        alpha = float(parts[5]) if len(parts) == 6 else None
        out.append(KernelDef(parts[1], int(parts[2]), int(parts[3]), int(parts[4]), alpha))
    return out


def _index_role(v: Value, ivs: Dict[Value, str], nest_root: Operation) -> Optional[Tuple[str, Optional[Value]]]:
    """Classify an index as ``iv`` or ``base + iv`` with base defined outside the nest."""
    if v in ivs:
        return ivs[v], None
    op = v.defining_op
    if op is not None and op.name == "arith.addi":
        a, b = op.operands
        if a in ivs and not defined_inside(b, nest_root):
            return ivs[a], b
        if b in ivs and not defined_inside(a, nest_root):
            return ivs[b], a
    return None


def match_matmul(root: Operation) -> Optional[dict]:
    """Recognize ``C[.., i, j] += A[.., i, k] * B[.., k, j]`` as a depth-3 nest,
    or depth 4 with an outer batch loop. Returns the pieces or None."""
    for depth in (4, 3):
        nest, index_ops = _index_nest(root, depth)
        if nest is None:
            continue
        inner_ops = body_ops(nest[-1])
        if any(is_loop(o) or o.regions for o in inner_ops):
            continue
        inner_ops = index_ops + inner_ops
        bounds = [static_bounds(l) for l in nest]
        if any(b is None or b[2] != 1 for b in bounds):
            continue
        if any(defined_inside(v, root) for l in nest for v in l.operands):
            continue
        names = ["b", "i", "j", "k"][4 - depth:]
        ivs = {l.body.args[0]: n for l, n in zip(nest, names)}
        res = _match_body(inner_ops, ivs, root, depth == 4)
        if res is None:
            continue
        res["nest"] = nest
        res["bounds"] = dict(zip(names, bounds))
        return res
    return None


def _index_nest(root: Operation, depth: int):
    """Like a perfect nest, but each level may also hold index additions
    (tiling leaves ``outer + inner`` ops between point loops)."""
    nest, extra = [root], []
    while len(nest) < depth:
        ops = body_ops(nest[-1])
        loops_here = [o for o in ops if is_loop(o)]
        rest = [o for o in ops if not is_loop(o)]
        if len(loops_here) != 1 or ops[-1] is not loops_here[0] or any(o.name != "arith.addi" for o in rest):
            return None, []
        extra.extend(rest)
        nest.append(loops_here[0])
    return nest, extra


def _match_body(ops: List[Operation], ivs: Dict[Value, str], root: Operation, batched: bool) -> Optional[dict]:
    loads = [o for o in ops if o.name == "memref.load"]
    stores = [o for o in ops if o.name == "memref.store"]
    muls = [o for o in ops if o.name == "arith.mulf"]
    adds = [o for o in ops if o.name == "arith.addf"]
    extra = [o for o in ops if o.name not in ("memref.load", "memref.store", "arith.mulf", "arith.addf")]
    if len(loads) != 3 or len(stores) != 1 or len(muls) != 1 or len(adds) != 1:
        return None
    if any(o.name != "arith.addi" for o in extra):
        return None
    st = stores[0]
    add, mul = adds[0], muls[0]
    if st.operands[0] is not add.result:
        return None
    c_mem = st.operands[1]
    c_idx = st.operands[2:]
    add_in = list(add.operands)
    if mul.result not in add_in:
        return None
    c_load = add_in[1] if add_in[0] is mul.result else add_in[0]
    c_op = c_load.defining_op
    if c_op is None or c_op not in loads or c_op.operands[0] is not c_mem or list(c_op.operands[1:]) != list(c_idx):
        return None
    ab = [v.defining_op for v in mul.operands]
    if any(o is None or o not in loads or o is c_op for o in ab) or ab[0] is ab[1]:
        return None
    rank = c_mem.type.rank if isinstance(c_mem.type, MemRefType) else 0
    if rank < 2:
        return None

    def roles(op_idx: Sequence[Value]):
        lead, tail = list(op_idx[:-2]), list(op_idx[-2:])
        rs = [_index_role(v, ivs, root) for v in tail]
        if any(r is None for r in rs):
            return None
        return lead, rs

    c_roles = roles(c_idx)
    if c_roles is None:
        return None
    c_lead, ((ci, ci_base), (cj, cj_base)) = c_roles
    if (ci, cj) != ("i", "j"):
        return None
    a_op = b_op = None
    for o in ab:
        r = roles(o.operands[1:])
        if r is None:
            return None
        _, ((r0, _), (r1, _)) = r
        if (r0, r1) == ("i", "k"):
            a_op = o
        elif (r0, r1) == ("k", "j"):
            b_op = o
    if a_op is None or b_op is None:
        return None
    a_lead, ((_, ai_base), (_, ak_base)) = roles(a_op.operands[1:])
    b_lead, ((_, bk_base), (_, bj_base)) = roles(b_op.operands[1:])
    if ai_base is not ci_base or bj_base is not cj_base or ak_base is not bk_base:
        return None
    if not (len(a_lead) == len(b_lead) == len(c_lead)):
        return None
    for x, y, z in zip(a_lead, b_lead, c_lead):
        if not (x is y is z):
            return None
    inv = {n: v for v, n in ivs.items()}
    if batched:
        if not c_lead or c_lead[-1] is not inv["b"]:
            return None
        if any(defined_inside(v, root) for v in c_lead[:-1]):
            return None
    elif any(defined_inside(v, root) for v in c_lead):
        return None
    for x in extra:
        if not any(x.result is v for v in list(c_idx) + list(a_op.operands[1:]) + list(b_op.operands[1:])):
            return None
    a_mem, b_mem = a_op.operands[0], b_op.operands[0]
    if c_mem is a_mem or c_mem is b_mem:
        return None
    return {
        "A": a_mem, "B": b_mem, "C": c_mem, "lead": c_lead,
        "i0": ci_base, "j0": cj_base, "k0": ak_base,
    }


def to_library(root: Operation, kernels: Sequence[KernelDef], rw: Rewriter) -> Operation:
    if not is_loop(root):
        raise SilenceableFailure(f"to_library expects a loop nest, got {root.name}", payload_loc=root.loc)
    m = match_matmul(root)
    if m is None:
        raise SilenceableFailure("loop nest does not match the canonical matmul pattern", payload_loc=root.loc)
    bnd = m["bounds"]
    sizes = tuple(bnd[x][1] - bnd[x][0] for x in ("i", "j", "k"))
    kern = next((k for k in kernels if (k.m, k.n, k.k) == sizes), None)
    if kern is None:
        raise SilenceableFailure(
            f"no library kernel with sizes {sizes[0]}x{sizes[1]}x{sizes[2]}", payload_loc=root.loc)

    consts: Dict[int, Value] = {}

    def const(v: int) -> Value:
        if v not in consts:
            c = make_const(v)
            rw.insert_before(root, c)
            consts[v] = c.result
        return consts[v]

    def offset(base: Optional[Value], lb: int) -> Value:
        if base is None:
            return const(lb)
        if lb == 0:
            return base
        add = Operation("arith.addi", [base, const(lb)], [INDEX])
        rw.insert_before(root, add)
        return add.result

    lead = list(m["lead"])
    attrs = {"kernel": kern.name, "m": kern.m, "n": kern.n, "k": kern.k}
    if kern.alpha is not None:
        attrs["alpha"] = float(kern.alpha)
    if "b" in bnd:
        lb, ub, _ = bnd["b"]
        lead[-1] = const(lb)
        attrs["batch_count"] = ub - lb
    operands = [m["A"], m["B"], m["C"]] + lead + [
        offset(m["i0"], bnd["i"][0]), offset(m["j0"], bnd["j"][0]), offset(m["k0"], bnd["k"][0]),
    ]
    call = Operation("lib.call_kernel", operands, [], attrs, loc=root.loc)
    rw.insert_before(root, call)
    rw.replace(root, [call])
    return call
