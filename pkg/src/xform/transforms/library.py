"""Builtin transform op vocabulary: operand/result typing, declared effects,
pre/post-condition signatures and the callbacks that run each op.

Callbacks receive ``(ctx, op, args)`` where ``ctx`` is the running
interpreter, ``op`` the script op and ``args`` the resolved operands (a list
of payload ops for a handle, a :class:`ParamValue` for a parameter). They
return one entry per result in the same representation.
"""

from __future__ import annotations

from typing import List, Optional

from ..conditions import ConditionSignature
from ..dialects import OpSetExpr, atom_matches, default_registry
from ..errors import DefiniteFailure, SilenceableFailure
from ..script import OperandSpec, ParamValue, ResultSpec, TransformOpDef
from . import loops

LOOP = "scf.for"
LOOP_SIG = ConditionSignature.of([LOOP], [LOOP, "arith.constant", "arith.addi"])


def param_arg(op, args, index: int, attr: str) -> Optional[ParamValue]:
    """Parameter given either as operand ``index`` or as attribute ``attr``."""
    if index < len(args):
        return args[index]
    if attr in op.attributes:
        return ParamValue.of(op.attributes[attr])
    return None


def _require(p: Optional[ParamValue], op, what: str) -> ParamValue:
    if p is None:
        raise DefiniteFailure(f"'{op.name}' needs a {what} (operand or attribute)", op.loc)
    return p


def _int(p: ParamValue, op) -> int:
    try:
        return p.as_int()
    except ValueError as exc:
        raise DefiniteFailure(str(exc), op.loc) from None


def _ints(p: ParamValue, op) -> List[int]:
    try:
        return list(p.ints())
    except ValueError as exc:
        raise DefiniteFailure(str(exc), op.loc) from None


def _single(handle, op, what="loop"):
    if len(handle) != 1:
        raise SilenceableFailure(f"'{op.name}' expects exactly one {what}, handle holds {len(handle)}", op.loc)
    return handle[0]


# -- callbacks --------------------------------------------------------------

def _match(ctx, op, args):
    names = op.attributes.get("ops", [])
    if isinstance(names, str):
        names = [names]
    expr = OpSetExpr.parse(list(names))
    reg = default_registry()
    outermost = bool(op.attributes.get("outermost", False))
    innermost = bool(op.attributes.get("innermost", False))
    out, seen = [], set()
    for root in args[0]:
        hits = []
        for cand in root.nested_ops():
            if any(atom_matches(cand.name, a, reg) for a in expr.atoms):
                if outermost and any(h.is_ancestor_of(cand) for h in hits):
                    continue
                hits.append(cand)
        if innermost:
            hits = [h for h in hits if not any(h is not o and h.is_ancestor_of(o) for o in hits)]
        for h in hits:
            if h.id not in seen:
                seen.add(h.id)
                out.append(h)
    return [out]


def _hoist(ctx, op, args):
    moved = []
    for loop in args[0]:
        if not loop.erased:
            moved.extend(loops.hoist_invariants(loop, ctx.rw))
    return [moved]


def _split(ctx, op, args):
    loop = _single(args[0], op)
    at = _int(_require(param_arg(op, args, 1, "at"), op, "split point"), op)
    first, second = loops.split(loop, at, ctx.rw)
    return [[first], [second]]


def _tile(ctx, op, args):
    sizes = _ints(_require(param_arg(op, args, 1, "tile_sizes"), op, "tile_sizes"), op)
    outers, inners = [], []
    for root, covered in _outermost(args[0]):
        o, i = loops.tile(root, sizes, ctx.rw)
        outers.extend(o if i else o + covered)
        inners.extend(i)
    return [outers, inners]


def _outermost(handle):
    """Pairs (root, ops of the handle nested in root) for the outermost ops;
    a handle holding several loops of one nest designates that nest."""
    roots = [r for r in handle if not any(o is not r and o.is_ancestor_of(r) for o in handle)]
    return [(r, [o for o in handle if o is not r and r.is_ancestor_of(o)]) for r in roots]


def _unroll(ctx, op, args):
    factor = _int(_require(param_arg(op, args, 1, "factor"), op, "factor"), op)
    for loop in args[0]:
        if not loop.erased:  # gone with an enclosing loop unrolled earlier in the list
            loops.unroll(loop, factor, ctx.rw)
    return []


def _interchange(ctx, op, args):
    perm = _ints(_require(param_arg(op, args, 1, "permutation"), op, "permutation"), op)
    return [[loops.interchange(root, perm, ctx.rw) for root in args[0]]]


def _vectorize(ctx, op, args):
    for loop in args[0]:
        loops.vectorize_marker(loop)
    return []


def _to_library(ctx, op, args):
    kernels = list(ctx.kernels)
    for line in op.attributes.get("kernels", []):
        kernels.extend(loops.parse_kernel_registry("kernel " + line))
    # a target nested inside an earlier one is covered by that one's call
    return [[loops.to_library(root, kernels, ctx.rw) for root, _ in _outermost(args[0])]]


def _apply_pass(ctx, op, args):
    from ..passes.registry import parse_options

    name = op.attributes.get("pass")
    p = ctx.passes.get(str(name))
    options = parse_options(str(op.attributes.get("options", "")))
    return [[p.apply(target, options, ctx.rw) for target in args[0]]]


def _apply_patterns(ctx, op, args):
    from ..passes.patterns import apply_patterns

    names = list(op.attributes.get("patterns", []))
    for target in args[0]:
        apply_patterns(target, names, ctx.rw)
    return []


def _assert(ctx, op, args):
    p = _require(param_arg(op, args, 0, "value"), op, "condition")
    if _int(p, op) == 0:
        raise SilenceableFailure(op.attributes.get("message", "assertion failed"), op.loc)
    return []


def _param_constant(ctx, op, args):
    if "value" not in op.attributes:
        raise DefiniteFailure("param.constant needs a 'value' attribute", op.loc)
    return [ParamValue.of(op.attributes["value"])]


def _trip_count(ctx, op, args):
    counts = []
    for loop in args[0]:
        n = loops.trip_count(loop) if loop.name == LOOP else None
        if n is None:
            raise SilenceableFailure("param.trip_count needs an scf.for with static bounds", op.loc)
        counts.append(n)
    return [ParamValue("int_list", tuple(counts))]


def _forward(ctx, op, args):
    # the first result carries the operand; any others are empty
    return ([list(args[0])] + [[] for _ in op.results[1:]])[:len(op.results)]


# -- verifiers ----------------------------------------------------------------

def _verify_permutation(op) -> List[str]:
    perm = op.attributes.get("permutation")
    if perm is None:
        return [] if len(op.operands) > 1 else ["needs a 'permutation' attribute or parameter"]
    if not isinstance(perm, list) or sorted(perm) != list(range(len(perm))):
        return [f"permutation {perm} is not a permutation of 0..{len(perm) - 1 if isinstance(perm, list) else '?'}"]
    return []


def _verify_nonneg(attr: str):
    def check(op) -> List[str]:
        v = op.attributes.get(attr)
        if v is None:
            return []
        vals = v if isinstance(v, list) else [v]
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in vals):
            return [f"'{attr}' must be integer"]
        return [f"'{attr}' must be non-negative"] if any(x < 0 for x in vals) else []
    return check


def _verify_match(op) -> List[str]:
    ops = op.attributes.get("ops")
    if ops is None:
        return ["needs an 'ops' attribute"]
    try:
        from ..dialects import check_atom

        for a in OpSetExpr.parse(ops if isinstance(ops, list) else [ops]).atoms:
            check_atom(a, default_registry())
    except Exception as exc:
        return [str(exc)]
    return []


def _verify_pass(op) -> List[str]:
    return [] if isinstance(op.attributes.get("pass"), str) else ["needs a 'pass' string attribute"]


def _verify_patterns(op) -> List[str]:
    pats = op.attributes.get("patterns", [])
    if not isinstance(pats, list) or not all(isinstance(p, str) for p in pats):
        return ["'patterns' must be a list of strings"]
    return []


# -- table ---------------------------------------------------------------------

def builtin_transform_defs() -> List[TransformOpDef]:
    H = OperandSpec
    R = ResultSpec
    D = TransformOpDef
    loop_in = H("handle", LOOP, consumed=True)
    opt_param = H("param", optional=True)
    return [
        D("transform.named_sequence", num_regions=1, payload_effect=False),
        D("transform.include", [H("any", variadic=True)], variadic_results=True, payload_effect=False),
        D("transform.sequence", [H("handle", optional=True)], variadic_results=True, num_regions=1,
          payload_effect=False),
        D("transform.alternatives", [H("handle", optional=True)], variadic_results=True, num_regions=1,
          payload_effect=False),
        D("transform.yield", [H("any", variadic=True)], payload_effect=False, terminator=True),
        D("transform.forward", [H("handle", consumed=True)], [R("handle")], variadic_results=True,
          payload_effect=False, apply=_forward),
        D("structured.match", [H("handle")], [R("handle")], payload_effect=False, apply=_match,
          verifier=_verify_match),
        D("loop.hoist_invariants", [H("handle", LOOP)], [R("handle")], condition=LOOP_SIG, apply=_hoist),
        D("loop.split", [loop_in, opt_param], [R("handle", LOOP), R("handle", LOOP)], condition=LOOP_SIG,
          apply=_split),
        D("loop.tile", [loop_in, opt_param], [R("handle", LOOP), R("handle", LOOP)], condition=LOOP_SIG,
          apply=_tile, verifier=_verify_nonneg("tile_sizes")),
        D("loop.unroll", [loop_in, opt_param], [], condition=LOOP_SIG, apply=_unroll,
          verifier=_verify_nonneg("factor")),
        D("loop.interchange", [loop_in, opt_param], [R("handle", LOOP)], condition=LOOP_SIG,
          apply=_interchange, verifier=_verify_permutation),
        D("loop.vectorize_marker", [H("handle", LOOP)], [], condition=ConditionSignature.of([LOOP], [LOOP]),
          apply=_vectorize),
        D("transform.to_library", [loop_in], [R("handle", "lib.call_kernel")],
          condition=ConditionSignature.of([LOOP], [LOOP, "lib.call_kernel", "arith.constant", "arith.addi"]),
          apply=_to_library),
        D("transform.apply_registered_pass", [H("handle", consumed=True)], [R("handle")], apply=_apply_pass,
          verifier=_verify_pass),
        D("transform.apply_patterns", [H("handle")], [], payload_effect=False, apply=_apply_patterns,
          verifier=_verify_patterns),
        D("transform.assert", [opt_param], [], payload_effect=False, apply=_assert),
        D("param.constant", [], [R("param")], payload_effect=False, apply=_param_constant),
        D("param.trip_count", [H("handle", LOOP)], [R("param")], payload_effect=False, apply=_trip_count),
    ]


CONTROL_OPS = ("transform.named_sequence", "transform.include", "transform.sequence",
               "transform.alternatives", "transform.yield")
