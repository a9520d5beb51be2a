"""Transform-script IR: op vocabulary, handle/param typing, effects and verification.

Scripts use the same textual format and in-memory structures as payload IR.
Handle values carry a ``!transform.any_op`` or ``!transform.op<"name">`` type;
parameters carry ``!transform.param``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

from .conditions import ConditionSignature
from .dialects import OpSetExpr, RegistryError, atom_matches, default_registry
from .payload.core import Operation, Sym, Value, symbol_table
from .payload.diagnostics import Diagnostic, IRError
from .payload.parser import parse_ir
from .payload.printer import print_payload
from .payload.types import TransformType


class ScriptError(IRError):
    pass


# -- parameters -----------------------------------------------------------

@dataclass(frozen=True)
class ParamValue:
    kind: str  # int_list | string | opname
    value: Union[Tuple[int, ...], str]

    @staticmethod
    def of(v) -> "ParamValue":
        if isinstance(v, ParamValue):
            return v
        if isinstance(v, bool):
            return ParamValue("int_list", (int(v),))
        if isinstance(v, int):
            return ParamValue("int_list", (v,))
        if isinstance(v, (list, tuple)) and all(isinstance(x, int) and not isinstance(x, bool) for x in v):
            return ParamValue("int_list", tuple(v))
        if isinstance(v, str):
            return ParamValue("opname" if "." in v and " " not in v else "string", v)
        raise ValueError(f"unsupported parameter value {v!r}")

    def ints(self) -> Tuple[int, ...]:
        if self.kind != "int_list":
            raise ValueError(f"parameter {self.value!r} is not an integer list")
        return self.value

    def as_int(self) -> int:
        ints = self.ints()
        if len(ints) != 1:
            raise ValueError(f"parameter {list(ints)} is not a single integer")
        return ints[0]


# -- op definitions -------------------------------------------------------

@dataclass
class OperandSpec:
    kind: str = "handle"  # handle | param
    constraint: Optional[str] = None  # op-set expression, None means any op
    consumed: bool = False
    variadic: bool = False
    optional: bool = False


@dataclass
class ResultSpec:
    kind: str = "handle"
    constraint: Optional[str] = None


@dataclass(frozen=True)
class TransformEffect:
    operands: Tuple[str, ...]  # consumed | readonly, per operand spec
    produces: Tuple[Optional[str], ...]  # result handle constraints


Apply = Callable[..., object]


@dataclass
class TransformOpDef:
    name: str
    operands: List[OperandSpec] = field(default_factory=list)
    results: List[ResultSpec] = field(default_factory=list)
    variadic_results: bool = False
    num_regions: int = 0
    condition: Optional[ConditionSignature] = None
    payload_effect: bool = True  # False: never changes which payload op kinds exist
    apply: Optional[Apply] = None
    verifier: Optional[Callable[[Operation], List[str]]] = None
    terminator: bool = False

    @property
    def effect(self) -> TransformEffect:
        return TransformEffect(
            tuple("consumed" if o.consumed else "readonly" for o in self.operands),
            tuple(r.constraint for r in self.results),
        )

    def spec_for(self, index: int, count: int) -> OperandSpec:
        """Spec governing operand ``index`` of an op with ``count`` operands."""
        # fixed specs come first; an optional or variadic spec may close the list
        specs = self.operands
        if not specs:
            raise IndexError("op takes no operands")
        return specs[index] if index < len(specs) else specs[-1]


class TransformRegistry:
    def __init__(self):
        self.defs: Dict[str, TransformOpDef] = {}

    def register(self, d: TransformOpDef) -> None:
        if d.name in self.defs:
            raise RegistryError(f"transform op '{d.name}' is already registered")
        if d.condition is not None:
            d.condition.validate(default_registry())
        self.defs[d.name] = d

    def get(self, name: str) -> Optional[TransformOpDef]:
        return self.defs.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.defs

    def copy(self) -> "TransformRegistry":
        new = TransformRegistry()
        new.defs = dict(self.defs)
        return new


_REGISTRY: Optional[TransformRegistry] = None


def transform_registry() -> TransformRegistry:
    """Process-wide registry holding the builtin transform vocabulary."""
    global _REGISTRY
    if _REGISTRY is None:
        from .transforms.library import builtin_transform_defs

        reg = TransformRegistry()
        for d in builtin_transform_defs():
            reg.register(d)
        _REGISTRY = reg
    return _REGISTRY


def register_transform(name: str, operands: Sequence[OperandSpec], results: Sequence[ResultSpec],
                       condition: Optional[ConditionSignature], apply: Apply,
                       registry: Optional[TransformRegistry] = None, **kw) -> TransformOpDef:
    """Add a transform op; its operand specs carry the consumed/readonly effect."""
    d = TransformOpDef(name, list(operands), list(results), condition=condition, apply=apply, **kw)
    (registry or transform_registry()).register(d)
    return d


def effects_of(op: Union[Operation, str], registry: Optional[TransformRegistry] = None) -> TransformEffect:
    """Per-operand consumed/readonly flags and produced handle constraints.

    For ``transform.include`` the flags are those of the callee's arguments.
    """
    registry = registry or transform_registry()
    name = op if isinstance(op, str) else op.name
    d = registry.get(name)
    if d is None:
        raise RegistryError(f"unregistered transform op '{name}'")
    if isinstance(op, Operation):
        return TransformEffect(
            tuple("consumed" if operand_consumed(op, i, registry) else "readonly" for i in range(len(op.operands))),
            d.effect.produces,
        )
    return d.effect


# -- script structure -----------------------------------------------------

@dataclass
class Script:
    module: Operation  # builtin.module holding named sequences
    text: str = ""

    @property
    def sequences(self) -> Dict[str, Operation]:
        return {k: v for k, v in symbol_table(self.module).items() if v.name == "transform.named_sequence"}

    def entry(self, name: str = "transform_main") -> Operation:
        seq = self.sequences.get(name)
        if seq is None:
            raise ScriptError(Diagnostic("error", f"script has no @{name} named_sequence", None))
        return seq

    def print(self) -> str:
        return print_payload(self.module)

    def clone(self) -> "Script":
        return Script(self.module.clone(), self.text)


def callee_of(op: Operation) -> str:
    c = op.attributes.get("callee")
    return c.name if isinstance(c, Sym) else str(c).lstrip("@")


def handle_constraint(t) -> Optional[OpSetExpr]:
    """Op-set a handle type admits; None for ``any_op``."""
    if isinstance(t, TransformType) and t.kind == "handle" and t.ops:
        return OpSetExpr.parse(list(t.ops))
    return None


def type_satisfies(value_type, required: Optional[str]) -> bool:
    """Is every op a handle of ``value_type`` may hold allowed by ``required``?"""
    if required is None:
        return True
    req = OpSetExpr.parse(required)
    have = handle_constraint(value_type)
    if have is None:
        return "*" in req.atoms
    reg = default_registry()
    return all(any(atom_matches(name, a, reg) for a in req.atoms) for name in have.atoms)


_consumed_cache: Dict[Tuple[int, int], bool] = {}


def operand_consumed(op: Operation, index: int, registry: Optional[TransformRegistry] = None,
                     _stack: Tuple[int, ...] = ()) -> bool:
    registry = registry or transform_registry()
    if op.name == "transform.include":
        module = _root(op)
        callee = symbol_table(module).get(callee_of(op)) if module is not None else None
        if callee is None or callee.id in _stack:
            return False
        arg = callee.body.args[index] if index < len(callee.body.args) else None
        return arg is not None and value_consumed_in(arg, registry, _stack + (callee.id,))
    d = registry.get(op.name)
    if d is None or not d.operands:
        return False
    return d.spec_for(index, len(op.operands)).consumed


def value_consumed_in(v: Value, registry: Optional[TransformRegistry] = None, _stack: Tuple[int, ...] = ()) -> bool:
    """Is ``v`` consumed by any of its users (looking through includes)?"""
    for user in v.users:
        for i, operand in enumerate(user.operands):
            if operand is v and operand_consumed(user, i, registry, _stack):
                return True
    return False


def _root(op: Operation) -> Optional[Operation]:
    cur = op
    while cur.parent_op is not None:
        cur = cur.parent_op
    return cur if cur.name == "builtin.module" else None


# -- verification ---------------------------------------------------------

def include_cycles(module: Operation) -> List[List[str]]:
    """Cycles in the include call graph, each as a list of sequence names."""
    seqs = {k: v for k, v in symbol_table(module).items() if v.name == "transform.named_sequence"}
    graph = {
        name: [callee_of(o) for o in seq.nested_ops() if o.name == "transform.include"]
        for name, seq in seqs.items()
    }
    cycles, color = [], {}

    def dfs(n: str, path: List[str]) -> None:
        color[n] = 1
        for m in graph.get(n, []):
            if m not in graph:
                continue
            if color.get(m) == 1:
                cycles.append(path[path.index(m):] + [m] if m in path else [n, m])
            elif color.get(m) is None:
                dfs(m, path + [m])
        color[n] = 2

    for name in graph:
        if color.get(name) is None:
            dfs(name, [name])
    return cycles


def verify_script(module: Operation, registry: Optional[TransformRegistry] = None) -> List[Diagnostic]:
    from .payload.verifier import verify_module
    from .dialects import DialectRegistry, OpDefinition

    registry = registry or transform_registry()
    diags: List[Diagnostic] = []

    # structural SSA checks reuse the payload verifier with a permissive table
    struct = DialectRegistry()
    names = set(registry.defs) | {"builtin.module"}
    struct.register_dialect([
        OpDefinition(n, 0, variadic=True, num_results=None,
                     num_regions=(registry.get(n).num_regions if registry.get(n) else 1),
                     traits=frozenset({"terminator"}) if registry.get(n) and registry.get(n).terminator else frozenset())
        for n in names
    ])
    for d in verify_module(module, struct):
        if "regions" in d.message and "alternatives" in d.message:
            continue
        diags.append(d)
    seqs = symbol_table(module)

    def report(op: Operation, msg: str) -> None:
        diags.append(Diagnostic("error", f"'{op.name}' op {msg}", op.loc))

    for op in module.nested_ops():
        d = registry.get(op.name)
        if d is None:
            report(op, "is not a registered transform op")
            continue
        if op.name == "transform.include":
            callee = seqs.get(callee_of(op))
            if callee is None or callee.name != "transform.named_sequence":
                report(op, f"refers to undefined sequence @{callee_of(op)}")
                continue
            params = callee.body.args
            if len(params) != len(op.operands):
                report(op, f"passes {len(op.operands)} values to @{callee_of(op)} which takes {len(params)}")
                continue
            for i, (a, p) in enumerate(zip(op.operands, params)):
                if isinstance(p.type, TransformType) and p.type.kind == "param":
                    if not (isinstance(a.type, TransformType) and a.type.kind == "param"):
                        report(op, f"operand #{i} must be a parameter")
                elif not type_satisfies(a.type, _constraint_text(p.type)):
                    report(op, f"operand #{i} of type {a.type} does not satisfy {p.type}")
            continue
        if op.name == "transform.alternatives":
            if not op.regions:
                report(op, "needs at least one region")
        elif len(op.regions) != d.num_regions:
            report(op, f"expects {d.num_regions} regions, got {len(op.regions)}")
        n = len(op.operands)
        required = sum(1 for s in d.operands if not s.variadic and not s.optional)
        has_var = any(s.variadic for s in d.operands)
        optional = sum(1 for s in d.operands if s.optional)
        if n < required or (not has_var and n > required + optional):
            report(op, f"has {n} operands, expects {required}{'+' if has_var or optional else ''}")
            continue
        for i, v in enumerate(op.operands):
            spec = d.spec_for(i, n)
            is_param = isinstance(v.type, TransformType) and v.type.kind == "param"
            if spec.kind == "param" and not is_param:
                report(op, f"operand #{i} must be a !transform.param")
            elif spec.kind == "handle":
                if is_param:
                    report(op, f"operand #{i} must be a handle")
                elif not type_satisfies(v.type, spec.constraint):
                    report(op, f"operand #{i} of type {v.type} does not satisfy required {{{spec.constraint}}} "
                               f"(handle constraint mismatch)")
        if not d.variadic_results and len(op.results) != len(d.results):
            report(op, f"produces {len(op.results)} results, expects {len(d.results)}")
        else:
            for i, (r, spec) in enumerate(zip(op.results, d.results)):
                is_param = isinstance(r.type, TransformType) and r.type.kind == "param"
                if (spec.kind == "param") != is_param:
                    report(op, f"result #{i} has the wrong kind")
                elif spec.kind == "handle" and spec.constraint is not None:
                    have = handle_constraint(r.type)
                    if have is not None and not _compatible(spec.constraint, have):
                        report(op, f"result #{i} type {r.type} cannot hold ops of {{{spec.constraint}}}")
        if d.verifier is not None:
            for msg in d.verifier(op):
                report(op, msg)

    for cyc in include_cycles(module):
        diags.append(Diagnostic("error", "recursive include cycle: " + " -> ".join("@" + c for c in cyc), None))
    return diags


def _constraint_text(t) -> Optional[str]:
    c = handle_constraint(t)
    return None if c is None else ", ".join(c.atoms)


def _compatible(produced: str, declared: OpSetExpr) -> bool:
    reg = default_registry()
    prod = OpSetExpr.parse(produced)
    return any(
        any(atom_matches(p, d, reg) or atom_matches(d, p, reg) for d in declared.atoms) for p in prod.atoms
    )


def parse_transform(text: str, registry: Optional[TransformRegistry] = None) -> Script:
    """Parse and verify a transform script; raises :class:`ScriptError`."""
    try:
        module = parse_ir(text)
    except IRError as exc:
        raise ScriptError(exc.diagnostic) from None
    diags = verify_script(module, registry)
    if diags:
        raise ScriptError(diags[0])
    return Script(module, text)
