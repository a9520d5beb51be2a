"""Op definitions, per-op verifiers and op-set expressions for the payload dialects."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

from .payload.core import Operation
from .payload.types import F64, I1, I64, INDEX, PTR, MemRefType, ScalarType, TransformType, is_integer_like

TRAITS = frozenset(
    {"pure", "loop_like", "terminator", "allocating", "memory_read", "memory_write"}
)

Verifier = Callable[[Operation], List[str]]


class RegistryError(Exception):
    pass


@dataclass
class OpDefinition:
    name: str
    num_operands: int = 0
    variadic: bool = False  # when set, num_operands is a minimum
    num_results: Optional[int] = 0  # None: any number
    num_regions: int = 0
    num_successors: int = 0
    required_attrs: Dict[str, type] = field(default_factory=dict)
    traits: FrozenSet[str] = frozenset()
    verifier: Optional[Verifier] = None

    def __post_init__(self):
        unknown = set(self.traits) - TRAITS
        if unknown:
            raise RegistryError(f"{self.name}: unknown traits {sorted(unknown)}")
        self.traits = frozenset(self.traits)

    @property
    def dialect(self) -> str:
        return self.name.split(".", 1)[0]

    def check(self, op: Operation) -> List[str]:
        errs = []
        n = len(op.operands)
        if self.variadic and n < self.num_operands:
            errs.append(f"expects at least {self.num_operands} operands, got {n}")
        elif not self.variadic and n != self.num_operands:
            errs.append(f"expects {self.num_operands} operands, got {n}")
        if self.num_results is not None and len(op.results) != self.num_results:
            errs.append(f"expects {self.num_results} results, got {len(op.results)}")
        if len(op.regions) != self.num_regions:
            errs.append(f"expects {self.num_regions} regions, got {len(op.regions)}")
        if len(op.successors) != self.num_successors:
            errs.append(f"expects {self.num_successors} successors, got {len(op.successors)}")
        for key, kind in self.required_attrs.items():
            if key not in op.attributes:
                errs.append(f"missing attribute '{key}'")
            elif not isinstance(op.attributes[key], kind):
                errs.append(f"attribute '{key}' has the wrong kind")
        seg = op.segment_sizes
        if seg is not None:
            if any(not isinstance(s, int) or s < 0 for s in seg):
                errs.append("operand_segment_sizes must be non-negative integers")
            elif sum(seg) != n:
                errs.append(f"operand_segment_sizes sum to {sum(seg)} but op has {n} operands")
        if not errs and self.verifier is not None:
            errs.extend(self.verifier(op))
        return errs


class DialectRegistry:
    """Name -> OpDefinition table plus the constrained pseudo-op names."""

    def __init__(self):
        self.defs: Dict[str, OpDefinition] = {}
        self.constrained: Dict[str, str] = {}  # pseudo-op name -> base op name

    def register_dialect(self, defs: Iterable[OpDefinition]) -> None:
        defs = list(defs)
        seen = set()
        for d in defs:
            if d.name in self.defs or d.name in seen:
                raise RegistryError(f"duplicate op definition '{d.name}'")
            seen.add(d.name)
        for d in defs:
            self.defs[d.name] = d

    def register_constrained(self, name: str, base: str) -> None:
        if base not in self.defs:
            raise RegistryError(f"constrained op '{name}' refers to unknown base '{base}'")
        self.constrained[name] = base

    def get(self, name: str) -> Optional[OpDefinition]:
        return self.defs.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self.defs

    def has_trait(self, name: str, trait: str) -> bool:
        d = self.defs.get(name)
        return d is not None and trait in d.traits

    def dialects(self) -> set:
        return {d.dialect for d in self.defs.values()}

    def copy(self) -> "DialectRegistry":
        new = DialectRegistry()
        new.defs = dict(self.defs)
        new.constrained = dict(self.constrained)
        return new


# -- op-set expressions ---------------------------------------------------

@dataclass(frozen=True)
class OpSetExpr:
    """A union of atoms: exact names, ``dialect.*`` wildcards, ``interface:<trait>``
    atoms and constrained pseudo-op names. The atom ``*`` matches everything."""

    atoms: Tuple[str, ...]

    @staticmethod
    def parse(spec: Union[str, Sequence[str], "OpSetExpr"]) -> "OpSetExpr":
        if isinstance(spec, OpSetExpr):
            return spec
        if isinstance(spec, str):
            text = spec.strip()
            if text.startswith("{") and text.endswith("}"):
                text = text[1:-1]
            parts = [p.strip() for p in text.split(",")]
        else:
            parts = [str(p).strip() for p in spec]
        atoms = tuple(("*" if p == "any_op" else p) for p in parts if p)
        return OpSetExpr(atoms)

    def __str__(self) -> str:
        return "{" + ", ".join(self.atoms) + "}"

    def __or__(self, other: "OpSetExpr") -> "OpSetExpr":
        return OpSetExpr(tuple(dict.fromkeys(self.atoms + other.atoms)))

    @property
    def is_empty(self) -> bool:
        return not self.atoms


def check_atom(atom: str, registry: DialectRegistry) -> None:
    if atom == "*":
        return
    if atom.startswith("interface:"):
        if atom.split(":", 1)[1] not in TRAITS:
            raise RegistryError(f"unknown interface atom '{atom}'")
        return
    if atom.endswith(".*"):
        if atom[:-2] not in registry.dialects():
            raise RegistryError(f"unknown dialect in atom '{atom}'")
        return
    if atom in registry.defs or atom in registry.constrained:
        return
    raise RegistryError(f"unresolvable op-set atom '{atom}'")


def atom_matches(opname: str, atom: str, registry: DialectRegistry) -> bool:
    if atom == "*":
        return True
    if atom.startswith("interface:"):
        return registry.has_trait(opname, atom.split(":", 1)[1])
    if atom.endswith(".*"):
        return opname.startswith(atom[:-1])
    if atom in registry.constrained:
        return opname == registry.constrained[atom]
    return opname == atom


def op_in_set(opname: str, expr, registry: Optional[DialectRegistry] = None) -> bool:
    registry = registry or default_registry()
    expr = OpSetExpr.parse(expr)
    for atom in expr.atoms:
        check_atom(atom, registry)
    return any(atom_matches(opname, a, registry) for a in expr.atoms)


# -- builtin dialect definitions -----------------------------------------

def _same_types(op: Operation) -> List[str]:
    ts = {v.type for v in op.operands} | {r.type for r in op.results}
    return [] if len(ts) == 1 else [f"operand/result types differ: {sorted(map(str, ts))}"]


def _int_binary(op: Operation) -> List[str]:
    errs = _same_types(op)
    if not errs and not is_integer_like(op.results[0].type):
        errs.append("expects integer or index operands")
    return errs


def _float_binary(op: Operation) -> List[str]:
    errs = _same_types(op)
    if not errs and op.results[0].type != F64:
        errs.append("expects f64 operands")
    return errs


def _constant(op: Operation) -> List[str]:
    v = op.attributes.get("value")
    t = op.results[0].type
    if t == F64:
        return [] if isinstance(v, float) else ["f64 constant needs a float value"]
    if is_integer_like(t):
        return [] if isinstance(v, int) and not isinstance(v, bool) else ["integer constant needs an int value"]
    return [f"unsupported constant type {t}"]


def _cmpi(op: Operation) -> List[str]:
    errs = []
    if op.operands[0].type != op.operands[1].type:
        errs.append("cmpi operands differ in type")
    if op.results[0].type != I1:
        errs.append("cmpi result must be i1")
    if op.attributes.get("predicate") not in ("eq", "ne", "slt", "sle", "sgt", "sge"):
        errs.append("bad cmpi predicate")
    return errs


def _memref_access(first: int):
    def check(op: Operation) -> List[str]:
        m = op.operands[first].type
        if not isinstance(m, MemRefType):
            return ["expects a memref operand"]
        idx = op.operands[first + 1:]
        if len(idx) != m.rank:
            return [f"expects {m.rank} indices, got {len(idx)}"]
        if any(v.type != INDEX for v in idx):
            return ["indices must be index-typed"]
        if op.name == "memref.load" and op.results[0].type != m.element:
            return ["load result type differs from element type"]
        if op.name == "memref.store" and op.operands[0].type != m.element:
            return ["stored value type differs from element type"]
        return []
    return check


def _view_like(nsrc: int):
    def check(op: Operation) -> List[str]:
        seg = op.segment_sizes
        if seg is None or len(seg) != 4:
            return ["expects operand_segment_sizes with 4 groups"]
        if seg[0] != nsrc:
            return [f"expects {nsrc} source operand(s)"]
        res = op.results[0].type
        if not isinstance(res, MemRefType):
            return ["result must be a memref"]
        errs = []
        for g, key in ((1, "static_offsets"), (2, "static_sizes"), (3, "static_strides")):
            stat = op.attributes.get(key)
            if not isinstance(stat, list):
                errs.append(f"missing '{key}'")
                continue
            if seg[g] != sum(1 for s in stat if s == -1):
                errs.append(f"'{key}' dynamic entries do not match operand group {g}")
        if any(v.type != INDEX for v in op.operands[nsrc:]):
            errs.append("offset/size/stride operands must be index-typed")
        return errs
    return check


def _scf_for(op: Operation) -> List[str]:
    errs = []
    if any(v.type != INDEX for v in op.operands):
        errs.append("bounds must be index-typed")
    r = op.regions[0]
    if len(r.blocks) != 1:
        errs.append(f"scf region must contain exactly one block, found {len(r.blocks)}")
    elif len(r.blocks[0].args) != 1 or r.blocks[0].args[0].type != INDEX:
        errs.append("body must have a single index argument")
    return errs


def _scf_forall(op: Operation) -> List[str]:
    errs = []
    lo, hi, st = (op.attributes.get(k) for k in ("lower_bounds", "upper_bounds", "steps"))
    if not all(isinstance(x, list) for x in (lo, hi, st)) or not len(lo) == len(hi) == len(st):
        return ["lower_bounds/upper_bounds/steps must be equal-length lists"]
    r = op.regions[0]
    if len(r.blocks) != 1:
        errs.append(f"scf region must contain exactly one block, found {len(r.blocks)}")
    elif len(r.blocks[0].args) != len(lo):
        errs.append("body argument count must equal loop rank")
    if any(s <= 0 for s in st):
        errs.append("steps must be positive")
    return errs


def _scf_if(op: Operation) -> List[str]:
    errs = [] if op.operands[0].type == I1 else ["condition must be i1"]
    for r in op.regions:
        if len(r.blocks) > 1:
            errs.append("scf region must contain at most one block")
    if not op.regions[0].blocks:
        errs.append("then region must have a block")
    return errs


def _br(op: Operation) -> List[str]:
    dest = op.successors[0]
    if len(dest.args) != len(op.operands):
        return [f"branch passes {len(op.operands)} values to a block with {len(dest.args)} args"]
    return []


def _cond_br(op: Operation) -> List[str]:
    seg = op.segment_sizes
    if seg is None or len(seg) != 3 or seg[0] != 1:
        return ["expects operand_segment_sizes [1, n_true, n_false]"]
    errs = []
    if op.operands[0].type != I1:
        errs.append("condition must be i1")
    for k, dest in enumerate(op.successors):
        if len(dest.args) != seg[k + 1]:
            errs.append(f"successor {k} argument count mismatch")
    return errs


def _func(op: Operation) -> List[str]:
    if not isinstance(op.attributes.get("sym_name"), str):
        return ["missing symbol name"]
    return []


def _llvm_int_binary(op: Operation) -> List[str]:
    errs = _same_types(op)
    if not errs and op.results[0].type not in (I64, I1):
        errs.append("llvmlite integer ops take i64 operands")
    return errs


def _llvm_constant(op: Operation) -> List[str]:
    t = op.results[0].type
    if t not in (I64, F64, I1):
        return ["llvmlite constants are i64, i1 or f64"]
    return _constant(op)


def _gep(op: Operation) -> List[str]:
    if op.operands[0].type != PTR or op.operands[1].type != I64:
        return ["gep takes (ptr, i64)"]
    return [] if op.results[0].type == PTR else ["gep returns ptr"]


def _affine_apply(op: Operation) -> List[str]:
    if not isinstance(op.attributes.get("map"), str):
        return ["missing affine map"]
    if any(v.type != INDEX for v in op.operands):
        return ["affine.apply takes index symbols"]
    return []


def _call_kernel(op: Operation) -> List[str]:
    errs = []
    for k in ("m", "n", "k"):
        v = op.attributes.get(k)
        if not isinstance(v, int) or v < 1:
            errs.append(f"kernel size '{k}' must be >= 1")
    if len(op.operands) < 6 or not all(isinstance(v.type, MemRefType) for v in op.operands[:3]):
        errs.append("expects (A, B, C, [batch], i0, j0, k0)")
    return errs


def _defs() -> List[OpDefinition]:
    D = OpDefinition
    pure = {"pure"}
    return [
        D("builtin.module", num_regions=1),
        D("builtin.unrealized_conversion_cast", 1, num_results=1, traits=pure),
        D("func.func", num_regions=1, verifier=_func),
        D("func.call", 0, variadic=True, num_results=None, required_attrs={"callee": object}),
        D("func.return", 0, variadic=True, traits={"terminator"}),
        D("scf.for", 3, num_regions=1, traits={"loop_like"}, verifier=_scf_for),
        D("scf.forall", 0, num_regions=1, traits={"loop_like"}, verifier=_scf_forall),
        D("scf.if", 1, num_regions=2, verifier=_scf_if),
        D("scf.yield", 0, variadic=True, traits={"terminator"}),
        D("cf.br", 0, variadic=True, num_successors=1, traits={"terminator"}, verifier=_br),
        D("cf.cond_br", 1, variadic=True, num_successors=2, traits={"terminator"}, verifier=_cond_br),
        D("arith.constant", num_results=1, required_attrs={"value": object}, traits=pure, verifier=_constant),
        D("arith.addi", 2, num_results=1, traits=pure, verifier=_int_binary),
        D("arith.muli", 2, num_results=1, traits=pure, verifier=_int_binary),
        D("arith.subi", 2, num_results=1, traits=pure, verifier=_int_binary),
        D("arith.cmpi", 2, num_results=1, required_attrs={"predicate": str}, traits=pure, verifier=_cmpi),
        D("arith.index_cast", 1, num_results=1, traits=pure),
        D("arith.addf", 2, num_results=1, traits=pure, verifier=_float_binary),
        D("arith.mulf", 2, num_results=1, traits=pure, verifier=_float_binary),
        D("affine.apply", 0, variadic=True, num_results=1, traits=pure, verifier=_affine_apply),
        D("memref.alloc", num_results=1, traits={"allocating"}),
        D("memref.load", 1, variadic=True, num_results=1, traits={"memory_read"}, verifier=_memref_access(0)),
        D("memref.store", 2, variadic=True, traits={"memory_write"}, verifier=_memref_access(1)),
        D("memref.subview", 1, variadic=True, num_results=1, traits=pure, verifier=_view_like(1)),
        D("memref.extract_strided_metadata", 1, num_results=None, traits=pure),
        D("memref.extract_aligned_pointer_as_index", 1, num_results=1, traits=pure),
        D("memref.reinterpret_cast", 1, variadic=True, num_results=1, traits=pure, verifier=_view_like(1)),
        D("llvmlite.func", num_regions=1, verifier=_func),
        D("llvmlite.br", 0, variadic=True, num_successors=1, traits={"terminator"}, verifier=_br),
        D("llvmlite.cond_br", 1, variadic=True, num_successors=2, traits={"terminator"}, verifier=_cond_br),
        D("llvmlite.call", 0, variadic=True, num_results=None, required_attrs={"callee": object}),
        D("llvmlite.return", 0, variadic=True, traits={"terminator"}),
        D("llvmlite.add", 2, num_results=1, traits=pure, verifier=_llvm_int_binary),
        D("llvmlite.sub", 2, num_results=1, traits=pure, verifier=_llvm_int_binary),
        D("llvmlite.mul", 2, num_results=1, traits=pure, verifier=_llvm_int_binary),
        D("llvmlite.fadd", 2, num_results=1, traits=pure, verifier=_float_binary),
        D("llvmlite.fmul", 2, num_results=1, traits=pure, verifier=_float_binary),
        D("llvmlite.icmp", 2, num_results=1, required_attrs={"predicate": str}, traits=pure, verifier=_cmpi),
        D("llvmlite.gep", 2, num_results=1, traits=pure, verifier=_gep),
        D("llvmlite.load", 1, num_results=1, traits={"memory_read"}),
        D("llvmlite.store", 2, traits={"memory_write"}),
        D("llvmlite.constant", num_results=1, required_attrs={"value": object}, traits=pure, verifier=_llvm_constant),
        D("llvmlite.alloca", num_results=1, required_attrs={"size": int}, traits={"allocating"}),
        D("llvmlite.ptrtoint", 1, num_results=1, traits=pure),
        D("llvmlite.undef", num_results=1, traits=pure),
        D("lib.call_kernel", 6, variadic=True, required_attrs={"kernel": str}, traits={"memory_read", "memory_write"}, verifier=_call_kernel),
    ]


def builtin_definitions() -> List[OpDefinition]:
    return _defs()


_DEFAULT: Optional[DialectRegistry] = None


def default_registry() -> DialectRegistry:
    """Process-wide registry of the builtin dialects (built on first use)."""
    global _DEFAULT
    if _DEFAULT is None:
        reg = DialectRegistry()
        reg.register_dialect(builtin_definitions())
        for base in (
            "memref.subview", "memref.extract_strided_metadata",
            "memref.extract_aligned_pointer_as_index", "memref.reinterpret_cast",
            "memref.load", "memref.store", "memref.alloc",
        ):
            reg.register_constrained(base + ".constr", base)
        _DEFAULT = reg
    return _DEFAULT


def load_plugin_definitions(text: str) -> List[OpDefinition]:
    """Read ``opdef {name = "d.op", operands = 2, ...}`` lines into definitions."""
    from .payload.parser import parse_attr_dict

    defs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("//", 1)[0].strip()
        if not line:
            continue
        if not line.startswith("opdef"):
            raise RegistryError(f"line {lineno}: expected 'opdef {{...}}'")
        attrs = parse_attr_dict(line[len("opdef"):].strip())
        if "name" not in attrs:
            raise RegistryError(f"line {lineno}: opdef without name")
        results = attrs.get("results", 0)
        defs.append(OpDefinition(
            name=attrs["name"],
            num_operands=int(attrs.get("operands", 0)),
            variadic=bool(attrs.get("variadic", False)),
            num_results=None if results == -1 else int(results),
            num_regions=int(attrs.get("regions", 0)),
            num_successors=int(attrs.get("successors", 0)),
            required_attrs={k: object for k in attrs.get("attrs", [])},
            traits=frozenset(attrs.get("traits", [])),
        ))
    return defs
