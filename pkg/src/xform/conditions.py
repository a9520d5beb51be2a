"""Pre/post-condition signatures, constrained pseudo-ops and pipeline checking.

A signature lists the payload ops a transform or pass expects and removes
(``consumed``) and the ops it may introduce (``produced``). The static checker
runs a set-based dataflow over a script; the dynamic checker inspects a
concrete module before or after a step.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .dialects import DialectRegistry, OpSetExpr, atom_matches, check_atom, default_registry
from .payload.core import Operation
from .payload.diagnostics import Diagnostic

TOP = "*"


@dataclass(frozen=True)
class ConditionSignature:
    consumed: OpSetExpr = OpSetExpr(())
    produced: OpSetExpr = OpSetExpr(())

    @staticmethod
    def of(consumed, produced) -> "ConditionSignature":
        return ConditionSignature(OpSetExpr.parse(consumed), OpSetExpr.parse(produced))

    @property
    def is_empty(self) -> bool:
        return self.consumed.is_empty and self.produced.is_empty

    def validate(self, registry: DialectRegistry) -> None:
        for atom in self.consumed.atoms + self.produced.atoms:
            check_atom(atom, registry)

    def __str__(self) -> str:
        return f"consumes {self.consumed} produces {self.produced}"


@dataclass
class ConstrainedOpDef:
    """Refinement of an existing op: exact cardinality per operand group and
    required attribute values. Checking never creates a new op kind."""

    name: str
    base: str
    group_card: Dict[int, int] = field(default_factory=dict)
    attr_equals: Dict[str, object] = field(default_factory=dict)

    def verify(self, op: Operation) -> bool:
        return verify_constrained(op, self)


def verify_constrained(op: Operation, cdef: ConstrainedOpDef) -> bool:
    if op.name != cdef.base:
        raise ValueError(f"'{op.name}' cannot be checked against '{cdef.name}' (base is '{cdef.base}')")
    if cdef.group_card:
        seg = op.segment_sizes
        if seg is None:
            return False
        for g, n in cdef.group_card.items():
            if g >= len(seg) or seg[g] != n:
                return False
    for key, val in cdef.attr_equals.items():
        if op.attributes.get(key) != val:
            return False
    return True


def default_constrained_defs() -> Dict[str, ConstrainedOpDef]:
    """Constrained variants of the memref ops describing "trivially indexed" IR."""
    C = ConstrainedOpDef
    defs = [
        C("memref.subview.constr", "memref.subview", {1: 0, 2: 0, 3: 0}),
        C("memref.reinterpret_cast.constr", "memref.reinterpret_cast", {2: 0, 3: 0}),
        C("memref.extract_strided_metadata.constr", "memref.extract_strided_metadata"),
        C("memref.extract_aligned_pointer_as_index.constr", "memref.extract_aligned_pointer_as_index"),
        C("memref.load.constr", "memref.load"),
        C("memref.store.constr", "memref.store"),
        C("memref.alloc.constr", "memref.alloc"),
    ]
    return {d.name: d for d in defs}


# -- declaration files ----------------------------------------------------

@dataclass
class Declarations:
    signatures: Dict[str, ConditionSignature] = field(default_factory=dict)
    constrained: Dict[str, ConstrainedOpDef] = field(default_factory=dict)


def parse_declarations(text: str) -> Declarations:
    """Parse ``sig <name> consumes {..} produces {..}`` and
    ``constr <name> on <base> group <g> card <n> [group <g> card <n> ...]`` lines."""
    import re

    decls = Declarations()
    sig_re = re.compile(r"sig\s+(\S+)\s+consumes\s+(\{[^}]*\})\s+produces\s+(\{[^}]*\})\s*$")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("//", 1)[0].strip()
        if not line:
            continue
        m = sig_re.match(line)
        if m:
            decls.signatures[m.group(1)] = ConditionSignature.of(m.group(2), m.group(3))
            continue
        parts = line.split()
        if parts[0] == "constr" and len(parts) >= 4 and parts[2] == "on":
            cdef = ConstrainedOpDef(parts[1], parts[3])
            rest = parts[4:]
            if len(rest) % 4:
                raise ValueError(f"line {lineno}: expected 'group <g> card <n>' pairs")
            for i in range(0, len(rest), 4):
                if rest[i] != "group" or rest[i + 2] != "card":
                    raise ValueError(f"line {lineno}: expected 'group <g> card <n>'")
                cdef.group_card[int(rest[i + 1])] = int(rest[i + 3])
            decls.constrained[cdef.name] = cdef
            continue
        raise ValueError(f"line {lineno}: cannot parse declaration '{line}'")
    return decls


# -- abstract op sets -----------------------------------------------------

class AbstractOpSet:
    """Atoms (exact names, wildcards, constrained names) of ops possibly present,
    each with the step that introduced it. ``*`` is the unknown (top) state."""

    def __init__(self, atoms: Optional[Dict[str, str]] = None):
        self.atoms: Dict[str, str] = dict(atoms or {})

    @staticmethod
    def initial(expr) -> "AbstractOpSet":
        return AbstractOpSet({a: "input" for a in OpSetExpr.parse(expr).atoms})

    @property
    def is_top(self) -> bool:
        return TOP in self.atoms

    def copy(self) -> "AbstractOpSet":
        return AbstractOpSet(self.atoms)

    def join(self, other: "AbstractOpSet") -> "AbstractOpSet":
        out = dict(other.atoms)
        out.update(self.atoms)
        return AbstractOpSet(out)

    def names(self) -> Set[str]:
        return set(self.atoms)


def _atom_dialect(atom: str) -> str:
    return atom.split(".", 1)[0]


def _base_name(atom: str, registry: DialectRegistry) -> str:
    return registry.constrained.get(atom, atom)


def atoms_overlap(state_atom: str, expr_atom: str, registry: DialectRegistry) -> bool:
    """Could an op described by ``state_atom`` match ``expr_atom``?"""
    if state_atom == TOP or expr_atom == TOP:
        return True
    if expr_atom.startswith("interface:"):
        trait = expr_atom.split(":", 1)[1]
        if state_atom.endswith(".*"):
            d = state_atom[:-2]
            return any(registry.has_trait(n, trait) for n in registry.defs if n.startswith(d + "."))
        return registry.has_trait(_base_name(state_atom, registry), trait)
    if state_atom.startswith("interface:"):
        return True
    if expr_atom.endswith(".*"):
        return _atom_dialect(state_atom) == expr_atom[:-2]
    if state_atom.endswith(".*"):
        return _atom_dialect(expr_atom) == state_atom[:-2]
    # exact vs exact, constrained names count as their base op
    return _base_name(state_atom, registry) == _base_name(expr_atom, registry)


def consumes_atom(state_atom: str, expr_atom: str, registry: DialectRegistry) -> bool:
    """Does consuming ``expr_atom`` remove everything ``state_atom`` describes?"""
    if expr_atom == TOP:
        return True
    if state_atom == TOP:
        return False
    if expr_atom.endswith(".*"):
        return _atom_dialect(state_atom) == expr_atom[:-2] and not state_atom.startswith("interface:")
    if expr_atom.startswith("interface:"):
        if state_atom.endswith(".*") or state_atom.startswith("interface:"):
            return False
        return registry.has_trait(_base_name(state_atom, registry), expr_atom.split(":", 1)[1])
    if expr_atom in registry.constrained:
        # a constrained pre-condition only removes ops satisfying the constraint
        return state_atom == expr_atom
    if state_atom.endswith(".*"):
        return False
    return _base_name(state_atom, registry) == expr_atom


def apply_signature(state: AbstractOpSet, sig: ConditionSignature, step: str,
                    registry: DialectRegistry) -> AbstractOpSet:
    if state.is_top:
        out = dict(state.atoms)
    else:
        out = {
            a: src for a, src in state.atoms.items()
            if not any(consumes_atom(a, c, registry) for c in sig.consumed.atoms)
        }
    for p in sig.produced.atoms:
        out.setdefault(p, step)
    return AbstractOpSet(out)


@dataclass
class StaticFinding:
    kind: str  # residual | phase | opaque
    message: str
    step: str
    loc: Optional[Tuple[int, int]] = None

    def diagnostic(self) -> Diagnostic:
        sev = "warning" if self.kind == "opaque" else "error"
        return Diagnostic(sev, self.message, self.loc)


@dataclass
class StaticReport:
    findings: List[StaticFinding] = field(default_factory=list)
    final_state: Optional[AbstractOpSet] = None

    @property
    def residuals(self) -> List[StaticFinding]:
        return [f for f in self.findings if f.kind == "residual"]

    @property
    def phase_violations(self) -> List[StaticFinding]:
        return [f for f in self.findings if f.kind == "phase"]

    @property
    def warnings(self) -> List[StaticFinding]:
        return [f for f in self.findings if f.kind == "opaque"]

    @property
    def ok(self) -> bool:
        return not self.residuals and not self.phase_violations


@dataclass
class Step:
    """One step of a linearized script: a signature, or a set of alternative branches."""

    label: str
    signature: Optional[ConditionSignature] = None
    loc: Optional[Tuple[int, int]] = None
    branches: Optional[List[List["Step"]]] = None
    neutral: bool = False  # step does not touch payload op kinds


def run_static(steps: Sequence[Step], initial, final_allowed,
               registry: Optional[DialectRegistry] = None) -> StaticReport:
    """Dataflow over ``steps``: S' = (S minus consumed) plus produced."""
    registry = registry or default_registry()
    final_allowed = OpSetExpr.parse(final_allowed)
    report = StaticReport()

    def walk(seq: Sequence[Step], state: AbstractOpSet) -> AbstractOpSet:
        for st in seq:
            if st.branches is not None:
                outs = [walk(b, state.copy()) for b in st.branches] or [state]
                joined = outs[0]
                for o in outs[1:]:
                    joined = joined.join(o)
                state = joined
                continue
            if st.neutral:
                continue
            sig = st.signature
            if sig is None or sig.is_empty:
                report.findings.append(StaticFinding(
                    "opaque", f"'{st.label}' declares no pre/post-conditions; assuming any op may be present",
                    st.label, st.loc))
                state = AbstractOpSet({TOP: st.label})
                continue
            if sig.consumed.atoms and not state.is_top:
                if not any(atoms_overlap(a, c, registry) for a in state.atoms for c in sig.consumed.atoms):
                    report.findings.append(StaticFinding(
                        "phase",
                        f"phase ordering violation: '{st.label}' expects {sig.consumed} "
                        f"but none can be present here",
                        st.label, st.loc))
            state = apply_signature(state, sig, st.label, registry)
        return state

    final = walk(steps, AbstractOpSet.initial(initial))
    report.final_state = final
    for atom, src in final.atoms.items():
        if atom == TOP:
            continue
        if not any(_allowed(atom, f, registry) for f in final_allowed.atoms):
            report.findings.append(StaticFinding(
                "residual", f"'{atom}' introduced by {src} may remain in the final IR", src))
    return report


def _allowed(atom: str, allowed: str, registry: DialectRegistry) -> bool:
    if allowed == TOP:
        return True
    if allowed.endswith(".*"):
        return _atom_dialect(atom) == allowed[:-2]
    if allowed.startswith("interface:"):
        return not atom.endswith(".*") and registry.has_trait(_base_name(atom, registry), allowed.split(":", 1)[1])
    return atom == allowed or _base_name(atom, registry) == allowed


def check_dynamic(module: Operation, sig: ConditionSignature, stage: str, label: str = "",
                  registry: Optional[DialectRegistry] = None,
                  constrained: Optional[Dict[str, ConstrainedOpDef]] = None) -> List[Diagnostic]:
    """Compare a concrete module against a signature.

    ``before``: a warning when nothing matches ``consumed`` (the step is a no-op).
    ``after``: an error for each surviving op matching ``consumed`` that is not
    re-introduced by ``produced``; ops matching a produced constrained atom must
    pass its generated verifier.
    """
    registry = registry or default_registry()
    constrained = constrained if constrained is not None else default_constrained_defs()
    ops = [op for op in module.walk() if op is not module]
    diags: List[Diagnostic] = []
    prefix = f"{label}: " if label else ""
    if stage == "before":
        if sig.consumed.atoms and not any(
            atom_matches(op.name, a, registry) for op in ops for a in sig.consumed.atoms
        ):
            diags.append(Diagnostic("warning", f"{prefix}no op matches {sig.consumed}; step is a no-op", module.loc))
        return diags
    if stage != "after":
        raise ValueError(f"unknown stage '{stage}'")
    for op in ops:
        if not any(atom_matches(op.name, a, registry) for a in sig.consumed.atoms):
            continue
        produced = [a for a in sig.produced.atoms if atom_matches(op.name, a, registry)]
        if not produced:
            diags.append(Diagnostic(
                "error", f"{prefix}failed to legalize operation '{op.name}' that was explicitly marked illegal", op.loc))
            continue
        exact = [a for a in produced if a not in constrained]
        if exact:
            continue
        if not any(verify_constrained(op, constrained[a]) for a in produced):
            names = ", ".join(produced)
            diags.append(Diagnostic(
                "error", f"{prefix}'{op.name}' op does not satisfy constrained definition {names}", op.loc))
    return diags
