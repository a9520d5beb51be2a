from __future__ import annotations

from typing import List, Optional, Set

from .core import Operation, Region, Value
from .diagnostics import Diagnostic


def verify_module(module: Operation, registry=None) -> List[Diagnostic]:
    """Check structural invariants, SSA dominance and per-op verifiers.

    Dominance is checked per region with blocks in order: a value is visible
    in every later position of its block, in later blocks of the same region
    and in nested regions. Never raises.
    """
    if registry is None:
        from ..dialects import default_registry
        registry = default_registry()
    diags: List[Diagnostic] = []
    visible: Set[Value] = set()

    def report(op: Operation, msg: str) -> None:
        diags.append(Diagnostic("error", f"'{op.name}' op {msg}", op.loc))

    def visit_op(op: Operation) -> None:
        if op.erased:
            report(op, "is erased but still reachable")
        d = registry.get(op.name)
        if d is None:
            report(op, "is not registered in any dialect")
        else:
            for msg in d.check(op):
                report(op, msg)
        for i, v in enumerate(op.operands):
            if v not in visible:
                report(op, f"operand #{i} does not dominate its use")
        for region in op.regions:
            visit_region(op, region)
        visible.update(op.results)

    def visit_region(owner: Operation, region: Region) -> None:
        added: List[Value] = []
        blocks = set(region.blocks)
        multi = len(region.blocks) > 1
        for block in region.blocks:
            visible.update(block.args)
            added.extend(block.args)
            for op in block.ops:
                visit_op(op)
                added.extend(op.results)
                for succ in op.successors:
                    if succ not in blocks:
                        report(op, "branches to a block outside its region")
            if multi:
                term = block.terminator
                if term is None or not registry.has_trait(term.name, "terminator"):
                    report(owner, "has a block without a terminator")
        visible.difference_update(added)

    visit_op(module)
    return diags


def verify_or_raise(module: Operation, registry=None) -> None:
    from .diagnostics import IRError
    diags = verify_module(module, registry)
    if diags:
        raise IRError(diags[0])
