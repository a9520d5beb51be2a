"""Event-emitting mutation API for payload IR.

Every replace/erase goes through :class:`Rewriter`, which notifies listeners
while the old op is still intact so they can inspect or retarget references.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

from .core import Operation, Value, erase_op, op_index


class RewriteError(Exception):
    """A definite error: the edit referenced an op that is no longer live."""


@dataclass(frozen=True)
class RewriteEvent:
    kind: str  # replaced | erased
    old_op: int
    new_ops: Tuple[int, ...] = ()


Listener = Callable[[RewriteEvent, Operation, List[Operation]], None]


class Rewriter:
    def __init__(self, listeners: Sequence[Listener] = ()):
        self.listeners: List[Listener] = list(listeners)
        self.events: List[RewriteEvent] = []

    def _fire(self, kind: str, old: Operation, new_ops: List[Operation]) -> None:
        event = RewriteEvent(kind, old.id, tuple(o.id for o in new_ops))
        self.events.append(event)
        for listener in self.listeners:
            listener(event, old, new_ops)

    @staticmethod
    def _check_live(op: Operation) -> None:
        if op.erased:
            raise RewriteError(f"edit references erased op {op.name}#{op.id}")

    # -- insertion / motion (not events) --------------------------------
    def insert_before(self, anchor: Operation, op: Operation) -> Operation:
        return anchor.parent.insert_before(anchor, op)

    def insert_after(self, anchor: Operation, op: Operation) -> Operation:
        return anchor.parent.insert_after(anchor, op)

    def move_before(self, op: Operation, anchor: Operation) -> None:
        self._check_live(op)
        op.parent.detach(op)
        anchor.parent.insert_before(anchor, op)

    # -- structural mutations ------------------------------------------
    def erase(self, op: Operation) -> None:
        self._check_live(op)
        self._fire("erased", op, [])
        erase_op(op)

    def replace(self, op: Operation, new_ops: Sequence[Operation],
                new_values: Optional[Sequence[Value]] = None) -> None:
        """Replace ``op`` by ``new_ops`` (inserted before it if detached).

        Results are rewired to ``new_values``, defaulting to the results of the
        last new op.
        """
        self._check_live(op)
        new_ops = list(new_ops)
        for n in new_ops:
            if n.parent is None:
                op.parent.insert_before(op, n)
        if new_values is None:
            new_values = new_ops[-1].results if new_ops else []
        if len(new_values) != len(op.results):
            raise RewriteError(
                f"replacing {op.name} needs {len(op.results)} values, got {len(new_values)}"
            )
        for old, new in zip(op.results, new_values):
            old.replace_all_uses_with(new)
        self._fire("replaced", op, new_ops)
        erase_op(op)

    def replace_with_values(self, op: Operation, values: Sequence[Value]) -> None:
        """Replace ``op`` by existing values; the event names their defining ops."""
        self._check_live(op)
        owners: List[Operation] = []
        for v in values:
            d = v.defining_op
            if d is not None and d not in owners:
                owners.append(d)
        for old, new in zip(op.results, values):
            old.replace_all_uses_with(new)
        self._fire("replaced", op, owners)
        erase_op(op)


Edit = Union[Tuple[str, object], Tuple[str, object, Sequence[Operation]]]


def rewrite(module: Operation, edits: Sequence[Edit], listeners: Sequence[Listener] = ()) -> Operation:
    """Apply ``("erase", op)`` / ``("replace", op, [new ops])`` edits in order.

    Ops may be given as objects or ids.
    """
    rw = Rewriter(listeners)
    index = None
    for edit in edits:
        kind, target = edit[0], edit[1]
        if isinstance(target, int):
            if index is None:
                index = op_index(module)
            op = index.get(target)
            if op is None:
                raise RewriteError(f"edit references unknown or erased op id {target}")
        else:
            op = target
        if kind == "erase":
            rw.erase(op)
        elif kind == "replace":
            rw.replace(op, edit[2])
        else:
            raise ValueError(f"unknown edit kind {kind!r}")
    return module


def match_ops(scope: Operation, expr, registry=None) -> List[Operation]:
    """Preorder list of ops under ``scope`` (inclusive) whose name is in ``expr``."""
    from ..dialects import OpSetExpr, atom_matches, check_atom, default_registry

    registry = registry or default_registry()
    expr = OpSetExpr.parse(expr)
    for atom in expr.atoms:
        check_atom(atom, registry)
    return [op for op in scope.walk() if any(atom_matches(op.name, a, registry) for a in expr.atoms)]
