"""Sequential interpreter for transform scripts.

The interpreter keeps the association between script handles and payload
ops, invalidates handles when their payload may have been destroyed, unwinds
silenceable failures to the nearest ``transform.alternatives`` (restoring a
snapshot of the payload) and aborts on definite failures.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .conditions import ConditionSignature, check_dynamic
from .errors import DefiniteFailure, SilenceableFailure, TransformFailure
from .payload.core import Operation, Value, op_index, symbol_table
from .payload.diagnostics import Diagnostic
from .payload.rewriter import RewriteEvent, Rewriter
from .payload.types import TransformType
from .payload.verifier import verify_module
from .script import ParamValue, Script, TransformRegistry, callee_of, operand_consumed, transform_registry
from .transforms.loops import KernelDef


def _loc_text(loc) -> str:
    return f"line {loc[0]}" if loc else "unknown location"


def _handle_name(v: Value) -> str:
    return "%" + (v.hint or "?")


@dataclass
class Invalidation:
    by: str  # transform op name
    loc: Optional[Tuple[int, int]]

    def describe(self) -> str:
        return f"'{self.by}' at {_loc_text(self.loc)}"


class InterpError(Exception):
    """A failure escaping the interpreter; ``severity`` is silenceable or definite."""

    def __init__(self, severity: str, message: str, loc=None, payload_loc=None, trace=None):
        super().__init__(message)
        self.severity = severity
        self.message = message
        self.loc = loc
        self.payload_loc = payload_loc
        self.trace = trace or []

    def diagnostic(self) -> Diagnostic:
        return Diagnostic("error" if self.severity == "definite" else "silenceable", self.message, self.loc)


@dataclass
class TraceEntry:
    op: str
    loc: Optional[Tuple[int, int]]
    operands: List[object]
    result_handles: List[object]
    status: str

    def to_json(self) -> str:
        return json.dumps({
            "op": self.op, "loc": list(self.loc) if self.loc else None, "operands": self.operands,
            "result_handles": self.result_handles, "status": self.status,
        })


@dataclass
class TransformState:
    handles: Dict[Value, List[Operation]] = field(default_factory=dict)
    params: Dict[Value, ParamValue] = field(default_factory=dict)
    invalidated: Dict[Value, Invalidation] = field(default_factory=dict)

    def bind(self, v: Value, item) -> None:
        self.invalidated.pop(v, None)
        if isinstance(item, ParamValue):
            self.params[v] = item
            self.handles.pop(v, None)
        else:
            self.handles[v] = list(item)
            self.params.pop(v, None)

    def live_handles(self):
        return [(v, ops) for v, ops in self.handles.items() if v not in self.invalidated]

    def snapshot(self):
        return ({v: [o.id for o in ops] for v, ops in self.handles.items()}, dict(self.params),
                dict(self.invalidated))

    def restore(self, snap, index: Dict[int, Operation]) -> None:
        handles, params, inval = snap
        self.handles = {v: [index[i] for i in ids if i in index] for v, ids in handles.items()}
        self.params = dict(params)
        self.invalidated = dict(inval)

    def drop_values(self, values: Sequence[Value]) -> None:
        for v in values:
            self.handles.pop(v, None)
            self.params.pop(v, None)
            self.invalidated.pop(v, None)


def _inside(op: Operation, root_ids: Set[int]) -> bool:
    """Is ``op`` one of the roots or nested in one of them?"""
    cur = op
    while cur is not None:
        if cur.id in root_ids:
            return True
        cur = cur.parent_op
    return False


def invalidate(state: TransformState, handle: Value, by: Invalidation,
               subtree_ids: Optional[Set[int]] = None) -> List[Value]:
    """Invalidate ``handle`` and every handle pointing into the payload
    subtrees of its ops. Returns the newly invalidated handles."""
    if subtree_ids is None:
        subtree_ids = {o.id for root in state.handles.get(handle, []) for o in root.walk()}
    hit = []
    for v, ops in state.handles.items():
        if v in state.invalidated:
            continue
        if v is handle or any(o.id in subtree_ids for o in ops):
            state.invalidated[v] = by
            hit.append(v)
    return hit


class _Yield(Exception):
    pass


@dataclass
class ApplyResult:
    module: Operation
    trace: List[TraceEntry]
    diagnostics: List[Diagnostic]


class Interpreter:
    def __init__(self, script: Script, module: Operation, extern_params: Optional[Dict[str, object]] = None,
                 kernels: Sequence[KernelDef] = (), registry: Optional[TransformRegistry] = None,
                 passes=None, check_dynamic: bool = False, verify: bool = True):
        from .passes.registry import pass_registry

        self.script = script
        self.module = module
        self.extern = dict(extern_params or {})
        self.kernels = list(kernels)
        self.registry = registry or transform_registry()
        self.passes = passes or pass_registry()
        self.check_dynamic = check_dynamic
        self.verify = verify
        self.state = TransformState()
        self.trace: List[TraceEntry] = []
        self.diagnostics: List[Diagnostic] = []
        self.rw = Rewriter([self.on_rewrite_event])
        self._tracked: Optional[Set[int]] = None  # ids of ops held by live handles, rebuilt lazily
        self.sequences = {k: v for k, v in symbol_table(script.module).items()
                          if v.name == "transform.named_sequence"}

    # -- listener --------------------------------------------------------
    def on_rewrite_event(self, event: RewriteEvent, old: Operation, new_ops: List[Operation]) -> None:
        """Retarget handles to a single replacement op, otherwise drop the op."""
        if self._tracked is None:
            self._tracked = {id(o) for v, ops in self.state.live_handles() for o in ops}
        if id(old) not in self._tracked:
            return
        self._tracked = None
        for v, ops in self.state.handles.items():
            if v in self.state.invalidated:
                continue
            for i, o in enumerate(ops):
                if o is old:
                    if event.kind == "replaced" and len(new_ops) == 1:
                        ops[i] = new_ops[0]
                    else:
                        del ops[i]
                    break

    def _prune_erased(self) -> None:
        for v, ops in self.state.handles.items():
            if any(o.erased for o in ops):
                ops[:] = [o for o in ops if not o.erased]

    # -- entry -----------------------------------------------------------
    def run(self, entry: str = "transform_main") -> ApplyResult:
        seq = self.script.entry(entry)
        args = seq.body.args
        bound = []
        for i, a in enumerate(args):
            if isinstance(a.type, TransformType) and a.type.kind == "param":
                name = a.hint or f"arg{i}"
                if name not in self.extern:
                    raise InterpError("definite", f"no value supplied for script parameter %{name}", seq.loc)
                bound.append(ParamValue.of(self.extern[name]))
            elif i == 0:
                bound.append([self.module])
            else:
                raise InterpError("definite", f"cannot bind handle argument %{a.hint} of @{entry}", seq.loc)
        try:
            self._run_sequence(seq, bound)
        except SilenceableFailure as exc:
            raise InterpError("silenceable", exc.message, exc.loc, exc.payload_loc, self.trace) from None
        except TransformFailure as exc:
            raise InterpError("definite", exc.message, exc.loc, exc.payload_loc, self.trace) from None
        if self.verify:
            diags = verify_module(self.module)
            if diags:
                raise InterpError("definite", f"payload fails verification after transforms: {diags[0].message}",
                                  None, diags[0].loc, self.trace)
        return ApplyResult(self.module, self.trace, self.diagnostics)

    def _run_sequence(self, seq: Operation, bound: Sequence[object]) -> List[object]:
        block = seq.body
        for a, item in zip(block.args, bound):
            self.state.bind(a, item)
        return self._run_block(block)

    def _run_block(self, block) -> List[object]:
        try:
            for op in block.ops:
                self.dispatch(op)
        except _Yield as y:
            return y.args[0]
        return []

    # -- dispatch ----------------------------------------------------------
    def _resolve(self, op: Operation) -> List[object]:
        args = []
        for v in op.operands:
            inv = self.state.invalidated.get(v)
            if inv is not None:
                raise DefiniteFailure(
                    f"use of invalidated handle {_handle_name(v)} by '{op.name}'; "
                    f"it was invalidated by {inv.describe()}", op.loc)
            if v in self.state.params:
                args.append(self.state.params[v])
            elif v in self.state.handles:
                args.append(self.state.handles[v])
            else:
                raise DefiniteFailure(f"handle {_handle_name(v)} has no payload association", op.loc)
        return args

    @staticmethod
    def _describe(item) -> object:
        if isinstance(item, ParamValue):
            return {"param": list(item.value) if item.kind == "int_list" else item.value}
        return [o.id for o in item]

    def dispatch(self, op: Operation) -> None:
        args = self._resolve(op)
        entry = TraceEntry(op.name, op.loc, [self._describe(a) for a in args], [], "ok")
        self.trace.append(entry)
        try:
            results = self._execute(op, args)
        except TransformFailure as exc:
            entry.status = exc.severity
            if exc.loc is None:
                exc.loc = op.loc
            raise
        except _Yield:
            raise
        entry.result_handles = [self._describe(r) for r in results]

    def _execute(self, op: Operation, args: List[object]) -> List[object]:
        name = op.name
        if name == "transform.yield":
            raise _Yield(list(args))
        if name == "transform.include":
            return self._include(op, args)
        if name == "transform.alternatives":
            return self._alternatives(op, args)
        if name == "transform.sequence":
            return self._sequence(op, args)
        d = self.registry.get(name)
        if d is None or d.apply is None:
            raise DefiniteFailure(f"transform op '{name}' cannot be executed", op.loc)

        consumed = [i for i in range(len(op.operands)) if operand_consumed(op, i, self.registry)]
        # handles aliasing the consumed payload are determined before the payload changes
        roots = {o.id for i in consumed for o in args[i]}
        doomed = [v for v, ops in self.state.live_handles()
                  if any(_inside(o, roots) for o in ops)] + [op.operands[i] for i in consumed]

        sig = self._signature(op)
        if self.check_dynamic and sig is not None:
            self._check(sig, "before", op)
        self._tracked = None
        results = d.apply(self, op, args)
        if len(results) != len(op.results):
            raise DefiniteFailure(f"'{name}' produced {len(results)} results, expected {len(op.results)}", op.loc)
        by = Invalidation(name, op.loc)
        for v in doomed:
            if v not in self.state.invalidated:
                self.state.invalidated[v] = by
        for r, item in zip(op.results, results):
            self.state.bind(r, item)
        self._prune_erased()
        if self.check_dynamic and sig is not None:
            self._check(sig, "after", op)
        return results

    def _signature(self, op: Operation) -> Optional[ConditionSignature]:
        if op.name == "transform.apply_registered_pass":
            p = self.passes.passes.get(str(op.attributes.get("pass")))
            return None if p is None or p.neutral else p.signature
        d = self.registry.get(op.name)
        return d.condition if d is not None and d.payload_effect else None

    def _check(self, sig: ConditionSignature, stage: str, op: Operation) -> None:
        label = op.name if op.name != "transform.apply_registered_pass" else str(op.attributes.get("pass"))
        for diag in check_dynamic(self.module, sig, stage, label):
            diag.loc = op.loc
            self.diagnostics.append(diag)

    # -- control ops -------------------------------------------------------
    def _include(self, op: Operation, args: List[object]) -> List[object]:
        callee = self.sequences.get(callee_of(op))
        if callee is None:
            raise DefiniteFailure(f"include of undefined sequence @{callee_of(op)}", op.loc)
        inner = [r for o in callee.nested_ops() for r in o.results]
        self.state.drop_values(inner)
        consumed = [i for i in range(len(op.operands)) if operand_consumed(op, i, self.registry)]
        subtree = {o.id for i in consumed for root in args[i] for o in root.walk()}
        results = self._run_sequence(callee, [list(a) if isinstance(a, list) else a for a in args])
        by = Invalidation(op.name + " @" + callee_of(op), op.loc)
        for i in consumed:
            inv = self.state.invalidated.get(callee.body.args[i])
            invalidate(self.state, op.operands[i], inv or by, subtree)
        self.state.drop_values(list(callee.body.args) + inner)
        for r, item in zip(op.results, results):
            self.state.bind(r, item)
        self._prune_erased()
        if len(results) != len(op.results):
            raise DefiniteFailure(f"@{callee_of(op)} yields {len(results)} values, include expects "
                                  f"{len(op.results)}", op.loc)
        return results

    def _region_args(self, block, args) -> List[object]:
        if not block.args:
            return []
        if not args:
            raise DefiniteFailure("region expects a handle but the op has no operand", None)
        return [args[0]]

    def _sequence(self, op: Operation, args: List[object]) -> List[object]:
        block = op.regions[0].blocks[0]
        mode = op.attributes.get("failures", "propagate")
        try:
            results = self._run_sequence_block(block, self._region_args(block, args))
        except SilenceableFailure as exc:
            if mode != "suppress":
                raise
            self.diagnostics.append(Diagnostic("warning", f"suppressed: {exc.message}", exc.loc))
            results = [[] for _ in op.results]
        for r, item in zip(op.results, results):
            self.state.bind(r, item)
        return results

    def _run_sequence_block(self, block, bound) -> List[object]:
        for a, item in zip(block.args, bound):
            self.state.bind(a, item)
        return self._run_block(block)

    def _alternatives(self, op: Operation, args: List[object]) -> List[object]:
        snapshot = self.module.clone(keep_ids=True)
        saved = self.state.snapshot()
        last: Optional[SilenceableFailure] = None
        for k, region in enumerate(op.regions):
            if not region.blocks:
                results = []
            else:
                block = region.blocks[0]
                try:
                    results = self._run_sequence_block(block, self._region_args(block, args))
                except SilenceableFailure as exc:
                    last = exc
                    self._restore(snapshot, saved)
                    continue
            if len(results) != len(op.results):
                if results or op.results:
                    raise DefiniteFailure(
                        f"alternatives region #{k} yields {len(results)} values, expected {len(op.results)}", op.loc)
            for r, item in zip(op.results, results):
                self.state.bind(r, item)
            return results
        raise SilenceableFailure(
            "all alternatives failed" + (f"; last error: {last.message}" if last else ""), op.loc)

    def _restore(self, snapshot: Operation, saved) -> None:
        fresh = snapshot.clone(keep_ids=True)
        self.module.regions = []
        for region in fresh.regions:
            self.module.add_region(region)
        fresh.regions = []
        self.state.restore(saved, op_index(self.module))


def apply_script(script: Script, module: Operation, extern_params: Optional[Dict[str, object]] = None,
                 kernels: Sequence[KernelDef] = (), check_dynamic: bool = False, entry: str = "transform_main",
                 verify: bool = True) -> ApplyResult:
    """Run ``@transform_main`` (or ``entry``) of ``script`` on ``module`` in place.

    Raises :class:`InterpError` when a failure escapes the script.
    """
    interp = Interpreter(script, module, extern_params, kernels, check_dynamic=check_dynamic, verify=verify)
    return interp.run(entry)
