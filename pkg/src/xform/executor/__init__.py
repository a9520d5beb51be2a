"""Deterministic reference executor and cost model for payload programs."""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from ..payload.core import Operation, symbol_table
from ..payload.types import MemRefType, PtrType
from .codegen import ModuleCompiler
from .runtime import ExecError, ExecResult, MemRef, results_match

DEFAULT_STEP_LIMIT = 10 ** 8


@dataclass
class CostModel:
    weights: Dict[str, Fraction] = field(default_factory=dict)  # missing ops weigh 1
    vector_width: int = 8
    kernel_alpha: Fraction = Fraction(1, 20)

    def __post_init__(self):
        if self.vector_width < 1:
            raise ValueError("vector_width must be >= 1")
        if Fraction(self.kernel_alpha) <= 0:
            raise ValueError("kernel_alpha must be > 0")
        if any(Fraction(w) < 0 for w in self.weights.values()):
            raise ValueError("op weights must be >= 0")
        self.kernel_alpha = Fraction(self.kernel_alpha)
        self.weights = {k: Fraction(v) for k, v in self.weights.items()}


_current = CostModel()


def set_cost_weights(weights: Optional[Dict[str, Fraction]] = None, vector_width: int = 8,
                     kernel_alpha=Fraction(1, 20)) -> None:
    """Configure the process-wide cost model used when ``execute`` gets none."""
    global _current
    _current = CostModel(dict(weights or {}), vector_width, Fraction(kernel_alpha))


def current_cost_model() -> CostModel:
    return _current


@dataclass
class CostReport:
    ops_executed: int
    weighted_cost: Fraction
    per_op_histogram: Dict[str, int]

    def to_json(self) -> str:
        return json.dumps({
            "ops_executed": self.ops_executed,
            "weighted_cost": float(self.weighted_cost),
            "weighted_cost_exact": str(self.weighted_cost),
            "per_op_histogram": dict(sorted(self.per_op_histogram.items())),
        }, sort_keys=False)


def _entry_name(entry) -> str:
    return str(entry).lstrip("@")


def _convert_args(func: Operation, args: Sequence) -> Tuple[list, list]:
    params = func.regions[0].blocks[0].args
    if len(params) != len(args):
        raise ExecError(f"@{func.attributes['sym_name']} expects {len(params)} arguments, got {len(args)}")
    converted, buffers = [], []
    for p, a in zip(params, args):
        if isinstance(p.type, (MemRefType, PtrType)):
            if not isinstance(a, MemRef):
                raise ExecError(f"argument of type {p.type} needs a memref value")
            a = a.copy()
            buffers.append(a.buf)
            if isinstance(p.type, MemRefType):
                if len(a.sizes) != p.type.rank:
                    raise ExecError(f"argument rank {len(a.sizes)} does not match {p.type}")
                converted.append(a.as_tuple())
            else:
                converted.append((a.buf, a.offset))
        elif isinstance(a, MemRef):
            raise ExecError(f"argument of type {p.type} cannot be a memref")
        else:
            converted.append(a)
    return converted, buffers


def execute(module: Operation, entry="main", args: Sequence = (), cost_model: Optional[CostModel] = None,
            step_limit: int = DEFAULT_STEP_LIMIT) -> Tuple[ExecResult, CostReport]:
    """Run ``entry`` on copies of ``args``; returns results and the cost report.

    Raises :class:`ExecError` for out-of-bounds accesses, step-limit overruns
    and ops outside the executable subset.
    """
    cm = cost_model or _current
    name = _entry_name(entry)
    compiler = ModuleCompiler(module, cm.weights, cm.vector_width, cm.kernel_alpha, step_limit)
    ns = compiler.compile(name)
    counts = [0] * len(compiler.blocks)
    ns.update(_C=counts, _S=[0], _VC=[0], _KC=[Fraction(0)], _CALLS=[])
    converted, buffers = _convert_args(symbol_table(module)[name], args)
    try:
        returns = ns[compiler.fn_names[name]](*converted)
    except RecursionError as exc:
        raise ExecError("call depth exceeded") from exc
    returns = tuple(
        MemRef(list(r[0]), r[2], r[3], r[1]) if isinstance(r, tuple) and len(r) == 4 else r for r in returns
    )
    hist: Counter = Counter()
    weighted = Fraction(0)
    for c, info in zip(counts, compiler.blocks):
        if not c:
            continue
        for op_name, n in info.names.items():
            hist[op_name] += c * n
        if not info.vectorized:
            weighted += c * info.weight
    weighted += ns["_VC"][0] + ns["_KC"][0]
    report = CostReport(sum(hist.values()), weighted, dict(sorted(hist.items())))
    return ExecResult(returns, buffers, list(ns["_CALLS"])), report


def default_args(module: Operation, entry="main", seed: int = 0) -> list:
    """Deterministic arguments for ``entry``: seeded values in memrefs of the
    declared static shape, 0 for scalars."""
    import random

    rng = random.Random(seed)
    func = symbol_table(module).get(_entry_name(entry))
    if func is None:
        raise ExecError(f"no function @{_entry_name(entry)}")
    out = []
    for a in func.regions[0].blocks[0].args:
        t = a.type
        if isinstance(t, MemRefType):
            if any(d is None for d in t.shape):
                raise ExecError(f"cannot synthesize an argument of dynamic type {t}")
            n = 1
            for d in t.shape:
                n *= d
            if str(t.element) == "f64":
                vals = [rng.uniform(-1.0, 1.0) for _ in range(n)]
            else:
                vals = [rng.randint(-8, 8) for _ in range(n)]
            out.append(MemRef(vals, t.shape))
        elif str(t) == "f64":
            out.append(0.0)
        else:
            out.append(0)
    return out


def generated_source(module: Operation, entry="main") -> str:
    """The Python source the executor would run (debugging aid)."""
    cm = _current
    compiler = ModuleCompiler(module, cm.weights, cm.vector_width, cm.kernel_alpha, DEFAULT_STEP_LIMIT)
    compiler.compile(_entry_name(entry))
    return "\n".join(compiler.source)


__all__ = [
    "CostModel", "CostReport", "ExecError", "ExecResult", "MemRef", "execute", "set_cost_weights",
    "current_cost_model", "results_match", "default_args", "generated_source", "DEFAULT_STEP_LIMIT",
]
