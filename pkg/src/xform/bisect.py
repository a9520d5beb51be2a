"""Locate the rewrite pattern responsible for a cost regression.

A probe applies the (optional) base script and then the candidate pattern
subset to a fresh copy of the payload and measures weighted cost.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from .executor import default_args, execute
from .interp import apply_script
from .payload.core import Operation
from .script import Script, parse_transform


def patterns_script(patterns: Sequence[str]) -> str:
    return (
        "transform.named_sequence @transform_main {\n"
        "^bb0(%root: !transform.any_op):\n"
        f"  transform.apply_patterns(%root) {{patterns = {json.dumps(list(patterns))}}}\n"
        "}\n"
    )


class CostProbe:
    """Cost of the payload after the base script and a pattern subset."""

    def __init__(self, module: Operation, base: Optional[Script] = None, entry: str = "main",
                 args: Optional[Sequence] = None):
        self.module = module
        self.base = base
        self.entry = entry
        self.args = list(args) if args is not None else default_args(module, entry)

    def __call__(self, patterns: Sequence[str]) -> float:
        payload = self.module.clone()
        if self.base is not None:
            apply_script(self.base, payload)
        apply_script(parse_transform(patterns_script(patterns)), payload)
        return float(execute(payload, self.entry, self.args)[1].weighted_cost)


@dataclass
class BisectResult:
    culprit: Optional[str]
    probes: int
    reference_cost: float
    log: List[tuple] = field(default_factory=list)  # (removed patterns, cost)


def bisect_patterns(patterns: Sequence[str], probe: Callable[[Sequence[str]], float]) -> BisectResult:
    """Halve the candidate set, keeping the half whose removal lowers the
    cost below the full set's. The full-set reference run is not a probe."""
    patterns = list(patterns)
    ref = probe(patterns)
    result = BisectResult(None, 0, ref)

    def cost_without(removed: List[str]) -> float:
        result.probes += 1
        c = probe([p for p in patterns if p not in removed])
        result.log.append((tuple(removed), c))
        return c

    candidates = list(patterns)
    confirmed = False  # removing all of ``candidates`` is known to help
    while candidates:
        if len(candidates) == 1:
            if confirmed or cost_without(candidates) < ref:
                result.culprit = candidates[0]
            return result
        half = len(candidates) // 2
        first, second = candidates[:half], candidates[half:]
        if cost_without(first) < ref:
            candidates = first
        elif cost_without(second) < ref:
            candidates = second
        else:
            return result  # no single culprit: removing either half leaves the regression
        confirmed = True
    return result


def leave_one_out(patterns: Sequence[str], probe: Callable[[Sequence[str]], float]) -> Dict[str, float]:
    """Cost with each pattern removed in turn (the exhaustive oracle)."""
    return {p: probe([q for q in patterns if q != p]) for p in patterns}
