"""Compile-time overhead of driving a pass pipeline through the interpreter
compared with running it directly through the pass registry."""

from __future__ import annotations

import gc
import statistics
import time
from dataclasses import dataclass
from typing import List

from .interp import apply_script
from .passes.pipeline import parse_pipeline, pipeline_to_transform, run_pipeline
from .payload.core import Operation
from .payload.printer import structurally_equal
from .script import parse_transform


class ModeMismatch(AssertionError):
    """The two execution modes produced different payloads."""


@dataclass
class TimingReport:
    direct: List[float]
    interpreted: List[float]

    @property
    def direct_median(self) -> float:
        return statistics.median(self.direct)

    @property
    def interpreted_median(self) -> float:
        return statistics.median(self.interpreted)

    @property
    def overhead_pct(self) -> float:
        d = self.direct_median
        return 0.0 if d <= 0 else 100.0 * (self.interpreted_median - d) / d

    def summary(self) -> str:
        return (f"direct median {self.direct_median * 1e3:.3f} ms, interpreted median "
                f"{self.interpreted_median * 1e3:.3f} ms, overhead {self.overhead_pct:.2f}% "
                f"({len(self.direct)} runs each)")


def time_pipeline(module: Operation, pipeline: str, reps: int = 5, warmup: int = 1) -> TimingReport:
    """Median wall time of both modes; runs alternate so drift hits both.

    Raises :class:`ModeMismatch` when the outputs differ structurally.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    nodes = parse_pipeline(pipeline)
    script = parse_transform(pipeline_to_transform(nodes))
    direct, interp = [], []
    enabled = gc.isenabled()
    for i in range(warmup + reps):
        a, b = module.clone(), module.clone()
        # collector pauses are the dominant noise at this scale
        gc.collect()
        gc.disable()
        try:
            t0 = time.perf_counter()
            a = run_pipeline(a, nodes)
            t1 = time.perf_counter()
            apply_script(script, b, verify=False)
            t2 = time.perf_counter()
        finally:
            if enabled:
                gc.enable()
        if i == 0 and not structurally_equal(a, b):
            raise ModeMismatch("direct and interpreted pipeline runs produced different payloads")
        if i >= warmup:
            direct.append(t1 - t0)
            interp.append(t2 - t1)
    return TimingReport(direct, interp)
