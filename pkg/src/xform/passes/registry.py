"""Pass registry, option strings and the direct pass manager."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

from ..conditions import ConditionSignature
from ..dialects import RegistryError
from ..errors import DefiniteFailure, SilenceableFailure
from ..payload.core import Operation
from ..payload.rewriter import Rewriter


class PassFailure(SilenceableFailure):
    """A pass reported that it could not complete on its input."""


PassFn = Callable[[Operation, Dict[str, str], Rewriter], Optional[Operation]]


@dataclass
class Pass:
    name: str
    run: PassFn  # returns the replacement root when the target op itself is replaced
    signature: ConditionSignature = field(default_factory=ConditionSignature)
    options: Sequence[str] = ()
    description: str = ""
    neutral: bool = False  # only rewrites within dialects already present

    def apply(self, target: Operation, options: Dict[str, str], rw: Optional[Rewriter] = None) -> Operation:
        unknown = sorted(set(options) - set(self.options))
        if unknown:
            raise DefiniteFailure(f"pass '{self.name}' has no option '{unknown[0]}'")
        new_root = self.run(target, options, rw or Rewriter())
        return target if new_root is None else new_root


class PassRegistry:
    def __init__(self):
        self.passes: Dict[str, Pass] = {}

    def register(self, p: Pass) -> None:
        if p.name in self.passes:
            raise RegistryError(f"pass '{p.name}' is already registered")
        self.passes[p.name] = p

    def get(self, name: str) -> Pass:
        p = self.passes.get(name)
        if p is None:
            raise DefiniteFailure(f"unknown pass '{name}'")
        return p

    def __contains__(self, name: str) -> bool:
        return name in self.passes

    def names(self) -> List[str]:
        return list(self.passes)


def parse_options(text: str) -> Dict[str, str]:
    """``key=value,key=value`` into a dict; empty text gives no options."""
    out: Dict[str, str] = {}
    for item in (text or "").split(","):
        item = item.strip()
        if not item:
            continue
        if "=" not in item:
            raise DefiniteFailure(f"malformed pass option '{item}' (expected key=value)")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def format_options(options: Dict[str, str]) -> str:
    return ",".join(f"{k}={v}" for k, v in options.items())


_DEFAULT: Optional[PassRegistry] = None


def pass_registry() -> PassRegistry:
    """Process-wide registry with the shipped passes."""
    global _DEFAULT
    if _DEFAULT is None:
        from .lowering import builtin_passes

        reg = PassRegistry()
        for p in builtin_passes():
            reg.register(p)
        _DEFAULT = reg
    return _DEFAULT
