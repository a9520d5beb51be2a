"""Textual pass pipelines: parsing, direct execution and conversion to a
transform script that performs the same work through the interpreter."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from ..payload.core import Operation
from ..payload.diagnostics import Diagnostic, IRError
from ..payload.rewriter import Rewriter
from .registry import PassRegistry, format_options, parse_options, pass_registry


@dataclass
class PipelineNode:
    name: str
    options: Dict[str, str] = field(default_factory=dict)
    children: Optional[List["PipelineNode"]] = None  # set for anchors like func.func(...)

    @property
    def is_anchor(self) -> bool:
        return self.children is not None

    def __str__(self) -> str:
        if self.is_anchor:
            return f"{self.name}({', '.join(map(str, self.children))})"
        return self.name + (f"{{{format_options(self.options)}}}" if self.options else "")


def _error(msg: str, pos: int) -> IRError:
    return IRError(Diagnostic("error", f"pipeline: {msg} (at offset {pos})", (1, pos + 1)))


class _PipelineParser:
    def __init__(self, text: str):
        self.s = text
        self.i = 0

    def ws(self) -> None:
        while self.i < len(self.s) and self.s[self.i].isspace():
            self.i += 1

    def name(self) -> str:
        self.ws()
        j = self.i
        while self.i < len(self.s) and (self.s[self.i].isalnum() or self.s[self.i] in "-_."):
            self.i += 1
        if j == self.i:
            raise _error("expected a pass or anchor name", self.i)
        return self.s[j:self.i]

    def node(self) -> PipelineNode:
        name = self.name()
        self.ws()
        if self.i < len(self.s) and self.s[self.i] == "(":
            self.i += 1
            children = self.items(")")
            return PipelineNode(name, children=children)
        opts: Dict[str, str] = {}
        if self.i < len(self.s) and self.s[self.i] == "{":
            end = self.s.find("}", self.i)
            if end < 0:
                raise _error("unterminated option block", self.i)
            try:
                opts = parse_options(self.s[self.i + 1:end].replace(" ", ","))
            except Exception as exc:
                raise _error(str(exc), self.i) from None
            self.i = end + 1
        return PipelineNode(name, opts)

    def items(self, close: Optional[str]) -> List[PipelineNode]:
        out: List[PipelineNode] = []
        self.ws()
        if close and self.i < len(self.s) and self.s[self.i] == close:
            self.i += 1
            return out
        if close is None and self.i >= len(self.s):
            return out
        while True:
            out.append(self.node())
            self.ws()
            if self.i < len(self.s) and self.s[self.i] == ",":
                self.i += 1
                continue
            if close is not None:
                if self.i >= len(self.s) or self.s[self.i] != close:
                    raise _error(f"expected '{close}'", self.i)
                self.i += 1
            return out


def parse_pipeline(text: str) -> List[PipelineNode]:
    """Parse ``builtin.module(p1, func.func(p2, p3{k=v}), p4)`` or a bare list."""
    p = _PipelineParser(text.strip())
    nodes = p.items(None)
    p.ws()
    if p.i != len(p.s):
        raise _error("unexpected trailing text", p.i)
    if len(nodes) == 1 and nodes[0].name == "builtin.module" and nodes[0].is_anchor:
        nodes = nodes[0].children
    return nodes


def validate_pipeline(nodes: List[PipelineNode], registry: Optional[PassRegistry] = None) -> None:
    registry = registry or pass_registry()
    for n in nodes:
        if n.is_anchor:
            validate_pipeline(n.children, registry)
        else:
            registry.get(n.name)


def _anchored(root: Operation, name: str) -> List[Operation]:
    return [op for op in root.walk() if op is not root and op.name == name]


def run_pipeline(module: Operation, pipeline, registry: Optional[PassRegistry] = None,
                 rw: Optional[Rewriter] = None) -> Operation:
    """Run the pipeline directly through the pass registry (no interpreter)."""
    registry = registry or pass_registry()
    nodes = parse_pipeline(pipeline) if isinstance(pipeline, str) else pipeline
    validate_pipeline(nodes, registry)
    rw = rw or Rewriter()

    def run(root: Operation, seq: List[PipelineNode]) -> Operation:
        for n in seq:
            if n.is_anchor:
                for target in _anchored(root, n.name):
                    run(target, n.children)
            else:
                root = registry.get(n.name).apply(root, n.options, rw)
        return root

    return run(module, nodes)


def pipeline_to_transform(pipeline, registry: Optional[PassRegistry] = None) -> str:
    """Script text with one apply_registered_pass per pass; anchors become
    structured.match plus passes applied to the matched handle."""
    nodes = parse_pipeline(pipeline) if isinstance(pipeline, str) else pipeline
    validate_pipeline(nodes, registry)
    lines = ["transform.named_sequence @transform_main {", "^bb0(%root: !transform.any_op):"]
    counter = [0]

    def fresh() -> str:
        counter[0] += 1
        return f"%h{counter[0]}"

    def emit(handle: str, seq: List[PipelineNode]) -> str:
        for n in seq:
            if n.is_anchor:
                scoped = fresh()
                lines.append(f"  {scoped} = structured.match({handle}) {{ops = [{json.dumps(n.name)}]}} "
                             f": !transform.any_op")
                emit(scoped, n.children)
            else:
                out = fresh()
                attrs = f"pass = {json.dumps(n.name)}"
                if n.options:
                    attrs += f", options = {json.dumps(format_options(n.options))}"
                lines.append(f"  {out} = transform.apply_registered_pass({handle}) {{{attrs}}} : !transform.any_op")
                handle = out
        return handle

    emit("%root", nodes)
    lines.append("}")
    return "\n".join(lines) + "\n"
