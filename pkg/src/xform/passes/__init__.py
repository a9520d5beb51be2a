"""Passes, rewrite patterns and pipelines."""

from .lowering import LEGALIZE_CAST_MSG, LOWERING_PIPELINE, builtin_passes
from .patterns import CANONICAL, PATTERNS, REWRITE_CAP, apply_patterns
from .pipeline import PipelineNode, parse_pipeline, pipeline_to_transform, run_pipeline
from .registry import Pass, PassFailure, PassRegistry, format_options, parse_options, pass_registry

__all__ = [
    "LEGALIZE_CAST_MSG", "LOWERING_PIPELINE", "builtin_passes", "CANONICAL", "PATTERNS", "REWRITE_CAP",
    "apply_patterns", "PipelineNode", "parse_pipeline", "pipeline_to_transform", "run_pipeline", "Pass",
    "PassFailure", "PassRegistry", "format_options", "parse_options", "pass_registry",
]
