"""Payload transformations and the builtin transform op vocabulary."""

from .loops import (
    KernelDef, hoist_invariants, interchange, match_matmul, parse_kernel_registry, split, tile, to_library,
    trip_count, unroll, vectorize_marker,
)

__all__ = [
    "KernelDef", "hoist_invariants", "interchange", "match_matmul", "parse_kernel_registry", "split", "tile",
    "to_library", "trip_count", "unroll", "vectorize_marker",
]
