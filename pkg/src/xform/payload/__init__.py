"""Payload IR: data model, text format, verifier and rewriter."""

from .core import Block, Operation, Region, Sym, Value, erase_op, new_module, op_index, symbol_table
from .diagnostics import Diagnostic, IRError
from .parser import parse_ir
from .printer import print_payload, structural_key, structurally_equal
from .rewriter import RewriteError, RewriteEvent, Rewriter, match_ops, rewrite
from .types import (
    F64, I1, I64, INDEX, PARAM, PTR, ANY_HANDLE, MemRefType, ScalarType, TransformType, Type, parse_type,
)
from .verifier import verify_module


def parse_payload(text: str, registry=None) -> Operation:
    """Parse and verify a payload module; raises :class:`IRError` on failure."""
    module = parse_ir(text)
    diags = verify_module(module, registry)
    if diags:
        raise IRError(diags[0])
    return module


__all__ = [
    "Block", "Operation", "Region", "Sym", "Value", "Diagnostic", "IRError", "RewriteError",
    "RewriteEvent", "Rewriter", "parse_ir", "parse_payload", "print_payload", "verify_module",
    "match_ops", "rewrite", "structural_key", "structurally_equal", "erase_op", "new_module",
    "op_index", "symbol_table", "parse_type", "Type", "ScalarType", "MemRefType",
    "TransformType", "F64", "I1", "I64", "INDEX", "PARAM", "PTR", "ANY_HANDLE",
]
