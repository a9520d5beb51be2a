"""A transform-script interpreter for a small SSA compiler IR.

Payload programs and transform scripts share one textual format. Scripts
steer loop transformations, passes and rewrite patterns over the payload;
the executor runs payload programs and reports a deterministic cost.
"""

from .errors import DefiniteFailure, SilenceableFailure, TransformFailure
from .executor import CostModel, MemRef, execute, results_match
from .interp import ApplyResult, InterpError, Interpreter, apply_script
from .payload import Diagnostic, IRError, parse_ir, parse_payload, print_payload, structurally_equal
from .script import ParamValue, Script, parse_transform
from .static_check import check_static

__version__ = "0.1.0"

__all__ = [
    "DefiniteFailure", "SilenceableFailure", "TransformFailure", "CostModel", "MemRef", "execute",
    "results_match", "ApplyResult", "InterpError", "Interpreter", "apply_script", "Diagnostic", "IRError",
    "parse_ir", "parse_payload", "print_payload", "structurally_equal", "ParamValue", "Script",
    "parse_transform", "check_static",
]
