"""Error classes shared by transforms, passes and the interpreter."""

from __future__ import annotations

from typing import Optional, Tuple


class TransformFailure(Exception):
    severity = "definite"

    def __init__(self, message: str, loc: Optional[Tuple[int, int]] = None,
                 payload_loc: Optional[Tuple[int, int]] = None):
        super().__init__(message)
        self.message = message
        self.loc = loc  # location in the transform script
        self.payload_loc = payload_loc


class SilenceableFailure(TransformFailure):
    """Recoverable failure: unwinds to the nearest handler region."""

    severity = "silenceable"


class DefiniteFailure(TransformFailure):
    """Unrecoverable failure: aborts interpretation."""

    severity = "definite"
