from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple

SEVERITIES = ("silenceable", "definite", "error", "warning", "remark")


@dataclass
class Diagnostic:
    severity: str
    message: str
    loc: Optional[Tuple[int, int]] = None
    file: Optional[str] = None

    def format(self, file: Optional[str] = None) -> str:
        """Render as ``file:line:col: severity: message``."""
        where = file or self.file or "<input>"
        line, col = self.loc if self.loc else (0, 0)
        return f"{where}:{line}:{col}: {self.severity}: {self.message}"

    def __str__(self) -> str:
        return self.format()


class IRError(Exception):
    """Raised by the parser and other entry points that produce a diagnostic."""

    def __init__(self, diagnostic: Diagnostic):
        super().__init__(diagnostic.message)
        self.diagnostic = diagnostic


def error(message: str, loc=None, severity: str = "error") -> IRError:
    return IRError(Diagnostic(severity, message, loc))
