"""Exception types shared across the simulator."""
from __future__ import annotations

from dataclasses import dataclass


class SimError(Exception):
    pass


class InvalidVectorLength(SimError, ValueError):
    pass


class ExecutionError(SimError):
    """Raised for conditions a well-formed program never reaches (bad PC, bad lane index)."""


class MemoryFault(SimError):
    """An access touched an unmapped page. ``address`` is the first unmapped byte."""

    def __init__(self, address: int, element_index: int = 0):
        super().__init__(f"unmapped access at {address:#x} (element {element_index})")
        self.address = address
        self.element_index = element_index


@dataclass(frozen=True)
class Diagnostic:
    line: int
    column: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.column}: {self.message}"


class AssemblyError(SimError):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))
