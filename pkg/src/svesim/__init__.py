"""Functional simulator for a scalable-vector ISA subset, with assembler and cross-VL harness."""

# handler modules register their instruction semantics on import
from . import memory, predicates, vectors  # noqa: F401
from .asm import Program, assemble, format_instruction, format_program
from .errors import AssemblyError, Diagnostic, ExecutionError, InvalidVectorLength, MemoryFault
from .harness import ConfigError, DiffReport, ExitReport, RunConfig, diff, run_program
from .machine import (
    LEGAL_VLS, ElementSize, FaultInfo, Flags, MachineState, condition_holds, create_machine,
    execute, predicate_flags, step,
)
from .memory import PAGE_SIZE, MemoryImage

__all__ = [
    "AssemblyError", "ConfigError", "Diagnostic", "DiffReport", "ElementSize", "ExecutionError",
    "ExitReport", "FaultInfo", "Flags", "InvalidVectorLength", "LEGAL_VLS", "MachineState",
    "MemoryFault", "MemoryImage", "PAGE_SIZE", "Program", "RunConfig", "assemble",
    "condition_holds", "create_machine", "diff", "execute", "format_instruction",
    "format_program", "predicate_flags", "run_program", "step",
]
