from .operands import DReg, GReg, Imm, Instruction, Label, Mem, PReg, Program, ZReg, SP, XZR
from .parser import assemble, format_instruction, format_program

__all__ = [
    "assemble", "format_instruction", "format_program",
    "Program", "Instruction", "GReg", "DReg", "ZReg", "PReg", "Imm", "Mem", "Label", "SP", "XZR",
]
