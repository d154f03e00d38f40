"""Operand, instruction and program value types produced by the assembler."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

SUFFIX = {8: "b", 16: "h", 32: "s", 64: "d"}
ESIZE = {v: k for k, v in SUFFIX.items()}

XZR = 31
SP = 32


def _imm_text(value: int) -> str:
    return str(value) if -4096 < value < 4096 else (f"{value:#x}" if value >= 0 else f"-{-value:#x}")


@dataclass(frozen=True)
class GReg:
    n: int  # 0-30, XZR, SP

    def __str__(self):
        return {XZR: "xzr", SP: "sp"}.get(self.n, f"x{self.n}")


@dataclass(frozen=True)
class DReg:
    n: int

    def __str__(self):
        return f"d{self.n}"


@dataclass(frozen=True)
class ZReg:
    n: int
    esize: Optional[int] = None
    lane: Optional[int] = None

    def __str__(self):
        s = f"z{self.n}"
        if self.esize is not None:
            s += "." + SUFFIX[self.esize]
        if self.lane is not None:
            s += f"[{self.lane}]"
        return s


@dataclass(frozen=True)
class PReg:
    n: int
    esize: Optional[int] = None
    qual: Optional[str] = None  # "z", "m" or None

    def __str__(self):
        s = f"p{self.n}"
        if self.esize is not None:
            s += "." + SUFFIX[self.esize]
        if self.qual is not None:
            s += "/" + self.qual
        return s


@dataclass(frozen=True)
class Imm:
    value: int

    def __str__(self):
        return "#" + _imm_text(self.value)


@dataclass(frozen=True)
class Mem:
    base: Union[GReg, ZReg]
    offset: Optional[int] = None
    index: Optional[GReg] = None
    shift: Optional[int] = None

    def __str__(self):
        parts = [str(self.base)]
        if self.index is not None:
            parts.append(str(self.index))
            if self.shift is not None:
                parts.append(f"lsl #{self.shift}")
        elif self.offset is not None:
            parts.append("#" + _imm_text(self.offset))
        return "[" + ", ".join(parts) + "]"


@dataclass(frozen=True)
class Label:
    name: str
    target: Optional[int] = None  # instruction index, or byte address for data labels

    def __str__(self):
        return self.name


Operand = Union[GReg, DReg, ZReg, PReg, Imm, Mem, Label]


@dataclass(frozen=True)
class Instruction:
    mnemonic: str
    op: str
    esize: Optional[int]
    operands: tuple
    line: int = field(default=0, compare=False)

    def __str__(self):
        if not self.operands:
            return self.mnemonic
        return f"{self.mnemonic} " + ", ".join(str(o) for o in self.operands)


@dataclass(frozen=True)
class Program:
    instructions: tuple = ()
    labels: dict = field(default_factory=dict)
    data_labels: dict = field(default_factory=dict)
    data_segments: tuple = ()  # ((addr, bytes), ...)
    maps: tuple = ()  # ((addr, length), ...)

    def __len__(self):
        return len(self.instructions)

    def entry_index(self, label: Optional[str]) -> int:
        if label is None:
            return 0
        if label not in self.labels:
            raise KeyError(f"unknown entry label {label!r}")
        return self.labels[label]
