"""Architectural state, condition flags and the fetch-decode-execute loop.

Vector registers are little-endian byte arrays of ``evl // 8`` octets (lane 0
at the lowest offset). Predicates are boolean arrays with one control bit per
vector byte; an element of ``E`` bytes is active iff bit ``i * E`` is set.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .asm import DReg, Instruction, Mem, Program, SP, XZR
from .asm.forms import CONDITIONS
from .errors import ExecutionError, InvalidVectorLength, MemoryFault
from .fp import f64_bits, f64_from_bits, fma64

MASK64 = (1 << 64) - 1
LEGAL_VLS = tuple(range(128, 2049, 128))


class ElementSize(enum.IntEnum):
    B = 8
    H = 16
    S = 32
    D = 64

    @property
    def nbytes(self) -> int:
        return self.value // 8

    @property
    def suffix(self) -> str:
        return self.name.lower()


def check_vl(bits: int) -> int:
    if not isinstance(bits, (int, np.integer)) or bits % 128 or not 128 <= bits <= 2048:
        raise InvalidVectorLength(f"vector length must be a multiple of 128 in [128, 2048], got {bits!r}")
    return int(bits)


def uint_dtype(esize: int) -> np.dtype:
    return np.dtype(f"<u{esize // 8}")


def int_dtype(esize: int) -> np.dtype:
    return np.dtype(f"<i{esize // 8}")


def lanes(vec: np.ndarray, esize: int) -> np.ndarray:
    """Unsigned element view of a vector (shares memory)."""
    return vec.view(uint_dtype(esize))


def active(pred: np.ndarray, esize: int) -> np.ndarray:
    """Per-element activity of a predicate for the given element size."""
    return pred[:: esize // 8]


def sext(value: int, bits: int) -> int:
    value &= (1 << bits) - 1
    return value - (1 << bits) if value >> (bits - 1) else value


@dataclass(frozen=True)
class Flags:
    n: bool = False
    z: bool = False
    c: bool = False
    v: bool = False

    @property
    def nzcv(self) -> int:
        return self.n << 3 | self.z << 2 | self.c << 1 | self.v

    def __str__(self):
        return "".join(ch.upper() if bit else ch for ch, bit in zip("nzcv", (self.n, self.z, self.c, self.v)))


@dataclass(frozen=True)
class FaultInfo:
    address: int
    element_index: int
    instruction_pc: int
    kind: str = "unmapped"


@dataclass
class TraceRecord:
    pc: int
    text: str
    writes: list = field(default_factory=list)


@dataclass
class MachineState:
    vl: int
    evl: int
    z: list
    p: list
    ffr: np.ndarray
    x: list
    sp: int = 0
    pc: int = 0
    flags: Flags = Flags()
    status: str = "running"
    fault: Optional[FaultInfo] = None
    steps: int = 0
    trace: Optional[list] = None
    _writes: Optional[list] = field(default=None, repr=False)

    @property
    def vbytes(self) -> int:
        return self.evl // 8

    def read_x(self, n: int) -> int:
        if n == XZR:
            return 0
        if n == SP:
            return self.sp
        return self.x[n]

    def write_x(self, n: int, value: int):
        value &= MASK64
        if n == XZR:
            return
        if n == SP:
            self.sp = value
            name = "sp"
        else:
            self.x[n] = value
            name = f"x{n}"
        if self._writes is not None:
            self._writes.append((name, value))

    def read_d_bits(self, n: int) -> int:
        return int(self.z[n][:8].view("<u8")[0])

    def read_d(self, n: int) -> float:
        return f64_from_bits(self.read_d_bits(n))

    def write_d_bits(self, n: int, bits: int):
        """Scalar writes to Dn zero the rest of Zn."""
        vec = np.zeros(self.vbytes, dtype=np.uint8)
        vec[:8] = np.frombuffer((bits & MASK64).to_bytes(8, "little"), dtype=np.uint8)
        self.set_z(n, vec)

    def write_d(self, n: int, value: float):
        self.write_d_bits(n, f64_bits(value))

    def set_z(self, n: int, vec: np.ndarray):
        assert vec.dtype == np.uint8 and len(vec) == self.vbytes
        self.z[n] = vec
        if self._writes is not None:
            self._writes.append((f"z{n}", vec.tobytes().hex()))

    def set_p(self, n: int, pred: np.ndarray):
        assert pred.dtype == np.bool_ and len(pred) == self.vbytes
        self.p[n] = pred
        if self._writes is not None:
            self._writes.append((f"p{n}", pred_hex(pred)))

    def set_ffr(self, pred: np.ndarray):
        self.ffr = pred
        if self._writes is not None:
            self._writes.append(("ffr", pred_hex(pred)))

    def set_flags(self, flags: Flags):
        self.flags = flags
        if self._writes is not None:
            self._writes.append(("nzcv", flags.nzcv))


def pred_hex(pred: np.ndarray) -> str:
    """Predicate bits as hex, bit i of the integer governs vector byte i."""
    return f"{int(''.join('1' if b else '0' for b in pred[::-1]) or '0', 2):#x}"


def create_machine(impl_vl: int, effective_vl: Optional[int] = None) -> MachineState:
    vl = check_vl(impl_vl)
    evl = vl if effective_vl is None else check_vl(effective_vl)
    if evl > vl:
        raise InvalidVectorLength(f"effective vector length {evl} exceeds implemented {vl}")
    nbytes = evl // 8
    return MachineState(
        vl=vl,
        evl=evl,
        z=[np.zeros(nbytes, dtype=np.uint8) for _ in range(32)],
        p=[np.zeros(nbytes, dtype=np.bool_) for _ in range(16)],
        ffr=np.zeros(nbytes, dtype=np.bool_),
        x=[0] * 31,
    )


def predicate_flags(result: np.ndarray, governing: np.ndarray, esize: int) -> Flags:
    """NZCV for a predicate result, relative to the governing predicate's active elements."""
    if len(result) != len(governing):
        raise ValueError("predicate length mismatch")
    g = active(governing, esize)
    r = active(result, esize)
    idx = np.flatnonzero(g)
    if len(idx) == 0:
        return Flags(n=False, z=True, c=True, v=False)
    return Flags(
        n=bool(r[idx[0]]),
        z=not bool(np.any(r & g)),
        c=not bool(r[idx[-1]]),
        v=False,
    )


_CONDITIONS: dict[str, Callable[[Flags], bool]] = {
    "eq": lambda f: f.z,
    "ne": lambda f: not f.z,
    "lt": lambda f: f.n != f.v,
    "ge": lambda f: f.n == f.v,
    "gt": lambda f: not f.z and f.n == f.v,
    "le": lambda f: f.z or f.n != f.v,
    "first": lambda f: f.n,
    "nfrst": lambda f: not f.n,
    "last": lambda f: not f.c,
    "nlast": lambda f: f.c,
    "none": lambda f: f.z,
    "any": lambda f: not f.z,
    "tcont": lambda f: f.n == f.v,
    "tstop": lambda f: f.n != f.v,
}
assert set(_CONDITIONS) == set(CONDITIONS)


def condition_holds(cond: str, flags: Flags) -> bool:
    try:
        return _CONDITIONS[cond](flags)
    except KeyError:
        raise ValueError(f"unknown condition {cond!r}") from None


# Instruction semantics registry. A handler runs one instruction and returns the
# next PC, or None to fall through.
Handler = Callable[[MachineState, Instruction, object], Optional[int]]
SEMANTICS: dict[str, Handler] = {}


def semantics(*ops: str):
    def register(fn: Handler) -> Handler:
        for op in ops:
            SEMANTICS[op] = fn
        return fn
    return register


def effective_address(state: MachineState, mem: Mem) -> int:
    addr = state.read_x(mem.base.n)
    if mem.index is not None:
        addr += state.read_x(mem.index.n) << (mem.shift or 0)
    elif mem.offset is not None:
        addr += mem.offset
    return addr & MASK64


def step(state: MachineState, program: Program, memory) -> MachineState:
    """Execute exactly one instruction."""
    if state.status != "running":
        raise ExecutionError(f"machine is not running (status {state.status})")
    if not 0 <= state.pc < len(program.instructions):
        raise ExecutionError(f"PC {state.pc} outside program of {len(program.instructions)} instructions")
    instr = program.instructions[state.pc]
    handler = SEMANTICS.get(instr.op)
    if handler is None:
        raise ExecutionError(f"no semantics for {instr.op!r}")
    record = None
    if state.trace is not None:
        record = TraceRecord(state.pc, str(instr))
        state._writes = record.writes
    try:
        target = handler(state, instr, memory)
    except MemoryFault as fault:
        state.status = "faulted"
        state.fault = FaultInfo(fault.address, fault.element_index, state.pc)
        target = state.pc
    finally:
        state._writes = None
    state.steps += 1
    if record is not None:
        state.trace.append(record)
    if state.status == "running":
        state.pc = state.pc + 1 if target is None else target
    return state


def execute(state: MachineState, program: Program, memory, max_steps: int = 1_000_000) -> MachineState:
    while state.status == "running":
        if state.steps >= max_steps:
            state.status = "limit_exceeded"
            break
        step(state, program, memory)
    return state


# --- scalar subset ---------------------------------------------------------

def _src(state: MachineState, op) -> int:
    return op.value & MASK64 if hasattr(op, "value") else state.read_x(op.n)


@semantics("mov_x", "mov_imm")
def _mov(state, instr, memory):
    state.write_x(instr.operands[0].n, _src(state, instr.operands[1]))


@semantics("add_x", "add_imm")
def _add(state, instr, memory):
    d, n, m = instr.operands
    state.write_x(d.n, state.read_x(n.n) + _src(state, m))


@semantics("sub_x", "sub_imm")
def _sub(state, instr, memory):
    d, n, m = instr.operands
    state.write_x(d.n, state.read_x(n.n) - _src(state, m))


def subtract_flags(a: int, b: int) -> Flags:
    """AArch64 NZCV for a - b on 64-bit operands."""
    result = (a - b) & MASK64
    sa, sb, sr = sext(a, 64), sext(b, 64), sext(result, 64)
    return Flags(
        n=bool(result >> 63),
        z=result == 0,
        c=a >= b,
        v=(sa - sb) != sr,
    )


@semantics("cmp_x", "cmp_imm")
def _cmp(state, instr, memory):
    n, m = instr.operands
    state.set_flags(subtract_flags(state.read_x(n.n), _src(state, m)))


@semantics("adr")
def _adr(state, instr, memory):
    state.write_x(instr.operands[0].n, instr.operands[1].target)


@semantics("ldr_x", "ldr_d", "ldrsw", "ldrb")
def _load(state, instr, memory):
    dst, mem = instr.operands
    size = {"ldr_x": 8, "ldr_d": 8, "ldrsw": 4, "ldrb": 1}[instr.op]
    value = int.from_bytes(memory.read_bytes(effective_address(state, mem), size), "little")
    if instr.op == "ldrsw":
        value = sext(value, 32)
    if isinstance(dst, DReg):
        state.write_d_bits(dst.n, value)
    else:
        state.write_x(dst.n, value)


@semantics("str_x", "str_d")
def _store(state, instr, memory):
    src, mem = instr.operands
    value = state.read_d_bits(src.n) if isinstance(src, DReg) else state.read_x(src.n)
    memory.write_bytes(effective_address(state, mem), value.to_bytes(8, "little"))


@semantics("fmadd")
def _fmadd(state, instr, memory):
    d, n, m, a = (o.n for o in instr.operands)
    state.write_d(d, fma64(state.read_d(n), state.read_d(m), state.read_d(a)))


@semantics("b")
def _b(state, instr, memory):
    return instr.operands[0].target


@semantics("bcond")
def _bcond(state, instr, memory):
    if condition_holds(instr.mnemonic[2:], state.flags):
        return instr.operands[0].target
    return None


@semantics("cbz", "cbnz")
def _cbz(state, instr, memory):
    reg, label = instr.operands
    zero = state.read_x(reg.n) == 0
    if zero == (instr.op == "cbz"):
        return label.target
    return None


@semantics("ret")
def _ret(state, instr, memory):
    state.status = "returned"
    return state.pc
