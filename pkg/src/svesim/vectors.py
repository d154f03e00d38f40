"""Vector data processing: broadcasts, induction helpers, predicated arithmetic, reductions."""
from __future__ import annotations

import numpy as np

from .asm import Imm
from .errors import ExecutionError
from .fp import f32_bits, f32_from_bits, f64_bits, fma32, fma64
from .machine import MASK64, active, int_dtype, lanes, semantics, uint_dtype

_FLOAT = {32: np.dtype("<f4"), 64: np.dtype("<f8")}


def _from_lanes(values: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(values).view(np.uint8).copy()


def dup_imm(imm: int, esize: int, nbytes: int) -> np.ndarray:
    count = nbytes * 8 // esize
    return _from_lanes(np.full(count, imm & ((1 << esize) - 1), dtype=uint_dtype(esize)))


def cpy_scalar(dst: np.ndarray, governing: np.ndarray, x: int, esize: int) -> np.ndarray:
    """Merging insert of the low ``esize`` bits of x into active lanes."""
    out = lanes(dst, esize).copy()
    out[active(governing, esize)] = x & ((1 << esize) - 1)
    return _from_lanes(out)


def index(base: int, step: int, esize: int, nbytes: int) -> np.ndarray:
    count = nbytes * 8 // esize
    mask = (1 << esize) - 1
    return _from_lanes(np.array([(base + i * step) & mask for i in range(count)], dtype=uint_dtype(esize)))


def inc_scalar(x: int, esize: int, evl: int) -> int:
    return (x + evl // esize) & MASK64


def _binary(op: str, a: np.ndarray, b: np.ndarray, esize: int) -> np.ndarray:
    if op in ("fadd", "fsub", "fmul"):
        fa, fb = a.view(_FLOAT[esize]), b.view(_FLOAT[esize])
        with np.errstate(all="ignore"):
            r = {"fadd": np.add, "fsub": np.subtract, "fmul": np.multiply}[op](fa, fb)
        return r.view(uint_dtype(esize))
    ua, ub = lanes(a, esize), lanes(b, esize)
    return {
        "add": np.add, "sub": np.subtract, "mul": np.multiply,
        "and": np.bitwise_and, "orr": np.bitwise_or, "eor": np.bitwise_xor,
    }[op](ua, ub)


def elementwise(op: str, governing: np.ndarray, a: np.ndarray, b: np.ndarray, esize: int) -> np.ndarray:
    """Destructive predicated ``a op b``; inactive lanes keep ``a``."""
    if op.startswith("f") and esize not in _FLOAT:
        raise ValueError(f"{op} needs 32- or 64-bit elements")
    result = np.where(active(governing, esize), _binary(op, a, b, esize), lanes(a, esize))
    return _from_lanes(result.astype(uint_dtype(esize)))


def fmla(acc: np.ndarray, governing: np.ndarray, a: np.ndarray, b: np.ndarray, esize: int) -> np.ndarray:
    """acc + a*b per active lane with a single rounding."""
    fdt = _FLOAT[esize]
    fused = fma64 if esize == 64 else fma32
    out = acc.view(fdt).copy()
    fa, fb = a.view(fdt), b.view(fdt)
    for i in np.flatnonzero(active(governing, esize)):
        out[i] = fused(float(fa[i]), float(fb[i]), float(out[i]))
    return _from_lanes(out)


_IDENTITY = {
    "eorv": lambda w: 0,
    "orv": lambda w: 0,
    "uaddv": lambda w: 0,
    "andv": lambda w: (1 << w) - 1,
    "smaxv": lambda w: -(1 << (w - 1)),
    "sminv": lambda w: (1 << (w - 1)) - 1,
}


def reduce(kind: str, governing: np.ndarray, src: np.ndarray, esize: int) -> int:
    """Fold over active lanes; returns the 64-bit scalar written to the destination D register."""
    act = active(governing, esize)
    width_mask = (1 << esize) - 1
    if kind in ("smaxv", "sminv"):
        vals = [int(v) for v in src.view(int_dtype(esize))[act]]
        pick = max if kind == "smaxv" else min
        return pick(vals, default=_IDENTITY[kind](esize)) & width_mask
    vals = [int(v) for v in lanes(src, esize)[act]]
    acc = _IDENTITY[kind](esize)
    for v in vals:
        if kind == "eorv":
            acc ^= v
        elif kind == "orv":
            acc |= v
        elif kind == "andv":
            acc &= v
        else:
            acc += v
    return acc & (MASK64 if kind == "uaddv" else width_mask)


def fadda(governing: np.ndarray, init: float, src: np.ndarray, esize: int) -> float:
    """Strictly ordered add of active lanes onto ``init``, lowest lane first."""
    vals = src.view(_FLOAT[esize])[active(governing, esize)]
    if esize == 64:
        acc = float(init)
        for v in vals:
            acc = acc + float(v)
        return acc
    acc32 = np.float32(init)
    with np.errstate(all="ignore"):
        for v in vals:
            acc32 = np.float32(acc32 + v)
    return float(acc32)


def movprfx(dst: np.ndarray, src: np.ndarray, governing=None, mode=None, esize=None) -> np.ndarray:
    """Discrete-copy implementation of the move prefix."""
    if governing is None:
        return src.copy()
    act = active(governing, esize)
    base = lanes(dst, esize) if mode == "m" else np.zeros_like(lanes(src, esize))
    return _from_lanes(np.where(act, lanes(src, esize), base).astype(uint_dtype(esize)))


def extract_element(src: np.ndarray, index: int, esize: int) -> int:
    vals = lanes(src, esize)
    if not 0 <= index < len(vals):
        raise ExecutionError(f"element index {index} out of range for {len(vals)} lanes")
    return int(vals[index])


# --- instruction handlers ---------------------------------------------------

def _scalar_operand(state, op) -> int:
    return op.value if isinstance(op, Imm) else state.read_x(op.n)


@semantics("dup_imm", "dup_x")
def _dup(state, instr, memory):
    zd, src = instr.operands
    state.set_z(zd.n, dup_imm(_scalar_operand(state, src), instr.esize, state.vbytes))


@semantics("cpy_x")
def _cpy(state, instr, memory):
    zd, pg, xn = instr.operands
    state.set_z(zd.n, cpy_scalar(state.z[zd.n], state.p[pg.n], state.read_x(xn.n), instr.esize))


@semantics("index")
def _index(state, instr, memory):
    zd, base, step_ = instr.operands
    state.set_z(zd.n, index(_scalar_operand(state, base), _scalar_operand(state, step_), instr.esize, state.vbytes))


@semantics("inc")
def _inc(state, instr, memory):
    xdn = instr.operands[0]
    state.write_x(xdn.n, inc_scalar(state.read_x(xdn.n), instr.esize, state.evl))


@semantics("vadd", "vsub", "vmul", "vand", "vorr", "veor", "vfadd", "vfsub", "vfmul")
def _elementwise(state, instr, memory):
    zdn, pg, _, zm = instr.operands
    state.set_z(zdn.n, elementwise(instr.op[1:], state.p[pg.n], state.z[zdn.n], state.z[zm.n], instr.esize))


@semantics("fmla")
def _fmla(state, instr, memory):
    zda, pg, zn, zm = instr.operands
    state.set_z(zda.n, fmla(state.z[zda.n], state.p[pg.n], state.z[zn.n], state.z[zm.n], instr.esize))


@semantics("eorv", "orv", "andv", "uaddv", "smaxv", "sminv")
def _reduce(state, instr, memory):
    dd, pg, zn = instr.operands
    state.write_d_bits(dd.n, reduce(instr.op, state.p[pg.n], state.z[zn.n], instr.esize))


@semantics("fadda")
def _fadda(state, instr, memory):
    dd, pg, _, zm = instr.operands
    if instr.esize == 64:
        state.write_d_bits(dd.n, f64_bits(fadda(state.p[pg.n], state.read_d(dd.n), state.z[zm.n], 64)))
    else:
        init = f32_from_bits(state.read_d_bits(dd.n))
        state.write_d_bits(dd.n, f32_bits(fadda(state.p[pg.n], init, state.z[zm.n], 32)))


@semantics("movprfx")
def _movprfx(state, instr, memory):
    if len(instr.operands) == 2:
        zd, zn = instr.operands
        state.set_z(zd.n, movprfx(state.z[zd.n], state.z[zn.n]))
    else:
        zd, pg, zn = instr.operands
        state.set_z(zd.n, movprfx(state.z[zd.n], state.z[zn.n], state.p[pg.n], pg.qual, instr.esize))


@semantics("umov")
def _umov(state, instr, memory):
    xd, src = instr.operands
    lane = getattr(src, "lane", None) or 0
    state.write_x(xd.n, extract_element(state.z[src.n], lane, instr.esize))
