"""Predicate generation and manipulation: loop control, partitioning, FFR access."""
from __future__ import annotations

import numpy as np

from .machine import MASK64, Flags, active, lanes, predicate_flags, semantics, sext


def from_active(mask: np.ndarray, esize: int) -> np.ndarray:
    """Predicate with the control bit of each element set from ``mask``; other bits clear."""
    e = esize // 8
    out = np.zeros(len(mask) * e, dtype=np.bool_)
    out[::e] = mask
    return out


def _all_true(nbytes: int) -> np.ndarray:
    return np.ones(nbytes, dtype=np.bool_)


def ptrue(nbytes: int, esize: int) -> np.ndarray:
    return from_active(np.ones(nbytes * 8 // esize, dtype=np.bool_), esize)


def pfalse(nbytes: int) -> np.ndarray:
    return np.zeros(nbytes, dtype=np.bool_)


def whilelt(start: int, limit: int, esize: int, nbytes: int):
    """Element i active iff start + i < limit (signed, without wrap-around)."""
    count = nbytes * 8 // esize
    # python ints do not wrap, so this is the widened comparison
    n_active = max(0, min(count, limit - start))
    mask = np.arange(count) < n_active
    result = from_active(mask, esize)
    return result, predicate_flags(result, _all_true(nbytes), esize)


def pnext(governing: np.ndarray, prev: np.ndarray, esize: int):
    g = active(governing, esize)
    k = np.flatnonzero(active(prev, esize))
    after = k[-1] + 1 if len(k) else 0
    candidates = np.flatnonzero(g[after:])
    mask = np.zeros(len(g), dtype=np.bool_)
    if len(candidates):
        mask[after + candidates[0]] = True
    result = from_active(mask, esize)
    return result, predicate_flags(result, governing, esize)


def brkb(governing: np.ndarray, cond: np.ndarray, esize: int = 8, set_flags: bool = False):
    """Break-before: governing-active elements strictly preceding the first active break."""
    g = active(governing, esize)
    hits = np.flatnonzero(g & active(cond, esize))
    mask = g.copy()
    if len(hits):
        mask[hits[0]:] = False
    result = from_active(mask, esize)
    return result, (predicate_flags(result, governing, esize) if set_flags else None)


def cmpeq_imm(governing: np.ndarray, src: np.ndarray, imm: int, esize: int):
    pattern = imm & ((1 << esize) - 1)
    mask = active(governing, esize) & (lanes(src, esize) == pattern)
    result = from_active(mask, esize)
    return result, predicate_flags(result, governing, esize)


_LOGICAL = {
    "and": np.logical_and,
    "orr": np.logical_or,
    "eor": np.logical_xor,
    "bic": lambda a, b: a & ~b,
}


def pred_logical(op: str, governing: np.ndarray, a: np.ndarray, b: np.ndarray, set_flags: bool = False):
    result = _LOGICAL[op](a, b) & governing
    return result, (predicate_flags(result, governing, 8) if set_flags else None)


def cterm(flavor: str, xn: int, xm: int, flags_in: Flags) -> Flags:
    terminated = (xn == xm) if flavor == "eq" else (xn != xm)
    if terminated:
        return Flags(n=True, z=flags_in.z, c=flags_in.c, v=False)
    return Flags(n=False, z=flags_in.z, c=flags_in.c, v=not flags_in.c)


def rdffr(ffr: np.ndarray, governing: np.ndarray) -> np.ndarray:
    return ffr & governing


def count_active(pred: np.ndarray, esize: int) -> int:
    return int(np.count_nonzero(active(pred, esize)))


def incp(x: int, pred: np.ndarray, esize: int) -> int:
    return (x + count_active(pred, esize)) & MASK64


# --- instruction handlers ---------------------------------------------------

@semantics("ptrue", "pfalse")
def _ptrue(state, instr, memory):
    pd = instr.operands[0]
    if instr.op == "ptrue":
        state.set_p(pd.n, ptrue(state.vbytes, instr.esize))
    else:
        state.set_p(pd.n, pfalse(state.vbytes))


@semantics("whilelt")
def _whilelt(state, instr, memory):
    pd, xn, xm = instr.operands
    result, flags = whilelt(sext(state.read_x(xn.n), 64), sext(state.read_x(xm.n), 64), instr.esize, state.vbytes)
    state.set_p(pd.n, result)
    state.set_flags(flags)


@semantics("pnext")
def _pnext(state, instr, memory):
    pd, pv, _ = instr.operands
    result, flags = pnext(state.p[pv.n], state.p[pd.n], instr.esize)
    state.set_p(pd.n, result)
    state.set_flags(flags)


@semantics("brkb", "brkbs")
def _brkb(state, instr, memory):
    pd, pg, pn = instr.operands
    result, flags = brkb(state.p[pg.n], state.p[pn.n], 8, set_flags=instr.op == "brkbs")
    state.set_p(pd.n, result)
    if flags is not None:
        state.set_flags(flags)


@semantics("cmpeq_imm")
def _cmpeq(state, instr, memory):
    pd, pg, zn, imm = instr.operands
    result, flags = cmpeq_imm(state.p[pg.n], state.z[zn.n], imm.value, instr.esize)
    state.set_p(pd.n, result)
    state.set_flags(flags)


@semantics("pand", "porr", "peor", "pbic", "pands", "porrs", "peors", "pbics")
def _plogical(state, instr, memory):
    pd, pg, pn, pm = instr.operands
    set_flags = instr.op.endswith("s")
    op = instr.op[1:4]
    result, flags = pred_logical(op, state.p[pg.n], state.p[pn.n], state.p[pm.n], set_flags)
    state.set_p(pd.n, result)
    if flags is not None:
        state.set_flags(flags)


@semantics("ctermeq", "ctermne")
def _cterm(state, instr, memory):
    xn, xm = instr.operands
    state.set_flags(cterm(instr.op[5:], state.read_x(xn.n), state.read_x(xm.n), state.flags))


@semantics("setffr")
def _setffr(state, instr, memory):
    state.set_ffr(_all_true(state.vbytes))


@semantics("rdffr")
def _rdffr(state, instr, memory):
    pd = instr.operands[0]
    governing = state.p[instr.operands[1].n] if len(instr.operands) == 2 else _all_true(state.vbytes)
    state.set_p(pd.n, rdffr(state.ffr, governing))


@semantics("incp")
def _incp(state, instr, memory):
    xdn, pm = instr.operands
    state.write_x(xdn.n, incp(state.read_x(xdn.n), state.p[pm.n], instr.esize))
