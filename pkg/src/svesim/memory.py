"""Sparse page-mapped memory and vector load/store semantics."""
from __future__ import annotations

import copy
from typing import Iterator, Optional

import numpy as np

from .errors import MemoryFault
from .machine import MASK64, active, effective_address, lanes, semantics

PAGE_SIZE = 4096
_PAGE_SHIFT = 12
_ADDR_SPACE = 1 << 64


class MemoryImage:
    """Byte-addressable 64-bit address space; only mapped pages are accessible."""

    def __init__(self):
        self.pages: dict[int, bytearray] = {}

    def copy(self) -> "MemoryImage":
        return copy.deepcopy(self)

    def __eq__(self, other):
        return isinstance(other, MemoryImage) and self.pages == other.pages

    def _page_numbers(self, addr: int, length: int) -> Iterator[int]:
        if length <= 0:
            return
        first = addr >> _PAGE_SHIFT
        last = (addr + length - 1) >> _PAGE_SHIFT
        for pn in range(first, last + 1):
            yield pn % (_ADDR_SPACE >> _PAGE_SHIFT)

    def map(self, addr: int, length: int):
        for pn in self._page_numbers(addr & MASK64, length):
            self.pages.setdefault(pn, bytearray(PAGE_SIZE))

    def unmap(self, addr: int, length: int):
        for pn in self._page_numbers(addr & MASK64, length):
            self.pages.pop(pn, None)

    def is_mapped(self, addr: int) -> bool:
        return ((addr & MASK64) >> _PAGE_SHIFT) in self.pages

    def _chunks(self, addr: int, length: int):
        """Split an access into per-page (page, offset, length) runs; faults before any byte moves."""
        pos = addr & MASK64
        remaining = length
        out = []
        while remaining:
            pn, off = pos >> _PAGE_SHIFT, pos & (PAGE_SIZE - 1)
            page = self.pages.get(pn)
            if page is None:
                raise MemoryFault(pos)
            n = min(remaining, PAGE_SIZE - off)
            out.append((page, off, n))
            remaining -= n
            pos = (pos + n) & MASK64
        return out

    def read_bytes(self, addr: int, length: int) -> bytes:
        return b"".join(bytes(page[off:off + n]) for page, off, n in self._chunks(addr, length))

    def write_bytes(self, addr: int, data: bytes):
        pos = 0
        for page, off, n in self._chunks(addr, len(data)):
            page[off:off + n] = data[pos:pos + n]
            pos += n

    def load(self, addr: int, data: bytes):
        """Map the covering pages and write ``data``."""
        self.map(addr, len(data))
        self.write_bytes(addr, data)


# --- element-level access ---------------------------------------------------

def _read_element(memory: MemoryImage, addr: int, nbytes: int, index: int) -> bytes:
    try:
        return memory.read_bytes(addr, nbytes)
    except MemoryFault as f:
        raise MemoryFault(f.address, index) from None


def _write_element(memory: MemoryImage, addr: int, data: bytes, index: int):
    try:
        memory.write_bytes(addr, data)
    except MemoryFault as f:
        raise MemoryFault(f.address, index) from None


def _contig_addrs(base: int, count: int, nbytes: int) -> list[int]:
    return [(base + i * nbytes) & MASK64 for i in range(count)]


def _gather_addrs(addr_vector: np.ndarray, offset: int) -> list[int]:
    return [(int(a) + offset) & MASK64 for a in lanes(addr_vector, 64)]


def _load_lanes(memory, governing, addrs, esize, ffr: Optional[np.ndarray] = None):
    """Shared body of zeroing loads; with ``ffr`` given, behaves first-fault."""
    nbytes = esize // 8
    out = np.zeros(len(governing), dtype=np.uint8)
    act = active(governing, esize)
    new_ffr = None if ffr is None else ffr.copy()
    first = True
    for i, addr in enumerate(addrs):
        if not act[i]:
            continue
        try:
            data = _read_element(memory, addr, nbytes, i)
        except MemoryFault:
            if ffr is None or first:
                raise
            new_ffr[i * nbytes:] = False
            out[i * nbytes:] = 0
            break
        out[i * nbytes:(i + 1) * nbytes] = np.frombuffer(data, dtype=np.uint8)
        first = False
    return out, new_ffr


def ld1_contig(memory: MemoryImage, governing: np.ndarray, base: int, esize: int) -> np.ndarray:
    count = len(governing) * 8 // esize
    return _load_lanes(memory, governing, _contig_addrs(base, count, esize // 8), esize)[0]


def ldff1_contig(memory: MemoryImage, ffr: np.ndarray, governing: np.ndarray, base: int, esize: int):
    """First-fault contiguous load: returns (vector, new FFR)."""
    count = len(governing) * 8 // esize
    return _load_lanes(memory, governing, _contig_addrs(base, count, esize // 8), esize, ffr)


def ld1_gather(memory: MemoryImage, governing: np.ndarray, addr_vector: np.ndarray, offset: int,
               esize: int = 64) -> np.ndarray:
    assert esize == 64
    return _load_lanes(memory, governing, _gather_addrs(addr_vector, offset), esize)[0]


def ldff1_gather(memory: MemoryImage, ffr: np.ndarray, governing: np.ndarray, addr_vector: np.ndarray,
                 offset: int, esize: int = 64):
    assert esize == 64
    return _load_lanes(memory, governing, _gather_addrs(addr_vector, offset), esize, ffr)


def ld1r_broadcast(memory: MemoryImage, governing: np.ndarray, addr: int, esize: int) -> np.ndarray:
    nbytes = esize // 8
    out = np.zeros(len(governing), dtype=np.uint8)
    act = active(governing, esize)
    if not act.any():
        return out
    data = np.frombuffer(_read_element(memory, addr, nbytes, int(np.flatnonzero(act)[0])), dtype=np.uint8)
    for i in np.flatnonzero(act):
        out[i * nbytes:(i + 1) * nbytes] = data
    return out


def _store_lanes(memory, governing, addrs, src, esize):
    nbytes = esize // 8
    act = active(governing, esize)
    for i, addr in enumerate(addrs):
        if act[i]:
            _write_element(memory, addr, src[i * nbytes:(i + 1) * nbytes].tobytes(), i)


def st1_contig(memory: MemoryImage, governing: np.ndarray, base: int, src: np.ndarray, esize: int):
    count = len(governing) * 8 // esize
    addrs = _contig_addrs(base, count, esize // 8)
    act = active(governing, esize)
    # contiguous stores are all-or-nothing: probe before writing
    for i, addr in enumerate(addrs):
        if act[i]:
            _read_element(memory, addr, esize // 8, i)
    _store_lanes(memory, governing, addrs, src, esize)


def st1_scatter(memory: MemoryImage, governing: np.ndarray, addr_vector: np.ndarray, src: np.ndarray,
                offset: int = 0, esize: int = 64):
    """Ascending-lane stores; a fault leaves lower lanes committed."""
    assert esize == 64
    _store_lanes(memory, governing, _gather_addrs(addr_vector, offset), src, esize)


# --- instruction handlers ---------------------------------------------------

@semantics("ld1", "ldff1", "ld1r", "ld1_gather", "ldff1_gather")
def _vector_load(state, instr, memory):
    zt, pg, mem = instr.operands
    governing = state.p[pg.n]
    esize = instr.esize
    new_ffr = None
    if instr.op in ("ld1_gather", "ldff1_gather"):
        addrs = state.z[mem.base.n]
        offset = mem.offset or 0
        if instr.op == "ld1_gather":
            vec = ld1_gather(memory, governing, addrs, offset, esize)
        else:
            vec, new_ffr = ldff1_gather(memory, state.ffr, governing, addrs, offset, esize)
    else:
        addr = effective_address(state, mem)
        if instr.op == "ld1":
            vec = ld1_contig(memory, governing, addr, esize)
        elif instr.op == "ld1r":
            vec = ld1r_broadcast(memory, governing, addr, esize)
        else:
            vec, new_ffr = ldff1_contig(memory, state.ffr, governing, addr, esize)
    state.set_z(zt.n, vec)
    if new_ffr is not None and not np.array_equal(new_ffr, state.ffr):
        state.set_ffr(new_ffr)


@semantics("st1", "st1_scatter")
def _vector_store(state, instr, memory):
    zt, pg, mem = instr.operands
    if instr.op == "st1_scatter":
        st1_scatter(memory, state.p[pg.n], state.z[mem.base.n], state.z[zt.n], mem.offset or 0, instr.esize)
    else:
        st1_contig(memory, state.p[pg.n], effective_address(state, mem), state.z[zt.n], instr.esize)
