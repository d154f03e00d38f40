"""Acceptance criteria. Run directly or through pytest; a verdict line per criterion is printed at the end."""
import struct
import sys
import time
from fractions import Fraction

import numpy as np
import pytest

from svesim import (
    AssemblyError, LEGAL_VLS, MemoryFault, MemoryImage, assemble, create_machine, diff, execute,
    format_program, predicate_flags,
)
from svesim.corpus import source
from svesim.machine import lanes
from svesim.memory import ld1_contig, ld1_gather, ld1r_broadcast, ldff1_contig, ldff1_gather
from svesim.predicates import brkb, cmpeq_imm, from_active, pnext, rdffr, whilelt
from svesim.vectors import cpy_scalar, elementwise, fmla, movprfx, reduce

import kernels

CASES = 10_000
INT64_MAX, INT64_MIN = 2**63 - 1, -(2**63)
UINT = {8: "<u1", 16: "<u2", 32: "<u4", 64: "<u8"}
FLOAT = {32: "<f4", 64: "<f8"}


def criterion(number, title):
    return pytest.mark.criterion(number, title)


# --- 1 ------------------------------------------------------------------------

DAXPY_SIZES = (0, 1, 2, 3, 5, 16, 17, 100)


@criterion(1, "daxpy scalar and vector kernels agree bit-exactly at every VL")
def test_daxpy_equivalence():
    t0 = time.perf_counter()
    for n in DAXPY_SIZES:
        x, y, a = kernels.daxpy_inputs(n, seed=2017 + n)
        expected = kernels.daxpy_oracle(x, y, a).tobytes()
        for vl in LEGAL_VLS:
            cfg = kernels.daxpy_config(n, x, y, a, vl)
            outs = []
            for name in ("daxpy_scalar", "daxpy_sve"):
                report, mem = kernels.run_with_memory(name, cfg)
                assert report.status == "returned", (name, n, vl)
                outs.append(kernels.read_doubles(mem, kernels.Y_BASE, n).tobytes())
            assert outs[0] == outs[1] == expected, (n, vl)
    assert time.perf_counter() - t0 < 10.0


# --- 2 ------------------------------------------------------------------------

@criterion(2, "diff over all 16 VLs finds no divergence for the three kernels")
def test_cross_vl_invariance():
    rng = np.random.default_rng(5)
    x, y, a = kernels.daxpy_inputs(37, seed=9)
    nodes, values = kernels.linked_list(21, rng)
    cases = [
        ("daxpy_sve", kernels.daxpy_config(37, x, y, a)),
        ("strlen_sve", kernels.strlen_config(bytes(rng.integers(1, 256, 203, dtype=np.uint8)))),
        ("linked_list_sve", kernels.linked_list_config(nodes)),
    ]
    t0 = time.perf_counter()
    for name, cfg in cases:
        result = diff(kernels.program(name), LEGAL_VLS, cfg)
        assert result.identical, (name, result.divergence)
        assert all(r.status == "returned" for r in result.reports.values())
    assert result.reports[128].regs["x0"] == f"{kernels.xor_all(values):#018x}"
    assert time.perf_counter() - t0 < 30.0


# --- 3 ------------------------------------------------------------------------

GATHER_KERNEL = """
    setffr
    ldff1d  z0.d, p0/z, [z3.d, #0]
    rdffr   p1.b
    ret
"""
A = (0x10000, 0x11008, 0x20000, 0x12010)  # A[2] sits on an unmapped page


def _gather_machine(governing):
    mem = MemoryImage()
    for i, addr in enumerate(A):
        if i != 2:
            mem.load(addr, struct.pack("<Q", 100 + i))
    state = create_machine(256)
    state.z[3] = np.array(A, dtype="<u8").view(np.uint8).copy()
    state.p[0] = from_active(np.array(governing, dtype=bool), 64)
    execute(state, assemble(GATHER_KERNEL), mem)
    return state


@criterion(3, "first-fault gather: lanes 0-1 load, FFR {T,T,F,F}, retry traps at element 2")
def test_first_fault_gather_scenario():
    s = _gather_machine([1, 1, 1, 1])
    assert s.status == "returned"
    assert lanes(s.z[0], 64).tolist() == [100, 101, 0, 0]
    assert s.ffr[::8].tolist() == [True, True, False, False]
    assert s.ffr.tolist() == [True] * 16 + [False] * 16
    assert np.array_equal(s.p[1], s.ffr)


@criterion(3, "first-fault gather: lanes 0-1 load, FFR {T,T,F,F}, retry traps at element 2")
def test_first_fault_gather_retry_traps():
    s = _gather_machine([0, 0, 1, 1])
    assert s.status == "faulted"
    assert s.fault.element_index == 2
    assert s.fault.address == A[2]
    assert s.fault.instruction_pc == 1


# --- 4 ------------------------------------------------------------------------

@criterion(4, "strlen speculates across an unmapped page without faulting")
def test_strlen_page_boundary_at_2048():
    text = b"x" * 60
    cfg = kernels.strlen_config(text, vl=2048)
    report, mem = kernels.run_with_memory("strlen_sve", cfg)
    start = cfg.regs["x0"]
    # the first 256-byte chunk overlaps the unmapped page
    assert not mem.is_mapped(kernels.STRING_END) and start + 256 > kernels.STRING_END
    assert report.status == "returned" and report.fault is None
    assert int(report.regs["x0"], 16) == 60


@criterion(4, "strlen speculates across an unmapped page without faulting")
def test_strlen_lengths_against_byte_oracle():
    rng = np.random.default_rng(60)
    for length in range(301):
        text = bytes(rng.integers(1, 256, length, dtype=np.uint8))
        for vl in (2048, 128):
            cfg = kernels.strlen_config(text, vl=vl)
            report, mem = kernels.run_with_memory("strlen_sve", cfg)
            assert report.status == "returned", (length, vl)
            assert int(report.regs["x0"], 16) == kernels.strlen_oracle(mem, cfg.regs["x0"]) == length


# --- 5 ------------------------------------------------------------------------

@criterion(5, "linked-list kernel XORs every node at VL 128/256/512")
def test_linked_list():
    rng = np.random.default_rng(33)
    for length in range(1, 34):
        nodes, values = kernels.linked_list(length, rng)
        pages = {addr >> 12 for addr, _ in nodes}
        assert len(pages) == length
        for vl in (128, 256, 512):
            report, _ = kernels.run_with_memory("linked_list_sve", kernels.linked_list_config(nodes, vl))
            assert report.status == "returned", (length, vl)
            assert int(report.regs["x0"], 16) == kernels.xor_all(values), (length, vl)


# --- 6 ------------------------------------------------------------------------

def pairwise_sum(values):
    if len(values) == 1:
        return values[0]
    mid = len(values) // 2
    return pairwise_sum(values[:mid]) + pairwise_sum(values[mid:])


@criterion(6, "fadda is strictly ordered: 1.0 where a pairwise tree gives 0.0")
def test_fadda_ordering():
    data = [1e16, 1.0, -1e16, 1.0]
    s = create_machine(256)
    s.z[1] = np.array(data, dtype="<f8").view(np.uint8).copy()
    s.p[0] = from_active(np.ones(4, dtype=bool), 64)
    execute(s, assemble("fadda d0, p0, d0, z1.d\nret\n"), MemoryImage())
    assert s.read_d(0) == 1.0
    assert pairwise_sum(data) == 0.0


# --- 7 ------------------------------------------------------------------------

MOVPRFX_OPS = ("add", "sub", "mul", "and", "orr", "eor", "fadd", "fsub", "fmul", "fmla", "cpy")
SUFFIX = {8: "b", 16: "h", 32: "s", 64: "d"}


def _nearest_f32(q: Fraction) -> float:
    """Round an exact rational to binary32, ties to even."""
    f = np.float32(float(q))
    cands = [np.nextafter(f, np.float32(-np.inf)), f, np.nextafter(f, np.float32(np.inf))]
    best = min(cands, key=lambda c: (abs(Fraction(float(c)) - q), int(np.array(c).view("<u4")) & 1))
    return float(best)


def _lane_op(op, esize, a, b, c=None):
    """Reference for one active lane, from raw element patterns."""
    mask = (1 << esize) - 1
    if op in ("add", "sub", "mul", "and", "orr", "eor"):
        return {"add": a + b, "sub": a - b, "mul": a * b, "and": a & b, "orr": a | b, "eor": a ^ b}[op] & mask
    fa, fb = (np.array([v], dtype=UINT[esize]).view(FLOAT[esize])[0] for v in (a, b))
    if op == "fmla":
        fc = np.array([c], dtype=UINT[esize]).view(FLOAT[esize])[0]
        exact = Fraction(float(fa)) * Fraction(float(fb)) + Fraction(float(fc))
        r = float(exact) if esize == 64 else _nearest_f32(exact)
    else:
        r = {"fadd": fa + fb, "fsub": fa - fb, "fmul": fa * fb}[op]
    return int(np.array([r], dtype=FLOAT[esize]).view(UINT[esize])[0])


def _random_vector(rng, op, nbytes, esize):
    if op.startswith("f"):
        vals = rng.standard_normal(nbytes * 8 // esize) * 2.0 ** rng.integers(-20, 20, nbytes * 8 // esize)
        return vals.astype(FLOAT[esize]).view(np.uint8).copy()
    return rng.integers(0, 256, nbytes, dtype=np.uint8)


@criterion(7, "movprfx pairs equal the composed constructive operation")
def test_movprfx_fusion():
    rng = np.random.default_rng(4)
    vls = (128, 256, 512)
    for case in range(1000):
        op = MOVPRFX_OPS[case % len(MOVPRFX_OPS)]
        esize = int(rng.choice([32, 64] if op.startswith("f") else [8, 16, 32, 64]))
        vl = int(rng.choice(vls))
        nbytes, t = vl // 8, SUFFIX[esize]
        mode = ("none", "z", "m")[int(rng.integers(0, 3))]
        d, src, m, n = (int(v) for v in rng.choice(32, 4, replace=False))
        g = int(rng.integers(0, 8))
        if rng.random() < 0.2:
            src = d
        prefix = f"movprfx z{d}, z{src}" if mode == "none" else f"movprfx z{d}.{t}, p{g}/{mode}, z{src}.{t}"
        if op == "fmla":
            body = f"fmla z{d}.{t}, p{g}/m, z{n}.{t}, z{m}.{t}"
        elif op == "cpy":
            body = f"cpy z{d}.{t}, p{g}/m, x5"
        else:
            body = f"{op} z{d}.{t}, p{g}/m, z{d}.{t}, z{m}.{t}"

        s = create_machine(vl)
        for r in {d, src, m, n}:
            s.z[r] = _random_vector(rng, op, nbytes, esize)
        s.p[g] = rng.random(nbytes) < 0.5
        s.x[5] = int(rng.integers(0, 2**63)) * 2 + 1
        old_d, zs, zm, zn = (s.z[r].copy() for r in (d, src, m, n))
        if src == d:
            zs = old_d
        active = s.p[g][::esize // 8]
        execute(s, assemble(f"{prefix}\n{body}\nret\n"), MemoryImage())
        assert s.status == "returned", (prefix, body)

        old_l, src_l, m_l, n_l = (lanes(v, esize) for v in (old_d, zs, zm, zn))
        expect = []
        for i, on in enumerate(active):
            if mode == "none":
                base = int(src_l[i])
            else:
                base = int(src_l[i]) if on else (0 if mode == "z" else int(old_l[i]))
            if not on:
                expect.append(base)
            elif op == "cpy":
                expect.append(s.x[5] & ((1 << esize) - 1))
            elif op == "fmla":
                expect.append(_lane_op(op, esize, int(n_l[i]), int(m_l[i]), base))
            else:
                expect.append(_lane_op(op, esize, base, int(m_l[i])))
        assert lanes(s.z[d], esize).tolist() == expect, (case, prefix, body)


# --- 8 ------------------------------------------------------------------------

def _random_shape(rng):
    vl = int(rng.choice(LEGAL_VLS))
    esize = int(rng.choice([8, 16, 32, 64]))
    return vl // 8, esize


def _control(pred, esize):
    return [bool(pred[i]) for i in range(0, len(pred), esize // 8)]


@criterion(8, "property suites, 10,000 cases each")
def test_property_flags_truth_table():
    rng = np.random.default_rng(81)
    for _ in range(CASES):
        nbytes, esize = _random_shape(rng)
        r = rng.random(nbytes) < rng.random()
        g = rng.random(nbytes) < rng.random()
        f = predicate_flags(r, g, esize)
        rc, gc = _control(r, esize), _control(g, esize)
        first = next((i for i, on in enumerate(gc) if on), None)
        last = next((i for i in reversed(range(len(gc))) if gc[i]), None)
        assert f.n == (first is not None and rc[first])
        assert f.z == (not any(a and b for a, b in zip(rc, gc)))
        assert f.c == (not (last is not None and rc[last]))
        assert f.v is False


def _clamp64(v):
    return max(INT64_MIN, min(INT64_MAX, v))


def _random_bounds(rng, count):
    """Signed 64-bit (start, limit), biased towards both ends of the range."""
    kind = rng.integers(0, 4)
    if kind == 0:
        limit = INT64_MAX - int(rng.integers(0, 2 * count))
        start = limit - int(rng.integers(-count, 2 * count))
    elif kind == 1:
        start = INT64_MIN + int(rng.integers(0, 2 * count))
        limit = start + int(rng.integers(-count, 2 * count))
    elif kind == 2:
        start = int(rng.integers(-1000, 1000))
        limit = start + int(rng.integers(-count, 2 * count))
    else:
        start, limit = int(rng.integers(INT64_MIN, INT64_MAX)), int(rng.integers(INT64_MIN, INT64_MAX))
    return _clamp64(start), _clamp64(limit)


@criterion(8, "property suites, 10,000 cases each")
def test_property_whilelt_sequential_oracle():
    rng = np.random.default_rng(82)
    prog = {e: assemble(f"whilelt p0.{SUFFIX[e]}, x1, x2\nret\n") for e in SUFFIX}
    for case in range(CASES):
        nbytes, esize = _random_shape(rng)
        count = nbytes * 8 // esize
        start, limit = _random_bounds(rng, count)
        expect, i = [], start
        for _ in range(count):
            expect.append(i < limit)
            i += 1
        p, f = whilelt(start, limit, esize, nbytes)
        assert _control(p, esize) == expect, (start, limit, esize)
        assert not any(p[j] for j in range(nbytes) if j % (esize // 8))
        assert f.n == expect[0] and f.z == (not any(expect)) and f.c == (not expect[-1])
        if case % 20 == 0:
            s = create_machine(nbytes * 8)
            s.x[1], s.x[2] = start & (2**64 - 1), limit & (2**64 - 1)
            execute(s, prog[esize], MemoryImage())
            assert np.array_equal(s.p[0], p) and s.flags == f


@criterion(8, "property suites, 10,000 cases each")
def test_property_pnext_enumeration():
    rng = np.random.default_rng(83)
    for _ in range(CASES):
        nbytes, esize = 16, int(rng.choice([8, 16, 32, 64]))
        g = rng.random(nbytes) < rng.random()
        prev = np.zeros(nbytes, dtype=bool)
        visited = []
        for _ in range(nbytes + 1):
            prev, f = pnext(g, prev, esize)
            if f.z:
                break
            idx = [i for i, on in enumerate(_control(prev, esize)) if on]
            assert len(idx) == 1
            visited.append(idx[0])
        assert visited == [i for i, on in enumerate(_control(g, esize)) if on]


@criterion(8, "property suites, 10,000 cases each")
def test_property_brkb_prefix():
    rng = np.random.default_rng(84)
    for _ in range(CASES):
        nbytes, esize = _random_shape(rng)
        g = rng.random(nbytes) < rng.random()
        c = rng.random(nbytes) < rng.random() * 0.3
        r, f = brkb(g, c, esize, set_flags=True)
        gc, cc, rcs = _control(g, esize), _control(c, esize), _control(r, esize)
        order = [i for i, on in enumerate(gc) if on]
        kept = [i for i, on in enumerate(rcs) if on]
        assert kept == order[:len(kept)]
        stop = next((k for k, i in enumerate(order) if cc[i]), len(order))
        assert len(kept) == stop
        assert not any(r[j] for j in range(nbytes) if j % (esize // 8))
        assert f == predicate_flags(r, g, esize)


@criterion(8, "property suites, 10,000 cases each")
def test_property_ffr_monotone_and_prefix():
    rng = np.random.default_rng(85)
    checked = 0
    while checked < CASES:
        nbytes, esize = _random_shape(rng)
        e = esize // 8
        mem = MemoryImage()
        mem.map(0x40000, 4096)
        base = 0x41000 - int(rng.integers(0, nbytes + e))
        g = rng.random(nbytes) < rng.random()
        if rng.random() < 0.5:
            ffr_in = np.arange(nbytes) < int(rng.integers(0, nbytes + 1))
        else:
            ffr_in = rng.random(nbytes) < 0.8
        gather = esize == 64 and rng.random() < 0.5
        try:
            if gather:
                offsets = rng.permutation(nbytes // 8)
                addrs = np.array([base + 8 * int(k) for k in offsets], dtype="<u8").view(np.uint8).copy()
                _, ffr_out = ldff1_gather(mem, ffr_in, g, addrs, 0)
                _, from_full = ldff1_gather(mem, np.ones(nbytes, dtype=bool), g, addrs, 0)
            else:
                _, ffr_out = ldff1_contig(mem, ffr_in, g, base, esize)
                _, from_full = ldff1_contig(mem, np.ones(nbytes, dtype=bool), g, base, esize)
        except MemoryFault as fault:
            act = [i for i, on in enumerate(_control(g, esize)) if on]
            assert fault.element_index == act[0]
            continue
        assert not (ffr_out & ~ffr_in).any()
        k = nbytes if from_full.all() else int(np.argmin(from_full))
        assert from_full[:k].all() and not from_full[k:].any()
        checked += 1


@criterion(8, "property suites, 10,000 cases each")
def test_property_merging_and_zeroing_lanes():
    rng = np.random.default_rng(86)
    mem = MemoryImage()
    mem.load(0x8000, bytes(rng.integers(0, 256, 4096, dtype=np.uint8)))
    forms = ("elementwise", "fmla", "cpy", "movprfx_m", "ld1", "ld1r", "gather", "movprfx_z", "cmpeq", "rdffr")
    for case in range(CASES):
        form = forms[case % len(forms)]
        nbytes, esize = _random_shape(rng)
        if form in ("fmla",) or (form == "elementwise" and rng.random() < 0.3):
            esize = int(rng.choice([32, 64]))
        if form == "gather":
            esize = 64
        e = esize // 8
        g = rng.random(nbytes) < 0.5
        a = rng.integers(0, 256, nbytes, dtype=np.uint8)
        b = rng.integers(0, 256, nbytes, dtype=np.uint8)
        inactive = [i for i in range(nbytes // e) if not g[i * e]]
        if form == "elementwise":
            ops = ["add", "sub", "mul", "and", "orr", "eor"] + (["fadd", "fsub", "fmul"] if esize >= 32 else [])
            out, keep = elementwise(str(rng.choice(ops)), g, a, b, esize), a
        elif form == "fmla":
            with np.errstate(all="ignore"):
                out, keep = fmla(a, g, b, b, esize), a
        elif form == "cpy":
            out, keep = cpy_scalar(a, g, int(rng.integers(0, 2**63)), esize), a
        elif form == "movprfx_m":
            out, keep = movprfx(a, b, g, "m", esize), a
        elif form == "ld1":
            out, keep = ld1_contig(mem, g, 0x8000 + int(rng.integers(0, 4096 - nbytes)), esize), None
        elif form == "ld1r":
            out, keep = ld1r_broadcast(mem, g, 0x8000 + int(rng.integers(0, 4088)), esize), None
        elif form == "gather":
            addrs = (0x8000 + rng.integers(0, 4088, nbytes // 8)).astype("<u8")
            out, keep = ld1_gather(mem, g, addrs.view(np.uint8).copy(), 0), None
        elif form == "movprfx_z":
            out, keep = movprfx(a, b, g, "z", esize), None
        else:
            out = cmpeq_imm(g, a, int(a[0]), esize)[0] if form == "cmpeq" else rdffr(rng.random(nbytes) < 0.5, g)
            assert not (out & ~g).any()
            continue
        for i in inactive:
            lane = out[i * e:(i + 1) * e]
            if keep is None:
                assert not lane.any(), (form, esize)
            else:
                assert lane.tobytes() == keep[i * e:(i + 1) * e].tobytes(), (form, esize)


def _left_fold(kind, values, esize):
    mask = (1 << esize) - 1
    if kind in ("smaxv", "sminv"):
        signed = [v - (1 << esize) if v >> (esize - 1) else v for v in values]
        acc = -(1 << (esize - 1)) if kind == "smaxv" else (1 << (esize - 1)) - 1
        for v in signed:
            acc = max(acc, v) if kind == "smaxv" else min(acc, v)
        return acc & mask
    acc = {"eorv": 0, "orv": 0, "andv": mask, "uaddv": 0}[kind]
    for v in values:
        if kind == "eorv":
            acc ^= v
        elif kind == "orv":
            acc |= v
        elif kind == "andv":
            acc &= v
        else:
            acc += v
    return acc % 2**64 if kind == "uaddv" else acc


@criterion(8, "property suites, 10,000 cases each")
def test_property_reduce_left_fold():
    rng = np.random.default_rng(87)
    kinds = ("eorv", "orv", "andv", "uaddv", "smaxv", "sminv")
    for case in range(CASES):
        kind = kinds[case % len(kinds)]
        nbytes, esize = _random_shape(rng)
        src = rng.integers(0, 256, nbytes, dtype=np.uint8)
        g = rng.random(nbytes) < rng.random()
        vals = [int(v) for v, on in zip(lanes(src, esize), _control(g, esize)) if on]
        assert reduce(kind, g, src, esize) == _left_fold(kind, vals, esize), (kind, esize)


# --- 9 ------------------------------------------------------------------------

LISTINGS = ("daxpy_scalar", "daxpy_sve", "strlen_scalar", "strlen_sve", "linked_list_sve")
GOVERNED = (
    "ld1d z1.d, p{n}/z, [x0, x4, lsl #3]",
    "ldff1b z0.b, p{n}/z, [x1]",
    "ld1rd z0.d, p{n}/z, [x2]",
    "st1d z2.d, p{n}, [x1, x4, lsl #3]",
    "ld1d z2.d, p{n}/z, [z1.d, #0]",
    "fmla z2.d, p{n}/m, z1.d, z0.d",
    "eor z0.d, p{n}/m, z0.d, z2.d",
    "cpy z1.d, p{n}/m, x1",
    "eorv d0, p{n}, z0.d",
    "cmpeq p2.b, p{n}/z, z0.b, #0",
)


@criterion(9, "corpus assembles, round-trips, and P8-P15 governing operands are rejected")
@pytest.mark.parametrize("name", LISTINGS)
def test_corpus_assembles_and_round_trips(name):
    program = assemble(source(name))
    assert program.instructions
    again = assemble(format_program(program))
    assert again == program
    assert assemble(format_program(again)) == again


@criterion(9, "corpus assembles, round-trips, and P8-P15 governing operands are rejected")
def test_high_predicates_rejected_as_governing():
    for n in range(8, 16):
        for template in GOVERNED:
            with pytest.raises(AssemblyError) as e:
                assemble(template.format(n=n) + "\n")
            [d] = e.value.diagnostics
            assert d.line == 1 and "p0-p7" in d.message, template
        assemble(template.format(n=n % 8) + "\n")
    assemble("cmpeq p9.b, p1/z, z0.b, #0\npnext p15.d, p14, p15.d\n")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
