"""Two-pass assembler for the textual vector-assembly dialect."""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from ..errors import AssemblyError, Diagnostic
from .forms import FORMS, FP_OPS, MOVPRFX_ELIGIBLE
from .operands import (
    ESIZE, SP, SUFFIX, XZR, DReg, GReg, Imm, Instruction, Label, Mem, PReg, Program, ZReg,
)

_LABEL_DEF = re.compile(r"^\s*([A-Za-z_.$][\w.$]*)\s*:")
_LABEL = re.compile(r"^[A-Za-z_.$][\w.$]*$")
_XREG = re.compile(r"^(?:x(\d+)|(xzr)|(sp))$")
_DREG = re.compile(r"^d(\d+)$")
_ZREG = re.compile(r"^z(\d+)(?:\.([bhsd]))?(?:\[(\d+)\])?$")
_PREG = re.compile(r"^p(\d+)(?:\.([bhsd]))?(?:/([zm]))?$")
_IMM = re.compile(r"^#\s*([+-]?)(0x[0-9a-f]+|\d+)$")
_INT = re.compile(r"^([+-]?)(0x[0-9a-f]+|\d+)$")
_LSL = re.compile(r"^lsl\s+#\s*(\d+)$")

U64 = 1 << 64


class _Mismatch(Exception):
    def __init__(self, message: str, range_violation: bool = False):
        super().__init__(message)
        self.range_violation = range_violation


@dataclass
class _Line:
    number: int
    text: str
    label: Optional[str]
    body: str
    body_col: int


def _int_literal(text: str) -> Optional[int]:
    m = _INT.match(text.strip().lower())
    if not m:
        return None
    value = int(m.group(2), 0)
    return -value if m.group(1) == "-" else value


def _split_operands(text: str, base_col: int) -> list[tuple[str, int]]:
    """Split on top-level commas, keeping the 1-based column of each piece."""
    out, depth, start = [], 0, 0
    for i, ch in enumerate(text + ","):
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        elif ch == "," and depth == 0:
            piece = text[start:i]
            out.append((piece.strip(), base_col + start + len(piece) - len(piece.lstrip())))
            start = i + 1
    return out


def _parse_xreg(s: str) -> GReg:
    m = _XREG.match(s)
    if not m:
        raise _Mismatch(f"expected general register, got {s!r}")
    if m.group(2):
        return GReg(XZR)
    if m.group(3):
        return GReg(SP)
    n = int(m.group(1))
    if n > 30:
        raise _Mismatch(f"no such register {s!r}")
    return GReg(n)


def _parse_zreg(s: str) -> ZReg:
    m = _ZREG.match(s)
    if not m or int(m.group(1)) > 31:
        raise _Mismatch(f"expected vector register, got {s!r}")
    esize = ESIZE[m.group(2)] if m.group(2) else None
    lane = int(m.group(3)) if m.group(3) is not None else None
    return ZReg(int(m.group(1)), esize, lane)


def _parse_preg(s: str) -> PReg:
    m = _PREG.match(s)
    if not m or int(m.group(1)) > 15:
        raise _Mismatch(f"expected predicate register, got {s!r}")
    esize = ESIZE[m.group(2)] if m.group(2) else None
    return PReg(int(m.group(1)), esize, m.group(3))


def _parse_imm(s: str) -> int:
    m = _IMM.match(s)
    if not m:
        raise _Mismatch(f"expected immediate, got {s!r}")
    value = int(m.group(2), 0)
    return -value if m.group(1) == "-" else value


def _parse_mem(s: str, vector_base: bool) -> Mem:
    if not (s.startswith("[") and s.endswith("]")):
        raise _Mismatch(f"expected address, got {s!r}")
    parts = [p.strip() for p in s[1:-1].split(",")]
    if vector_base:
        base = _parse_zreg(parts[0])
        if base.esize != 64 or base.lane is not None:
            raise _Mismatch(f"vector address base must be a .d register, got {parts[0]!r}")
        if len(parts) == 1:
            return Mem(base)
        if len(parts) == 2:
            return Mem(base, offset=_parse_imm(parts[1]))
        raise _Mismatch(f"malformed vector address {s!r}")
    if not _XREG.match(parts[0]):
        raise _Mismatch(f"expected address with scalar base, got {s!r}")
    base = _parse_xreg(parts[0])
    if base.n == XZR:
        raise _Mismatch("xzr cannot be an address base")
    if len(parts) == 1:
        return Mem(base)
    if parts[1].startswith("#"):
        if len(parts) != 2:
            raise _Mismatch(f"malformed address {s!r}")
        return Mem(base, offset=_parse_imm(parts[1]))
    index = _parse_xreg(parts[1])
    if index.n == SP:
        raise _Mismatch("sp cannot be an index register")
    if len(parts) == 2:
        return Mem(base, index=index)
    m = _LSL.match(parts[2]) if len(parts) == 3 else None
    if not m:
        raise _Mismatch(f"malformed address {s!r}")
    shift = int(m.group(1))
    if shift > 3:
        raise _Mismatch(f"shift must be 0-3, got {shift}")
    return Mem(base, index=index, shift=shift)


def _match_token(token: str, text: str, bound: dict):
    """Parse ``text`` against one pattern token; ``bound`` carries the .T binding."""
    low = text.lower()
    kind, _, suffix = token.partition(".")
    if token == "X":
        return _parse_xreg(low)
    if token == "D":
        m = _DREG.match(low)
        if not m or int(m.group(1)) > 31:
            raise _Mismatch(f"expected scalar FP register, got {text!r}")
        return DReg(int(m.group(1)))
    if token == "I":
        return Imm(_parse_imm(low))
    if token == "L":
        if not _LABEL.match(text):
            raise _Mismatch(f"expected label, got {text!r}")
        return Label(text)
    if token == "M":
        return _parse_mem(low, vector_base=False)
    if token == "MZ":
        return _parse_mem(low, vector_base=True)
    if kind == "Z":
        z = _parse_zreg(low)
        indexed = suffix.endswith("[]")
        suffix = suffix.rstrip("[]")
        if (z.lane is not None) != indexed:
            raise _Mismatch(f"unexpected element index in {text!r}" if z.lane is not None
                            else f"expected indexed element, got {text!r}")
        if not suffix:
            if z.esize is not None:
                raise _Mismatch(f"unexpected element size suffix in {text!r}")
            return z
        _bind(z.esize, suffix, text, bound)
        return z
    if kind.startswith("P"):
        p = _parse_preg(low)
        name, _, qual = kind.partition("/")
        if name in ("Pg", "Pv", "P") and not suffix:
            want_qual = qual or None
            if p.esize is not None:
                raise _Mismatch(f"unexpected element size suffix in {text!r}")
            if p.qual != want_qual:
                if want_qual is None:
                    raise _Mismatch(f"unexpected predicate qualifier in {text!r}")
                raise _Mismatch(f"expected /{want_qual} predicate qualifier, got {text!r}")
            if name == "Pg" and p.n > 7:
                raise _Mismatch(
                    f"governing predicate p{p.n} out of range: data-processing and memory "
                    "instructions may only use p0-p7", range_violation=True)
            return p
        if p.qual is not None:
            raise _Mismatch(f"unexpected predicate qualifier in {text!r}")
        _bind(p.esize, suffix, text, bound)
        return p
    raise AssertionError(token)


def _bind(esize, suffix: str, text: str, bound: dict):
    if esize is None:
        raise _Mismatch(f"missing element size suffix in {text!r}")
    if suffix == "T":
        if "T" in bound and bound["T"] != esize:
            raise _Mismatch(f"element size mismatch: {text!r} is .{SUFFIX[esize]}, "
                            f"expected .{SUFFIX[bound['T']]}")
        bound["T"] = esize
    elif ESIZE[suffix] != esize:
        raise _Mismatch(f"element size mismatch: {text!r} must be .{suffix}")


def _fits(value: int, width: int) -> bool:
    return -(1 << (width - 1)) <= value < (1 << width)


def _check(op: str, esize, ops: tuple, mnemonic: str):
    """Per-op constraints that the operand patterns cannot express."""
    if op in FP_OPS and esize not in (32, 64):
        raise _Mismatch(f"{mnemonic} requires .s or .d elements")
    if (op.startswith("v") or op in ("pnext", "fadda")) and ops[0].n != ops[2].n:
        raise _Mismatch(f"destructive operand mismatch: {ops[2]} must be {ops[0]}")
    if op in ("dup_imm", "cmpeq_imm") and not _fits(ops[-1].value, esize):
        raise _Mismatch(f"immediate {ops[-1].value} not representable in {esize}-bit elements")
    if op == "index":
        for o in ops[1:]:
            if isinstance(o, Imm) and not _fits(o.value, esize):
                raise _Mismatch(f"immediate {o.value} not representable in {esize}-bit elements")
    if op in ("mov_imm", "add_imm", "sub_imm", "cmp_imm") and not _fits(ops[-1].value, 64):
        raise _Mismatch(f"immediate {ops[-1].value} does not fit in 64 bits")
    if op == "umov" and isinstance(ops[1], ZReg) and ops[1].lane >= 2048 // esize:
        raise _Mismatch(f"element index {ops[1].lane} out of range for .{SUFFIX[esize]}")
    if op in ("ld1", "ldff1", "st1", "ld1r"):
        mem = ops[-1]
        if op == "ld1r" and mem.index is not None:
            raise _Mismatch("load-and-broadcast takes [xn] or [xn, #imm]")
        if mem.index is not None:
            want = {8: 0, 16: 1, 32: 2, 64: 3}[esize]
            if (mem.shift or 0) != want:
                raise _Mismatch(f"index must be scaled by lsl #{want} for .{SUFFIX[esize]} elements")


def _match_form(pattern: str, texts: list[str]):
    tokens = pattern.split(", ") if pattern else []
    if len(tokens) != len(texts):
        return _Mismatch(f"expected {len(tokens)} operand(s), got {len(texts)}"), 0
    bound: dict = {}
    out = []
    for i, (tok, txt) in enumerate(zip(tokens, texts)):
        try:
            out.append(_match_token(tok, txt, bound))
        except _Mismatch as e:
            return e, i + 1
    return (tuple(out), bound.get("T")), len(tokens) + 1


def _fixed_esize(pattern: str) -> Optional[int]:
    m = re.search(r"\.([bhsd])\b", pattern)
    return ESIZE[m.group(1)] if m else None


def _parse_instruction(line: _Line) -> Instruction:
    body = line.body
    head, _, rest = body.partition(" ")
    mnemonic = head.lower()
    forms = FORMS.get(mnemonic)
    if forms is None:
        raise _LineError(line.body_col, f"unknown mnemonic {head!r}")
    op_col = line.body_col + len(head) + 1 + (len(rest) - len(rest.lstrip()))
    pieces = _split_operands(rest.strip(), op_col) if rest.strip() else []
    texts = [p[0] for p in pieces]
    best = None
    for pattern, op, fixed in forms:
        result, progress = _match_form(pattern, texts)
        if isinstance(result, _Mismatch):
            col = pieces[progress - 1][1] if 0 < progress <= len(pieces) else line.body_col
            rank = (result.range_violation, progress)
            if best is None or rank > best[0]:
                best = (rank, col, str(result))
            continue
        ops, tbind = result
        esize = fixed or tbind or _fixed_esize(pattern)
        try:
            _check(op, esize, ops, mnemonic)
        except _Mismatch as e:
            rank = (e.range_violation, len(texts) + 1)
            if best is None or rank > best[0]:
                best = (rank, line.body_col, str(e))
            continue
        return Instruction(mnemonic, op, esize, ops, line.number)
    raise _LineError(best[1], f"{mnemonic}: {best[2]}")


class _LineError(Exception):
    def __init__(self, column: int, message: str):
        super().__init__(message)
        self.column = column


def _scan(source: str) -> list[_Line]:
    lines = []
    for number, raw in enumerate(source.splitlines(), start=1):
        text = raw.split("//", 1)[0].rstrip()
        label = None
        body_start = 0
        m = _LABEL_DEF.match(text)
        if m:
            label = m.group(1)
            body_start = m.end()
        body = text[body_start:]
        lead = len(body) - len(body.lstrip())
        body = body.strip()
        body = re.sub(r"\s+", " ", body, count=1) if body else body
        lines.append(_Line(number, raw, label, body, body_start + lead + 1))
    return lines


def assemble(source: str) -> Program:
    """Assemble source text into a :class:`Program`.

    Raises :class:`AssemblyError` carrying every diagnostic found; no partial
    program is returned.
    """
    diags: list[Diagnostic] = []
    lines = _scan(source)

    # pass 1: labels, directives, instruction slots
    labels: dict[str, int] = {}
    data_labels: dict[str, int] = {}
    label_lines: dict[str, int] = {}
    segments, maps = [], []
    slots: list[_Line] = []
    for ln in lines:
        directive = ln.body.startswith(".")
        if ln.label is not None:
            if ln.label in label_lines:
                diags.append(Diagnostic(ln.number, 1, f"duplicate label {ln.label!r} "
                                        f"(first defined on line {label_lines[ln.label]})"))
            else:
                label_lines[ln.label] = ln.number
        if directive:
            word, _, args = ln.body.partition(" ")
            word = word.lower()
            if word in (".global", ".globl"):
                pass
            elif word == ".data":
                addr_text, colon, hexdata = args.partition(":")
                addr = _int_literal(addr_text)
                data_hex = re.sub(r"\s+", "", hexdata)
                if not colon or addr is None or addr < 0 or addr >= U64:
                    diags.append(Diagnostic(ln.number, ln.body_col, "malformed .data: expected 'addr: hexbytes'"))
                elif not re.fullmatch(r"(?:[0-9A-Fa-f]{2})*", data_hex):
                    diags.append(Diagnostic(ln.number, ln.body_col, "malformed .data: bad hex byte string"))
                else:
                    segments.append((addr, bytes.fromhex(data_hex)))
                    if ln.label is not None and label_lines[ln.label] == ln.number:
                        data_labels[ln.label] = addr
                    continue
            elif word == ".map":
                parts = [p.strip() for p in args.split(",")]
                vals = [_int_literal(p) for p in parts] if len(parts) == 2 else [None]
                if None in vals or vals[0] < 0 or vals[1] <= 0:
                    diags.append(Diagnostic(ln.number, ln.body_col, "malformed .map: expected 'addr, len'"))
                else:
                    maps.append((vals[0], vals[1]))
            else:
                diags.append(Diagnostic(ln.number, ln.body_col, f"unknown directive {word!r}"))
        if ln.label is not None and label_lines[ln.label] == ln.number:
            labels[ln.label] = len(slots)
        if ln.body and not directive:
            slots.append(ln)

    # pass 2: parse and resolve
    instructions: list[Instruction] = []
    for ln in slots:
        try:
            instr = _parse_instruction(ln)
        except _LineError as e:
            diags.append(Diagnostic(ln.number, e.column, str(e)))
            continue
        resolved = []
        for o in instr.operands:
            if isinstance(o, Label):
                if instr.op == "adr":
                    if o.name in data_labels:
                        o = Label(o.name, data_labels[o.name])
                    elif o.name in labels:
                        diags.append(Diagnostic(ln.number, ln.body_col, f"adr requires a data label, {o.name!r} labels code"))
                    else:
                        diags.append(Diagnostic(ln.number, ln.body_col, f"unresolved label {o.name!r}"))
                elif o.name in labels:
                    if labels[o.name] >= len(slots):
                        diags.append(Diagnostic(ln.number, ln.body_col, f"label {o.name!r} does not precede an instruction"))
                    o = Label(o.name, labels[o.name])
                elif o.name in data_labels:
                    diags.append(Diagnostic(ln.number, ln.body_col, f"branch to data label {o.name!r}"))
                else:
                    diags.append(Diagnostic(ln.number, ln.body_col, f"unresolved label {o.name!r}"))
            resolved.append(o)
        instructions.append(Instruction(instr.mnemonic, instr.op, instr.esize, tuple(resolved), instr.line))

    if len(instructions) == len(slots):
        for i, instr in enumerate(instructions):
            if instr.op == "movprfx":
                problem = _movprfx_problem(instr, instructions[i + 1] if i + 1 < len(instructions) else None)
                if problem:
                    diags.append(Diagnostic(instr.line, 1, f"movprfx: {problem}"))

    if diags:
        raise AssemblyError(sorted(diags, key=lambda d: (d.line, d.column)))
    return Program(tuple(instructions), labels, data_labels, tuple(segments), tuple(maps))


def _movprfx_problem(prefix: Instruction, nxt: Optional[Instruction]) -> Optional[str]:
    if nxt is None:
        return "must be followed by a destructive instruction"
    if nxt.op not in MOVPRFX_ELIGIBLE:
        return f"{nxt.mnemonic} is not an eligible destructive instruction"
    dst = prefix.operands[0].n
    if nxt.operands[0].n != dst:
        return f"following instruction must write z{dst}"
    others = [o for o in nxt.operands[1:] if isinstance(o, ZReg)]
    if nxt.op != "fmla":
        others = others[1:]  # skip the repeated destructive operand
    if any(o.n == dst for o in others):
        return f"z{dst} may not be used as a source of the prefixed instruction"
    if len(prefix.operands) == 3:
        pg = prefix.operands[1]
        if nxt.operands[1].n != pg.n or nxt.esize != prefix.esize:
            return "predicated prefix must match the governing predicate and element size"
    return None


def format_instruction(instr: Instruction) -> str:
    return str(instr)


def format_program(program: Program) -> str:
    """Canonical source text; ``assemble(format_program(p)) == p``."""
    out = []
    for addr, length in program.maps:
        out.append(f".map {addr:#x}, {length:#x}")
    by_addr: dict[int, list[str]] = {}
    for name, addr in program.data_labels.items():
        by_addr.setdefault(addr, []).append(name)
    for addr, data in program.data_segments:
        names = by_addr.get(addr)
        prefix = f"{names.pop(0)}: " if names else ""
        out.append(f"{prefix}.data {addr:#x}: {data.hex()}")
    by_index: dict[int, list[str]] = {}
    for name, idx in program.labels.items():
        by_index.setdefault(idx, []).append(name)
    for i, instr in enumerate(program.instructions):
        out.extend(f"{name}:" for name in by_index.get(i, ()))
        out.append("    " + format_instruction(instr))
    out.extend(f"{name}:" for name in by_index.get(len(program.instructions), ()))
    return "\n".join(out) + "\n"
