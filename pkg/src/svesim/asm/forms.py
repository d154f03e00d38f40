"""Operand forms accepted for each mnemonic.

Each form is ``(pattern, op, esize)``. Pattern tokens:

    X       general register (x0-x30, xzr, sp)
    D       scalar FP register
    Z       vector register without suffix
    Z.T     vector register; all ``.T`` tokens of a form must agree
    Z.d     vector register with a fixed suffix
    Z.T[]   indexed vector element
    P.T     predicate, any of p0-p15, no qualifier
    P       predicate, any of p0-p15, no suffix or qualifier
    Pg      governing predicate, p0-p7
    Pg/z    governing predicate, p0-p7, zeroing
    Pg/m    governing predicate, p0-p7, merging
    Pv/z    governing predicate of a predicate-only op, p0-p15, zeroing
    Pv      governing predicate of a predicate-only op, p0-p15
    I       immediate
    L       label
    M       scalar-base address
    MZ      vector-base address ([zn.d, #imm])
"""

CONDITIONS = (
    "eq", "ne", "lt", "ge", "gt", "le",
    "first", "nfrst", "last", "nlast", "none", "any", "tcont", "tstop",
)

_VEC_BINARY = "Z.T, Pg/m, Z.T, Z.T"
_PRED_LOGICAL = "P.b, Pv/z, P.b, P.b"

FORMS: dict[str, list[tuple[str, str, int | None]]] = {
    # scalar
    "mov": [
        ("X, X", "mov_x", None),
        ("X, I", "mov_imm", None),
        ("Z.T, I", "dup_imm", None),
        ("Z.T, X", "dup_x", None),
        ("Z.T, Pg/m, X", "cpy_x", None),
    ],
    "ldr": [("X, M", "ldr_x", None), ("D, M", "ldr_d", None)],
    "str": [("X, M", "str_x", None), ("D, M", "str_d", None)],
    "ldrsw": [("X, M", "ldrsw", None)],
    "ldrb": [("X, M", "ldrb", None)],
    "adr": [("X, L", "adr", None)],
    "add": [("X, X, X", "add_x", None), ("X, X, I", "add_imm", None), (_VEC_BINARY, "vadd", None)],
    "sub": [("X, X, X", "sub_x", None), ("X, X, I", "sub_imm", None), (_VEC_BINARY, "vsub", None)],
    "cmp": [("X, X", "cmp_x", None), ("X, I", "cmp_imm", None)],
    "fmadd": [("D, D, D, D", "fmadd", None)],
    "cbz": [("X, L", "cbz", None)],
    "cbnz": [("X, L", "cbnz", None)],
    "b": [("L", "b", None)],
    "ret": [("", "ret", None)],
    # predicates
    "ptrue": [("P.T", "ptrue", None)],
    "pfalse": [("P.T", "pfalse", None), ("P", "pfalse", None)],
    "whilelt": [("P.T, X, X", "whilelt", None)],
    "pnext": [("P.T, Pv, P.T", "pnext", None)],
    "brkb": [("P.b, Pv/z, P.b", "brkb", None)],
    "brkbs": [("P.b, Pv/z, P.b", "brkbs", None)],
    "cmpeq": [("P.T, Pg/z, Z.T, I", "cmpeq_imm", None)],
    "and": [(_PRED_LOGICAL, "pand", None), (_VEC_BINARY, "vand", None)],
    "orr": [(_PRED_LOGICAL, "porr", None), (_VEC_BINARY, "vorr", None)],
    "eor": [(_PRED_LOGICAL, "peor", None), (_VEC_BINARY, "veor", None)],
    "bic": [(_PRED_LOGICAL, "pbic", None)],
    "ands": [(_PRED_LOGICAL, "pands", None)],
    "orrs": [(_PRED_LOGICAL, "porrs", None)],
    "eors": [(_PRED_LOGICAL, "peors", None)],
    "bics": [(_PRED_LOGICAL, "pbics", None)],
    "ctermeq": [("X, X", "ctermeq", None)],
    "ctermne": [("X, X", "ctermne", None)],
    "setffr": [("", "setffr", None)],
    "rdffr": [("P.b, Pv/z", "rdffr", None), ("P.b", "rdffr", None)],
    "incp": [("X, P.T", "incp", None)],
    "incb": [("X", "inc", 8)],
    "inch": [("X", "inc", 16)],
    "incw": [("X", "inc", 32)],
    "incd": [("X", "inc", 64)],
    # vectors
    "dup": [("Z.T, I", "dup_imm", None), ("Z.T, X", "dup_x", None)],
    "cpy": [("Z.T, Pg/m, X", "cpy_x", None)],
    "index": [
        ("Z.T, I, I", "index", None),
        ("Z.T, X, I", "index", None),
        ("Z.T, I, X", "index", None),
        ("Z.T, X, X", "index", None),
    ],
    "mul": [(_VEC_BINARY, "vmul", None)],
    "fadd": [(_VEC_BINARY, "vfadd", None)],
    "fsub": [(_VEC_BINARY, "vfsub", None)],
    "fmul": [(_VEC_BINARY, "vfmul", None)],
    "fmla": [(_VEC_BINARY, "fmla", None)],
    "eorv": [("D, Pg, Z.T", "eorv", None)],
    "orv": [("D, Pg, Z.T", "orv", None)],
    "andv": [("D, Pg, Z.T", "andv", None)],
    "uaddv": [("D, Pg, Z.T", "uaddv", None)],
    "smaxv": [("D, Pg, Z.T", "smaxv", None)],
    "sminv": [("D, Pg, Z.T", "sminv", None)],
    "fadda": [("D, Pg, D, Z.T", "fadda", None)],
    "movprfx": [
        ("Z, Z", "movprfx", None),
        ("Z.T, Pg/z, Z.T", "movprfx", None),
        ("Z.T, Pg/m, Z.T", "movprfx", None),
    ],
    "umov": [("X, D", "umov", 64), ("X, Z.T[]", "umov", None)],
    # memory
    "ld1b": [("Z.b, Pg/z, M", "ld1", None)],
    "ld1h": [("Z.h, Pg/z, M", "ld1", None)],
    "ld1w": [("Z.s, Pg/z, M", "ld1", None)],
    "ld1d": [("Z.d, Pg/z, M", "ld1", None), ("Z.d, Pg/z, MZ", "ld1_gather", None)],
    "ld1rd": [("Z.d, Pg/z, M", "ld1r", None)],
    "ldff1b": [("Z.b, Pg/z, M", "ldff1", None)],
    "ldff1d": [("Z.d, Pg/z, M", "ldff1", None), ("Z.d, Pg/z, MZ", "ldff1_gather", None)],
    "st1b": [("Z.b, Pg, M", "st1", None)],
    "st1d": [("Z.d, Pg, M", "st1", None), ("Z.d, Pg, MZ", "st1_scatter", None)],
}

for _cond in CONDITIONS:
    FORMS[f"b.{_cond}"] = [("L", "bcond", None)]

FP_OPS = {"vfadd", "vfsub", "vfmul", "fmla", "fadda"}

# Destructive vector ops a movprfx may prefix; operand 0 is always the destructive one.
MOVPRFX_ELIGIBLE = {
    "vadd", "vsub", "vmul", "vand", "vorr", "veor",
    "vfadd", "vfsub", "vfmul", "fmla", "cpy_x",
}
