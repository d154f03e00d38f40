"""Run configuration, exit reports and the cross-vector-length differential harness."""
from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Optional

from .asm import Program
from .errors import SimError
from .machine import MASK64, FaultInfo, check_vl, create_machine, execute, pred_hex
from .memory import MemoryImage

DEFAULT_OBSERVE = tuple(f"x{i}" for i in range(8))

_REG_NAME = re.compile(r"^(x(\d+)|sp|d(\d+)|z(\d+)|p(\d+)|ffr|nzcv)$")
_WINDOW = re.compile(r"^mem:(0x[0-9a-fA-F]+|\d+):(0x[0-9a-fA-F]+|\d+)$")


class ConfigError(SimError):
    pass


@dataclass
class RunConfig:
    vl: int = 128
    effective_vl: Optional[int] = None
    entry: Optional[str] = None
    max_steps: int = 1_000_000
    trace: bool = False
    maps: list = field(default_factory=list)  # [(addr, length)]
    data: list = field(default_factory=list)  # [(addr, bytes)]
    regs: dict = field(default_factory=dict)  # {"x0": value}
    observe: Optional[list] = None

    def validate(self):
        try:
            check_vl(self.vl)
            if self.effective_vl is not None:
                check_vl(self.effective_vl)
                if self.effective_vl > self.vl:
                    raise ConfigError(f"effective VL {self.effective_vl} exceeds VL {self.vl}")
        except SimError as e:
            raise ConfigError(str(e)) from None
        if self.max_steps <= 0:
            raise ConfigError("max_steps must be positive")
        for name in self.regs:
            m = re.fullmatch(r"x(\d+)|sp", name)
            if not m or (m.group(1) is not None and int(m.group(1)) > 30):
                raise ConfigError(f"cannot seed register {name!r}")
        for item in self.observed():
            m = _REG_NAME.match(item)
            if not (m or _WINDOW.match(item)):
                raise ConfigError(f"unknown observable {item!r}")
            if m:
                limit = {"x": 30, "d": 31, "z": 31, "p": 15}.get(item[0], 0)
                number = next((g for g in m.groups()[1:] if g is not None), None)
                if number is not None and int(number) > limit:
                    raise ConfigError(f"unknown observable {item!r}")

    def observed(self) -> tuple:
        return tuple(self.observe) if self.observe is not None else DEFAULT_OBSERVE


@dataclass
class ExitReport:
    status: str
    steps: int
    vl: int
    evl: int
    regs: dict
    mem: dict
    fault: Optional[FaultInfo] = None
    trace: Optional[list] = None
    observed: tuple = DEFAULT_OBSERVE

    def to_dict(self) -> dict:
        doc = {
            "status": self.status,
            "steps": self.steps,
            "vl": self.vl,
            "evl": self.evl,
            "regs": dict(self.regs),
            "mem": dict(self.mem),
            "fault": None if self.fault is None else {
                "address": f"{self.fault.address:#x}",
                "element_index": self.fault.element_index,
                "instruction_pc": self.fault.instruction_pc,
                "kind": self.fault.kind,
            },
        }
        if self.trace is not None:
            doc["trace"] = [
                {"pc": r.pc, "text": r.text, "writes": [[n, v] for n, v in r.writes]} for r in self.trace
            ]
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def observation(self) -> dict:
        """The part of the report compared across vector lengths."""
        obs = {"status": self.status}
        for name in self.observed:
            obs[name] = self.mem[name[4:]] if name.startswith("mem:") else self.regs[name]
        if self.fault is not None:
            obs["fault"] = (self.fault.address, self.fault.instruction_pc)
        return obs

    def to_text(self) -> str:
        lines = [f"status: {self.status}", f"steps: {self.steps}", f"vl: {self.vl}", f"evl: {self.evl}"]
        if self.fault is not None:
            f = self.fault
            lines.append(f"fault: {f.kind} address {f.address:#x}, element {f.element_index}, pc {f.instruction_pc}")
        xs = [f"x{i}" for i in range(31)] + ["sp"]
        for row in range(0, len(xs), 4):
            lines.append("  ".join(f"{n:>4}={self.regs[n]}" for n in xs[row:row + 4]))
        for name, value in self.regs.items():
            if name not in xs:
                lines.append(f"{name}: {value}")
        for window, data in self.mem.items():
            lines.append(f"mem {window}: {data}")
        if self.trace is not None:
            lines.append("trace:")
            for r in self.trace:
                writes = ", ".join(f"{n}={v:#x}" if isinstance(v, int) else f"{n}={v}" for n, v in r.writes)
                lines.append(f"  {r.pc:4d}  {r.text:<40} {writes}")
        return "\n".join(lines) + "\n"


def parse_int(text: str) -> int:
    text = text.strip()
    neg = text.startswith("-")
    value = int(text.lstrip("+-"), 0)
    return -value if neg else value


def build_memory(program: Program, config: RunConfig) -> MemoryImage:
    """Initial image: source directives first, then command-line ones (which win)."""
    mem = MemoryImage()
    for addr, length in program.maps:
        mem.map(addr, length)
    for addr, data in program.data_segments:
        mem.load(addr, data)
    for addr, length in config.maps:
        mem.map(addr, length)
    for addr, data in config.data:
        mem.load(addr, data)
    return mem


def _window(mem: MemoryImage, addr: int, length: int) -> str:
    out = []
    for a in range(addr, addr + length):
        out.append(mem.read_bytes(a, 1).hex() if mem.is_mapped(a) else "--")
    return "".join(out)


def _observe_reg(state, name: str) -> str:
    if name.startswith("x"):
        return f"{state.read_x(int(name[1:])):#018x}"
    if name == "sp":
        return f"{state.sp:#018x}"
    if name.startswith("d"):
        return f"{state.read_d_bits(int(name[1:])):#018x}"
    if name.startswith("z"):
        return state.z[int(name[1:])].tobytes().hex()
    if name.startswith("p"):
        return pred_hex(state.p[int(name[1:])])
    if name == "ffr":
        return pred_hex(state.ffr)
    return f"{state.flags.nzcv:#x}"


def run_program(program: Program, config: RunConfig, memory: Optional[MemoryImage] = None) -> ExitReport:
    """Execute ``program`` under ``config``. ``memory`` (if given) is used as-is and mutated."""
    config.validate()
    try:
        entry = program.entry_index(config.entry)
    except KeyError as e:
        raise ConfigError(str(e.args[0])) from None
    if entry >= len(program.instructions):
        raise ConfigError("program has no instructions to execute")
    if memory is None:
        memory = build_memory(program, config)
    state = create_machine(config.vl, config.effective_vl)
    for name, value in config.regs.items():
        state.write_x(32 if name == "sp" else int(name[1:]), value & MASK64)
    state.pc = entry
    if config.trace:
        state.trace = []
    execute(state, program, memory, config.max_steps)

    regs = {f"x{i}": _observe_reg(state, f"x{i}") for i in range(31)}
    regs["sp"] = _observe_reg(state, "sp")
    mem = {}
    for name in config.observed():
        m = _WINDOW.match(name)
        if m:
            addr, length = parse_int(m.group(1)), parse_int(m.group(2))
            mem[name[4:]] = _window(memory, addr, length)
        elif name not in regs:
            regs[name] = _observe_reg(state, name)
    return ExitReport(
        status=state.status,
        steps=state.steps,
        vl=state.vl,
        evl=state.evl,
        regs=regs,
        mem=mem,
        fault=state.fault,
        trace=state.trace,
        observed=config.observed(),
    )


@dataclass
class DiffReport:
    vls: tuple
    reports: dict
    divergence: Optional[str] = None

    @property
    def identical(self) -> bool:
        return self.divergence is None

    def to_text(self) -> str:
        lines = []
        for vl in self.vls:
            r = self.reports[vl]
            lines.append(f"vl {vl:4d}: {r.status:<15} steps {r.steps}")
        lines.append("identical" if self.identical else f"DIVERGENCE: {self.divergence}")
        return "\n".join(lines) + "\n"


def diff(program: Program, vls, config: RunConfig,
         memory: Optional[MemoryImage] = None) -> DiffReport:
    """Run the same program and initial memory at each VL and compare observations."""
    vls = tuple(vls)
    if len(vls) < 2:
        raise ConfigError("diff needs at least two vector lengths")
    base_mem = memory if memory is not None else build_memory(program, config)
    reports = {}
    for vl in vls:
        cfg = RunConfig(**{**config.__dict__, "vl": vl, "effective_vl": None})
        reports[vl] = run_program(program, cfg, base_mem.copy())
    first = reports[vls[0]].observation()
    for vl in vls[1:]:
        other = reports[vl].observation()
        for key in list(first) + [k for k in other if k not in first]:
            if first.get(key) != other.get(key):
                return DiffReport(vls, reports,
                                  f"{key}: vl {vls[0]} -> {first.get(key)}, vl {vl} -> {other.get(key)}")
    return DiffReport(vls, reports)

