"""Memory-mapped register space of the monitor.

All registers are 32-bit little-endian words at word-aligned offsets in
``[0x000, 0x1000)``. The global block lives at 0x000-0x0FF; unit ``i`` owns
the 256-byte window at ``0x100 + i * 0x100``. Reserved offsets read as zero
and ignore writes; read-only registers ignore writes; self-clearing bits
always read back as zero.
"""

from dataclasses import dataclass
from typing import Optional, Tuple

from .errors import AddressFault
from .pmu import UNIT_CLASSES, UnitType

SPACE_SIZE = 0x1000
MAX_UNITS = 15  # window 15 would start at 0x1000, past the end of the space
WORD = 0xFFFFFFFF

GLOBAL_CTRL = 0x000
GLOBAL_STATUS = 0x004
CYCLE_LO = 0x008
CYCLE_HI = 0x00C
TRIG_START_MODE = 0x010
TRIG_START_ARG_LO = 0x014
TRIG_START_ARG_HI = 0x018
TRIG_STOP_MODE = 0x01C
TRIG_STOP_ARG_LO = 0x020
TRIG_STOP_ARG_HI = 0x024
IRQ_CAUSE = 0x028
IRQ_ACK = 0x02C
TS_CTRL = 0x030
DMA_CTRL = 0x080
DMA_DEST = 0x084
DMA_STATUS = 0x088

# GLOBAL_CTRL
CTRL_ENABLE = 1 << 0
CTRL_RESET = 1 << 1
CTRL_IRQ_EN = 1 << 2
# GLOBAL_STATUS
STATUS_RUNNING = 1 << 0
STATUS_IRQ_PENDING = 1 << 1
STATUS_TRIGGERED = 1 << 2
STATUS_CONFIG_ERR = 1 << 3
# DMA_CTRL / DMA_STATUS
DMA_START = 1 << 0
DMA_AUTO_ON_STOP = 1 << 1
DMA_CONTENTION = 1 << 2
DMA_BUSY = 1 << 0
DMA_DONE = 1 << 1
DMA_OVERFLOW = 1 << 2
DMA_BAD_DEST = 1 << 3

# unit window offsets
UNIT_ID = 0x00
UNIT_CTRL = 0x04
UNIT_PID = 0x08
UNIT_STATUS = 0x0C
DATA_INDEX = 0x30
DATA_VALUE = 0x34
# UNIT_CTRL
UCTRL_ENABLE = 1 << 0
UCTRL_RESET = 1 << 1
UCTRL_PID_FILTER = 1 << 2
UCTRL_ATTR = 1 << 3
UCTRL_CORE_SHIFT = 16
UCTRL_MASK = 0x00FF000F
# UNIT_STATUS
USTATUS_ACTIVE = 1 << 0
USTATUS_OVERFLOW = 1 << 1
USTATUS_CONFIG_ERR = 1 << 2


def unit_base(index):
    return 0x100 + index * 0x100


@dataclass(frozen=True)
class RegisterInfo:
    offset: int
    name: str
    access: str          # "RW", "RO" or "WO" (write-only, reads 0)
    reset: int
    mask: int = WORD     # writable bits
    self_clearing: int = 0
    legal: Optional[Tuple[int, int]] = None  # out-of-range writes are ignored


def map_layout(unit_types=(), ncores=1):
    """Describe every defined register for a monitor with ``unit_types`` installed."""
    layout = [
        RegisterInfo(GLOBAL_CTRL, "GLOBAL_CTRL", "RW", 0, 0x7, CTRL_RESET),
        RegisterInfo(GLOBAL_STATUS, "GLOBAL_STATUS", "RO", len(unit_types) << 8),
        RegisterInfo(CYCLE_LO, "CYCLE_LO", "RO", 0),
        RegisterInfo(CYCLE_HI, "CYCLE_HI", "RO", 0),
        RegisterInfo(TRIG_START_MODE, "TRIG_START_MODE", "RW", 0),
        RegisterInfo(TRIG_START_ARG_LO, "TRIG_START_ARG_LO", "RW", 0),
        RegisterInfo(TRIG_START_ARG_HI, "TRIG_START_ARG_HI", "RW", 0),
        RegisterInfo(TRIG_STOP_MODE, "TRIG_STOP_MODE", "RW", 0),
        RegisterInfo(TRIG_STOP_ARG_LO, "TRIG_STOP_ARG_LO", "RW", 0),
        RegisterInfo(TRIG_STOP_ARG_HI, "TRIG_STOP_ARG_HI", "RW", 0),
        RegisterInfo(IRQ_CAUSE, "IRQ_CAUSE", "RO", 0),
        RegisterInfo(IRQ_ACK, "IRQ_ACK", "WO", 0, 0x1F),
        RegisterInfo(TS_CTRL, "TS_CTRL", "RW", 1, 0x1),
        RegisterInfo(DMA_CTRL, "DMA_CTRL", "RW", 0, 0x7, DMA_START),
        RegisterInfo(DMA_DEST, "DMA_DEST", "RW", 0),
        RegisterInfo(DMA_STATUS, "DMA_STATUS", "RO", 0),
    ]
    for i in range(MAX_UNITS):
        b = unit_base(i)
        if i >= len(unit_types):
            layout.append(RegisterInfo(b + UNIT_ID, f"UNIT{i}_ID", "RO", 0))
            continue
        t = UnitType(unit_types[i]) if not isinstance(unit_types[i], str) else UnitType[unit_types[i]]
        cls = UNIT_CLASSES[t]
        fresh = cls(index=i, ncores=ncores)
        layout += [
            RegisterInfo(b + UNIT_ID, f"UNIT{i}_ID", "RO", int(t)),
            RegisterInfo(b + UNIT_CTRL, f"UNIT{i}_CTRL", "RW", 0, UCTRL_MASK, UCTRL_RESET),
            RegisterInfo(b + UNIT_PID, f"UNIT{i}_PID", "RW", 0, 0xFFFF),
            RegisterInfo(b + UNIT_STATUS, f"UNIT{i}_STATUS", "RO", 0),
        ]
        for off, name, reset, lo, hi in cls.REGS:
            legal = None if lo is None else (lo, hi)
            layout.append(RegisterInfo(b + off, f"{t.name}{i}_{name}", "RW", reset, WORD, 0, legal))
        for off, name in getattr(cls, "RO_REGS", ()):
            layout.append(RegisterInfo(b + off, f"{t.name}{i}_{name}", "RO", fresh.read_param(off)))
        first_word = int.from_bytes(fresh.payload()[:4], "little")
        layout += [
            RegisterInfo(b + DATA_INDEX, f"UNIT{i}_DATA_INDEX", "RW", 0),
            RegisterInfo(b + DATA_VALUE, f"UNIT{i}_DATA_VALUE", "RO", first_word),
        ]
    return layout


def format_dump(words, per_line=4):
    """Render a list of register words as ``offset: word word ...`` lines."""
    lines = []
    for i in range(0, len(words), per_line):
        row = " ".join(f"{w:08x}" for w in words[i:i + per_line])
        lines.append(f"{i * 4:03x}: {row}")
    return "\n".join(lines) + "\n"


def check_address(addr):
    if not isinstance(addr, int) or addr < 0 or addr >= SPACE_SIZE:
        raise AddressFault(f"address {addr!r} outside [0x000, 0x1000)")
    if addr % 4:
        raise AddressFault(f"unaligned address {addr:#x}")


class RegisterFile:
    """Bus-facing register decode for a :class:`~abacus.monitor.Monitor`."""

    def __init__(self, monitor):
        self.m = monitor
        self.data_index = [0] * len(monitor.units)

    def read(self, addr):
        check_address(addr)
        m = self.m
        ctl = m.control
        if addr < 0x100:
            if addr == GLOBAL_CTRL:
                return int(ctl.enabled) | int(ctl.irq.enabled) << 2
            if addr == GLOBAL_STATUS:
                return (int(ctl.running) | int(ctl.irq.line) << 1 | int(ctl.triggered) << 2
                        | int(ctl.config_error) << 3 | (len(m.units) & 0xFF) << 8)
            if addr == CYCLE_LO:
                return ctl.cycle & WORD
            if addr == CYCLE_HI:
                return (ctl.cycle >> 32) & WORD
            if addr == TRIG_START_MODE:
                return ctl.start.mode
            if addr == TRIG_START_ARG_LO:
                return ctl.start.arg & WORD
            if addr == TRIG_START_ARG_HI:
                return ctl.start.arg >> 32
            if addr == TRIG_STOP_MODE:
                return ctl.stop.mode
            if addr == TRIG_STOP_ARG_LO:
                return ctl.stop.arg & WORD
            if addr == TRIG_STOP_ARG_HI:
                return ctl.stop.arg >> 32
            if addr == IRQ_CAUSE:
                return ctl.irq.pending
            if addr == TS_CTRL:
                return int(ctl.timestamping)
            if addr == DMA_CTRL:
                return m.dma.ctrl_word
            if addr == DMA_DEST:
                return m.dma.dest
            if addr == DMA_STATUS:
                return m.dma.status_word
            return 0
        index, off = divmod(addr - 0x100, 0x100)
        if index >= len(m.units):
            return 0
        unit = m.units[index]
        if off == UNIT_ID:
            return int(unit.type)
        if off == UNIT_CTRL:
            return unit.ctrl_word
        if off == UNIT_PID:
            return unit.pid
        if off == UNIT_STATUS:
            return (int(unit.enable and ctl.running) | int(unit.overflow) << 1
                    | int(unit.config_error) << 2)
        if off == DATA_INDEX:
            return self.data_index[index]
        if off == DATA_VALUE:
            payload = unit.payload()
            i = self.data_index[index] * 4
            return int.from_bytes(payload[i:i + 4], "little") if i + 4 <= len(payload) else 0
        return unit.read_param(off)

    def write(self, addr, value):
        check_address(addr)
        value &= WORD
        m = self.m
        ctl = m.control
        if addr < 0x100:
            if addr == GLOBAL_CTRL:
                ctl.enabled = bool(value & CTRL_ENABLE)
                ctl.irq.enabled = bool(value & CTRL_IRQ_EN)
                if value & CTRL_RESET:
                    m.reset()
            elif addr == TRIG_START_MODE:
                ctl.set_start(mode=value)
            elif addr == TRIG_START_ARG_LO:
                ctl.set_start(arg=(ctl.start.arg & ~WORD) | value)
            elif addr == TRIG_START_ARG_HI:
                ctl.set_start(arg=(ctl.start.arg & WORD) | value << 32)
            elif addr == TRIG_STOP_MODE:
                ctl.set_stop(mode=value)
            elif addr == TRIG_STOP_ARG_LO:
                ctl.set_stop(arg=(ctl.stop.arg & ~WORD) | value)
            elif addr == TRIG_STOP_ARG_HI:
                ctl.set_stop(arg=(ctl.stop.arg & WORD) | value << 32)
            elif addr == IRQ_ACK:
                ctl.ack(value)
                if value & 0x10:
                    m.dma.done = False
            elif addr == TS_CTRL:
                ctl.timestamping = bool(value & 1)
            elif addr == DMA_CTRL:
                m.dma.auto_on_stop = bool(value & DMA_AUTO_ON_STOP)
                m.dma.contention = bool(value & DMA_CONTENTION)
                if value & DMA_START:
                    m.start_dma()
            elif addr == DMA_DEST:
                m.dma.dest = value
            return
        index, off = divmod(addr - 0x100, 0x100)
        if index >= len(m.units):
            return
        unit = m.units[index]
        if off == UNIT_CTRL:
            unit.set_ctrl(value)
        elif off == UNIT_PID:
            unit.pid = value & 0xFFFF
        elif off == DATA_INDEX:
            self.data_index[index] = value
        elif 0x10 <= off < 0x30:
            unit.write_param(off, value)
