"""Pluggable performance-monitoring units.

Every unit shares the same control surface (enable, reset, core mask, PID
filter, per-PID attribution) and differs in what it accumulates:

* :class:`HistUnit` -- memory-access histogram over an address range
* :class:`TraceUnit` -- ring buffer of timestamped access records
* :class:`LatUnit` -- histogram of memory-access latencies
* :class:`StallUnit` -- stall cycles per core

Counters are 64-bit and saturate instead of wrapping. ``serialize`` produces
the little-endian payload image shared by the register data port and DMA.
"""

import struct
from collections import deque
from enum import IntEnum

from .errors import ConfigError
from .events import INSTR, MEM, PID_OTHER, STALL, U64_MAX, WRITE


class UnitType(IntEnum):
    ABSENT = 0
    HIST = 1
    TRACE = 2
    LAT = 3
    STALL = 4


class TraceMode(IntEnum):
    WRAP = 0
    STOP_ON_FULL = 1


# TRACE kind-mask bits
KIND_READ = 1
KIND_WRITE = 2
KIND_INSTR = 4

# IRQ cause bits (mirrors the IRQ_CAUSE register)
IRQ_TRIGGER_STOP = 1 << 0
IRQ_TRACE_FULL = 1 << 1
IRQ_LAT_THRESHOLD = 1 << 2
IRQ_STALL_THRESHOLD = 1 << 3
IRQ_DMA_DONE = 1 << 4

ATTR_CAPACITY = 8
MAX_BUCKETS = 4096
MAX_TRACE_CAPACITY = 65536
MAX_HIST_SHIFT = 32

_u32x2 = struct.Struct("<II")
_entry = struct.Struct("<QQHBBHH")


def _pack_u64s(values):
    return struct.pack(f"<{len(values)}Q", *values)


class Attribution:
    """Bounded per-PID accumulator: K named slots (first come) plus OTHER."""

    def __init__(self, capacity=ATTR_CAPACITY):
        self.capacity = capacity
        self.values = {}
        self.other = 0
        self.saturated = False

    def add(self, pid, amount):
        values = self.values
        if pid in values:
            v = values[pid] + amount
            if v > U64_MAX:
                v = U64_MAX
                self.saturated = True
            values[pid] = v
        elif len(values) < self.capacity:
            values[pid] = amount
        else:
            v = self.other + amount
            if v > U64_MAX:
                v = U64_MAX
                self.saturated = True
            self.other = v

    def lookup(self, pid):
        if pid == PID_OTHER:
            return self.other
        return self.values.get(pid, 0)

    def entries(self):
        return list(self.values.items()) + [(PID_OTHER, self.other)]

    def serialize(self):
        entries = self.entries()
        out = [_u32x2.pack(len(entries), 0)]
        out += [struct.pack("<IIQ", pid, 0, v) for pid, v in entries]
        return b"".join(out)


class Unit:
    """Common control state and the observe/serialize/reset contract."""

    type = UnitType.ABSENT

    def __init__(self, index=0, ncores=1):
        self.index = index
        self.ncores = ncores
        self.enable = False
        self.pid_filter_en = False
        self.attr_mode = False
        self.core_mask = 0
        self.pid = 0
        self.config_error = False
        self.irq = None  # callable(cause_bit, ...) installed by the monitor
        self._payload = None
        self._clear()

    # -- control ----------------------------------------------------------
    @property
    def ctrl_word(self):
        return (int(self.enable) | int(self.pid_filter_en) << 2
                | int(self.attr_mode) << 3 | (self.core_mask & 0xFF) << 16)

    def set_ctrl(self, word):
        self.enable = bool(word & 1)
        self.pid_filter_en = bool(word & 4)
        attr = bool(word & 8)
        if attr != self.attr_mode:
            self.attr_mode = attr
            self.attr = Attribution() if attr else None
            self._payload = None
        self.core_mask = (word >> 16) & 0xFF
        if word & 2:
            self.reset()

    def accepts(self, ev):
        if not (self.core_mask >> ev.core) & 1:
            return False
        if self.pid_filter_en and ev.pid != self.pid:
            return False
        return True

    def reset(self):
        """Zero all collected data; configuration is kept."""
        self._clear()
        self.config_error = False

    def _clear(self):
        self.attr = Attribution() if self.attr_mode else None
        self._payload = None

    @property
    def overflow(self):
        return False

    @property
    def attr_present(self):
        return self.attr is not None

    def observe(self, ev, timestamp):
        raise NotImplementedError

    def attribution_lookup(self, pid):
        if self.attr is None:
            raise ConfigError(f"units[{self.index}].attr_mode",
                              "attribution requested but ATTR_MODE is clear")
        return self.attr.lookup(pid)

    def payload(self):
        if self._payload is None:
            body = self._serialize_body()
            if self.attr is not None:
                body += self.attr.serialize()
            self._payload = body
        return self._payload

    serialize = payload

    def _serialize_body(self):
        raise NotImplementedError

    # -- unit-specific register window (offsets 0x10..0x2C) ---------------
    REGS = ()  # (offset, name, reset, lo, hi) ; lo/hi = legal range or None

    def read_param(self, off):
        return 0

    def write_param(self, off, value):
        pass

    def _check(self, value, lo, hi):
        if lo <= value <= hi:
            return True
        self.config_error = True
        return False


class HistUnit(Unit):
    type = UnitType.HIST
    REGS = (
        (0x10, "BASE_LO", 0, None, None),
        (0x14, "BASE_HI", 0, None, None),
        (0x18, "SHIFT", 6, 0, MAX_HIST_SHIFT),
        (0x1C, "NBUCKETS", 256, 1, MAX_BUCKETS),
    )

    def __init__(self, index=0, ncores=1, base=0, shift=6, nbuckets=256):
        self.base = base
        self.shift = shift
        self.nbuckets = nbuckets
        super().__init__(index, ncores)

    def _clear(self):
        super()._clear()
        self.counts = [0] * self.nbuckets
        self.out_of_range = 0
        self.saturated = False
        self._limit = self.base + (self.nbuckets << self.shift)

    @property
    def overflow(self):
        return self.saturated or (self.attr is not None and self.attr.saturated)

    @property
    def total(self):
        return sum(self.counts)

    def bucket_of(self, addr):
        if self.base <= addr < self._limit:
            return (addr - self.base) >> self.shift
        return None

    def observe(self, ev, timestamp):
        if ev.kind != MEM:
            return
        a = ev.addr
        self._payload = None
        if self.base <= a < self._limit:
            b = (a - self.base) >> self.shift
            c = self.counts[b]
            if c < U64_MAX:
                self.counts[b] = c + 1
            else:
                self.saturated = True
            if self.attr is not None:
                self.attr.add(ev.pid, 1)
        elif self.out_of_range < U64_MAX:
            self.out_of_range += 1
        else:
            self.saturated = True

    def _serialize_body(self):
        head = struct.pack("<QIIQ", self.base, self.shift, self.nbuckets, self.out_of_range)
        return head + _pack_u64s(self.counts)

    def read_param(self, off):
        if off == 0x10:
            return self.base & 0xFFFFFFFF
        if off == 0x14:
            return self.base >> 32
        if off == 0x18:
            return self.shift
        if off == 0x1C:
            return self.nbuckets
        return 0

    def write_param(self, off, value):
        # geometry changes invalidate collected data
        if off == 0x10:
            self.base = (self.base & ~0xFFFFFFFF) | value
        elif off == 0x14:
            self.base = (self.base & 0xFFFFFFFF) | (value << 32)
        elif off == 0x18:
            if not self._check(value, 0, MAX_HIST_SHIFT):
                return
            self.shift = value
        elif off == 0x1C:
            if not self._check(value, 1, MAX_BUCKETS):
                return
            self.nbuckets = value
        else:
            return
        self._clear()


class TraceUnit(Unit):
    type = UnitType.TRACE
    REGS = (
        (0x10, "CAPACITY", 1024, 1, MAX_TRACE_CAPACITY),
        (0x14, "MODE", 0, 0, 1),
        (0x18, "KIND_MASK", KIND_READ | KIND_WRITE, 0, 7),
    )
    RO_REGS = (
        (0x1C, "COUNT"),
        (0x20, "DROPPED_LO"),
        (0x24, "DROPPED_HI"),
    )

    def __init__(self, index=0, ncores=1, capacity=1024, mode=TraceMode.WRAP,
                 kinds=KIND_READ | KIND_WRITE):
        self.capacity = capacity
        self.mode = TraceMode(mode)
        self.kinds = kinds
        super().__init__(index, ncores)

    def _clear(self):
        super()._clear()
        self.entries = deque(maxlen=self.capacity)
        self.dropped = 0
        self.full = False

    @property
    def overflow(self):
        return self.dropped > 0

    @property
    def count(self):
        return len(self.entries)

    def observe(self, ev, timestamp):
        kind = ev.kind
        if kind == MEM:
            code = 1 if ev.access == WRITE else 0
            if not self.kinds & (KIND_WRITE if code else KIND_READ):
                return
            lat = ev.aux if ev.aux < 0xFFFF else 0xFFFF
        elif kind == INSTR:
            if not self.kinds & KIND_INSTR:
                return
            code = 2
            lat = 0
        else:
            return
        self._payload = None
        entries = self.entries
        if len(entries) == self.capacity:
            if self.mode == TraceMode.STOP_ON_FULL:
                if self.dropped < U64_MAX:
                    self.dropped += 1
                return
            if self.dropped < U64_MAX:
                self.dropped += 1
        entries.append((timestamp, ev.addr, ev.pid, ev.core, code, lat))
        if (self.mode == TraceMode.STOP_ON_FULL and not self.full
                and len(entries) == self.capacity):
            self.full = True
            if self.irq is not None:
                self.irq(IRQ_TRACE_FULL)

    def _serialize_body(self):
        head = struct.pack("<IIIIQ", self.capacity, int(self.mode), len(self.entries), 0,
                           self.dropped)
        pack = _entry.pack
        return head + b"".join(pack(t, a, p, c, k, l, 0) for t, a, p, c, k, l in self.entries)

    def read_param(self, off):
        if off == 0x10:
            return self.capacity
        if off == 0x14:
            return int(self.mode)
        if off == 0x18:
            return self.kinds
        if off == 0x1C:
            return len(self.entries)
        if off == 0x20:
            return self.dropped & 0xFFFFFFFF
        if off == 0x24:
            return self.dropped >> 32
        return 0

    def write_param(self, off, value):
        if off == 0x10:
            if not self._check(value, 1, MAX_TRACE_CAPACITY):
                return
            self.capacity = value
            self._clear()
        elif off == 0x14:
            if not self._check(value, 0, 1):
                return
            self.mode = TraceMode(value)
            self._clear()
        elif off == 0x18:
            if self._check(value, 0, 7):
                self.kinds = value

    def payload(self):
        # the trace payload carries per-entry PIDs; no attribution block
        if self._payload is None:
            self._payload = self._serialize_body()
        return self._payload

    serialize = payload

    def attribution_lookup(self, pid):
        raise ConfigError(f"units[{self.index}].attr_mode",
                          "TRACE units keep per-entry PIDs, not an attribution table")

    @property
    def attr_present(self):
        return False


class LatUnit(Unit):
    type = UnitType.LAT
    REGS = (
        (0x10, "BUCKET_WIDTH", 4, 1, 0xFFFFFFFF),
        (0x14, "NBUCKETS", 64, 1, MAX_BUCKETS),
        (0x18, "IRQ_THRESHOLD", 0, None, None),
    )

    def __init__(self, index=0, ncores=1, bucket_width=4, nbuckets=64, irq_threshold=0):
        self.bucket_width = bucket_width
        self.nbuckets = nbuckets
        self.irq_threshold = irq_threshold
        super().__init__(index, ncores)

    def _clear(self):
        super()._clear()
        self.counts = [0] * self.nbuckets
        self.saturated = False

    @property
    def overflow(self):
        return self.saturated or (self.attr is not None and self.attr.saturated)

    @property
    def total(self):
        return sum(self.counts)

    def bucket_of(self, latency):
        return min(latency // self.bucket_width, self.nbuckets - 1)

    def observe(self, ev, timestamp):
        if ev.kind != MEM:
            return
        self._payload = None
        lat = ev.aux
        b = lat // self.bucket_width
        if b >= self.nbuckets:
            b = self.nbuckets - 1
        c = self.counts[b]
        if c < U64_MAX:
            self.counts[b] = c + 1
        else:
            self.saturated = True
        if self.attr is not None:
            self.attr.add(ev.pid, 1)
        if self.irq_threshold and lat >= self.irq_threshold and self.irq is not None:
            self.irq(IRQ_LAT_THRESHOLD)

    def _serialize_body(self):
        return _u32x2.pack(self.bucket_width, self.nbuckets) + _pack_u64s(self.counts)

    def read_param(self, off):
        return {0x10: self.bucket_width, 0x14: self.nbuckets,
                0x18: self.irq_threshold}.get(off, 0)

    def write_param(self, off, value):
        if off == 0x10:
            if self._check(value, 1, 0xFFFFFFFF):
                self.bucket_width = value
                self._clear()
        elif off == 0x14:
            if self._check(value, 1, MAX_BUCKETS):
                self.nbuckets = value
                self._clear()
        elif off == 0x18:
            self.irq_threshold = value


class StallUnit(Unit):
    type = UnitType.STALL
    REGS = (
        (0x10, "IRQ_THRESHOLD_LO", 0, None, None),
        (0x14, "IRQ_THRESHOLD_HI", 0, None, None),
    )
    RO_REGS = (
        (0x18, "TOTAL_LO"),
        (0x1C, "TOTAL_HI"),
    )

    def __init__(self, index=0, ncores=1, irq_threshold=0):
        self.irq_threshold = irq_threshold
        super().__init__(index, ncores)

    def _clear(self):
        super()._clear()
        self.per_core = [0] * self.ncores
        self.total = 0
        self.saturated = False

    @property
    def overflow(self):
        return self.saturated or (self.attr is not None and self.attr.saturated)

    def observe(self, ev, timestamp):
        if ev.kind != STALL:
            return
        self._payload = None
        n = ev.aux
        c = ev.core
        if c < self.ncores:
            v = self.per_core[c] + n
            if v > U64_MAX:
                v = U64_MAX
                self.saturated = True
            self.per_core[c] = v
        before = self.total
        t = before + n
        if t > U64_MAX:
            t = U64_MAX
            self.saturated = True
        self.total = t
        if self.attr is not None:
            self.attr.add(ev.pid, n)
        thr = self.irq_threshold
        if thr and before < thr <= t and self.irq is not None:
            self.irq(IRQ_STALL_THRESHOLD)

    def _serialize_body(self):
        return struct.pack("<IIQ", self.ncores, 0, self.total) + _pack_u64s(self.per_core)

    def read_param(self, off):
        return {0x10: self.irq_threshold & 0xFFFFFFFF, 0x14: self.irq_threshold >> 32,
                0x18: self.total & 0xFFFFFFFF, 0x1C: self.total >> 32}.get(off, 0)

    def write_param(self, off, value):
        if off == 0x10:
            self.irq_threshold = (self.irq_threshold & ~0xFFFFFFFF) | value
        elif off == 0x14:
            self.irq_threshold = (self.irq_threshold & 0xFFFFFFFF) | (value << 32)


UNIT_CLASSES = {
    UnitType.HIST: HistUnit,
    UnitType.TRACE: TraceUnit,
    UnitType.LAT: LatUnit,
    UnitType.STALL: StallUnit,
}


def make_unit(kind, index=0, ncores=1, **params):
    if isinstance(kind, str):
        kind = UnitType[kind.upper()]
    return UNIT_CLASSES[UnitType(kind)](index=index, ncores=ncores, **params)


def unit_observe(unit, ev, timestamp, active=True):
    """Feed one event to ``unit`` applying the collection, core-mask and PID gates."""
    if active and unit.enable and unit.accepts(ev):
        unit.observe(ev, timestamp)


def unit_serialize(unit):
    return unit.payload()


def unit_reset(unit):
    unit.reset()


def attribution_lookup(unit, pid):
    return unit.attribution_lookup(pid)
