"""Software-side driver model: ioctl/mmap register access, kernel pages, IRQ waits,
and the high-level :class:`MonitorConfig` expanded into register writes.

``dev_configure`` issues writes in a fixed, documented order:

1. for each configured unit, in ascending index:
   ``UNIT_CTRL = 0``, unit parameter registers (ascending offset),
   ``UNIT_PID``, then ``UNIT_CTRL`` with RESET plus the final control bits;
2. start trigger ``ARG_LO, ARG_HI, MODE``, then stop trigger likewise
   (writing a MODE register rearms the trigger window);
3. ``DMA_CTRL`` if ``dma_on_stop`` is given (contention bit preserved);
4. ``GLOBAL_CTRL`` with ENABLE (and IRQ_EN) last.
"""

from dataclasses import dataclass, field
from typing import List, Optional

from . import regfile as rf
from .control import TriggerMode, TriggerSpec
from .dma import DEFAULT_PAGE_SIZE, decode_page
from .errors import AbacusError, ConfigError, DeviceClosed
from .pmu import (KIND_INSTR, KIND_READ, KIND_WRITE, MAX_BUCKETS, MAX_HIST_SHIFT,
                  MAX_TRACE_CAPACITY, IRQ_DMA_DONE, TraceMode)

UNIT_PARAM_DEFAULTS = {
    "HIST": {"base": 0, "shift": 6, "nbuckets": 256},
    "TRACE": {"capacity": 1024, "mode": "WRAP", "kinds": ["read", "write"]},
    "LAT": {"bucket_width": 4, "nbuckets": 64, "irq_threshold": 0},
    "STALL": {"irq_threshold": 0},
}
_KIND_BITS = {"read": KIND_READ, "write": KIND_WRITE, "instr": KIND_INSTR}
_MODE_NAMES = {m.name: int(m) for m in TriggerMode}
_MODE_NAMES["NEVER"] = 0
U64 = (1 << 64) - 1


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _mode_name(mode, stop):
    if mode == 0:
        return "NEVER" if stop else "IMMEDIATE"
    return TriggerMode(mode).name


@dataclass
class UnitConfig:
    index: int
    type: str
    enable: bool = True
    core_mask: int = 0xFF
    pid_filter: Optional[int] = None
    attr_mode: bool = False
    params: dict = field(default_factory=dict)

    def full_params(self):
        p = dict(UNIT_PARAM_DEFAULTS.get(self.type, {}))
        p.update(self.params)
        if self.type == "TRACE":
            if _is_int(p["mode"]):
                p["mode"] = TraceMode(p["mode"]).name
            p["kinds"] = [k for k in ("read", "write", "instr") if k in p["kinds"]]
        return p


@dataclass
class MonitorConfig:
    trigger_start: Optional[TriggerSpec] = None
    trigger_stop: Optional[TriggerSpec] = None
    units: List[UnitConfig] = field(default_factory=list)
    dma_on_stop: Optional[bool] = None
    irq_enable: bool = False
    ncores: Optional[int] = None  # host core count; needed to replay logs faithfully

    def validate(self, unit_types=None):
        """Check every field; ``unit_types`` (installed types by index) adds index/type checks."""
        for name in ("trigger_start", "trigger_stop"):
            t = getattr(self, name)
            if t is None:
                continue
            if t.mode not in _MODE_NAMES.values():
                raise ConfigError(f"{name}.mode", f"unknown trigger mode {t.mode!r}")
            if not _is_int(t.arg) or not 0 <= t.arg <= U64:
                raise ConfigError(f"{name}.arg", "must be an unsigned 64-bit integer")
        if self.ncores is not None and (not _is_int(self.ncores) or not 1 <= self.ncores <= 8):
            raise ConfigError("ncores", "must be in 1..8")
        seen = set()
        for i, u in enumerate(self.units):
            path = f"units[{i}]"
            if not _is_int(u.index) or not 0 <= u.index < rf.MAX_UNITS:
                raise ConfigError(f"{path}.index", f"no unit window {u.index!r}")
            if u.index in seen:
                raise ConfigError(f"{path}.index", f"unit {u.index} configured twice")
            seen.add(u.index)
            if u.type not in UNIT_PARAM_DEFAULTS:
                raise ConfigError(f"{path}.type", f"unknown unit type {u.type!r}")
            if unit_types is not None:
                if u.index >= len(unit_types):
                    raise ConfigError(f"{path}.index", f"unit {u.index} is not installed")
                if unit_types[u.index] != u.type:
                    raise ConfigError(f"{path}.type",
                                      f"unit {u.index} is {unit_types[u.index]}, not {u.type}")
            if not _is_int(u.core_mask) or not 0 <= u.core_mask <= 0xFF:
                raise ConfigError(f"{path}.core_mask", "must be an 8-bit mask")
            if u.pid_filter is not None and (not _is_int(u.pid_filter) or not 0 <= u.pid_filter <= 0xFFFF):
                raise ConfigError(f"{path}.pid_filter", "must be a 16-bit pid or null")
            if not isinstance(u.enable, bool) or not isinstance(u.attr_mode, bool):
                raise ConfigError(path, "enable/attr_mode must be booleans")
            _validate_params(u, f"{path}.params")
        return self

    # -- JSON ------------------------------------------------------------
    def to_dict(self):
        d = {"units": [], "irq_enable": self.irq_enable}
        if self.trigger_start is not None:
            d["trigger_start"] = {"mode": _mode_name(self.trigger_start.mode, False),
                                  "arg": self.trigger_start.arg}
        if self.trigger_stop is not None:
            d["trigger_stop"] = {"mode": _mode_name(self.trigger_stop.mode, True),
                                 "arg": self.trigger_stop.arg}
        if self.dma_on_stop is not None:
            d["dma_on_stop"] = self.dma_on_stop
        if self.ncores is not None:
            d["ncores"] = self.ncores
        for u in self.units:
            d["units"].append({"index": u.index, "type": u.type, "enable": u.enable,
                               "core_mask": u.core_mask, "pid_filter": u.pid_filter,
                               "attr_mode": u.attr_mode, "params": u.full_params()})
        return d

    @classmethod
    def from_dict(cls, d, path="monitor"):
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        known = {"trigger_start", "trigger_stop", "units", "dma_on_stop", "irq_enable", "ncores"}
        for k in d:
            if k not in known:
                raise ConfigError(f"{path}.{k}", "unknown field")
        cfg = cls(
            trigger_start=_trigger_from(d.get("trigger_start"), f"{path}.trigger_start"),
            trigger_stop=_trigger_from(d.get("trigger_stop"), f"{path}.trigger_stop"),
            dma_on_stop=d.get("dma_on_stop"),
            irq_enable=d.get("irq_enable", False),
            ncores=d.get("ncores"),
        )
        if cfg.dma_on_stop is not None and not isinstance(cfg.dma_on_stop, bool):
            raise ConfigError(f"{path}.dma_on_stop", "must be a boolean")
        if not isinstance(cfg.irq_enable, bool):
            raise ConfigError(f"{path}.irq_enable", "must be a boolean")
        units = d.get("units", [])
        if not isinstance(units, list):
            raise ConfigError(f"{path}.units", "expected a list")
        for i, ud in enumerate(units):
            up = f"{path}.units[{i}]"
            if not isinstance(ud, dict):
                raise ConfigError(up, "expected an object")
            extra = set(ud) - {"index", "type", "enable", "core_mask", "pid_filter", "attr_mode", "params"}
            if extra:
                raise ConfigError(f"{up}.{sorted(extra)[0]}", "unknown field")
            if "index" not in ud or "type" not in ud:
                raise ConfigError(up, "index and type are required")
            params = ud.get("params", {})
            if not isinstance(params, dict):
                raise ConfigError(f"{up}.params", "expected an object")
            utype = ud["type"].upper() if isinstance(ud["type"], str) else ud["type"]
            cfg.units.append(UnitConfig(
                index=ud["index"], type=utype, enable=ud.get("enable", True),
                core_mask=ud.get("core_mask", 0xFF), pid_filter=ud.get("pid_filter"),
                attr_mode=ud.get("attr_mode", False), params=dict(params)))
        try:
            return cfg.validate()
        except ConfigError as e:
            raise ConfigError(f"{path}.{e.path}", e.message) from None


def _trigger_from(d, path):
    if d is None:
        return None
    if not isinstance(d, dict):
        raise ConfigError(path, "expected {mode, arg}")
    extra = set(d) - {"mode", "arg"}
    if extra:
        raise ConfigError(f"{path}.{sorted(extra)[0]}", "unknown field")
    mode = d.get("mode", 0)
    if isinstance(mode, str):
        if mode.upper() not in _MODE_NAMES:
            raise ConfigError(f"{path}.mode", f"unknown trigger mode {mode!r}")
        mode = _MODE_NAMES[mode.upper()]
    arg = d.get("arg", 0)
    return TriggerSpec(mode, arg)


def _validate_params(u, path):
    p = u.params
    allowed = UNIT_PARAM_DEFAULTS[u.type]
    for k in p:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}", f"not a {u.type} parameter")
    full = u.full_params() if u.type != "TRACE" else {**allowed, **p}

    def rng(key, lo, hi):
        v = full[key]
        if not _is_int(v) or not lo <= v <= hi:
            raise ConfigError(f"{path}.{key}", f"must be an integer in [{lo}, {hi}]")

    if u.type == "HIST":
        rng("base", 0, U64)
        rng("shift", 0, MAX_HIST_SHIFT)
        rng("nbuckets", 1, MAX_BUCKETS)
    elif u.type == "TRACE":
        rng("capacity", 1, MAX_TRACE_CAPACITY)
        mode = full["mode"]
        if not (mode in ("WRAP", "STOP_ON_FULL") or mode in (0, 1)):
            raise ConfigError(f"{path}.mode", "must be WRAP or STOP_ON_FULL")
        kinds = full["kinds"]
        if not isinstance(kinds, list) or any(k not in _KIND_BITS for k in kinds):
            raise ConfigError(f"{path}.kinds", "must be a list drawn from read/write/instr")
    elif u.type == "LAT":
        rng("bucket_width", 1, 0xFFFFFFFF)
        rng("nbuckets", 1, MAX_BUCKETS)
        rng("irq_threshold", 0, 0xFFFFFFFF)
    elif u.type == "STALL":
        rng("irq_threshold", 0, U64)


def _param_writes(u, base):
    p = u.full_params()
    if u.type == "HIST":
        return [(base + 0x10, p["base"] & rf.WORD), (base + 0x14, p["base"] >> 32),
                (base + 0x18, p["shift"]), (base + 0x1C, p["nbuckets"])]
    if u.type == "TRACE":
        kinds = sum(_KIND_BITS[k] for k in set(p["kinds"]))
        return [(base + 0x10, p["capacity"]), (base + 0x14, int(TraceMode[p["mode"]])),
                (base + 0x18, kinds)]
    if u.type == "LAT":
        return [(base + 0x10, p["bucket_width"]), (base + 0x14, p["nbuckets"]),
                (base + 0x18, p["irq_threshold"])]
    return [(base + 0x10, p["irq_threshold"] & rf.WORD), (base + 0x14, p["irq_threshold"] >> 32)]


def plan_writes(cfg, dma_ctrl=0):
    """The exact (address, value) sequence ``dev_configure`` issues for ``cfg``."""
    writes = []
    for u in sorted(cfg.units, key=lambda u: u.index):
        b = rf.unit_base(u.index)
        writes.append((b + rf.UNIT_CTRL, 0))
        writes += _param_writes(u, b)
        writes.append((b + rf.UNIT_PID, u.pid_filter or 0))
        ctrl = (rf.UCTRL_RESET | (rf.UCTRL_ENABLE if u.enable else 0)
                | (rf.UCTRL_PID_FILTER if u.pid_filter is not None else 0)
                | (rf.UCTRL_ATTR if u.attr_mode else 0) | u.core_mask << rf.UCTRL_CORE_SHIFT)
        writes.append((b + rf.UNIT_CTRL, ctrl))
    for spec, lo, hi, mode in ((cfg.trigger_start, rf.TRIG_START_ARG_LO, rf.TRIG_START_ARG_HI,
                                rf.TRIG_START_MODE),
                               (cfg.trigger_stop, rf.TRIG_STOP_ARG_LO, rf.TRIG_STOP_ARG_HI,
                                rf.TRIG_STOP_MODE)):
        if spec is not None:
            writes += [(lo, spec.arg & rf.WORD), (hi, spec.arg >> 32), (mode, int(spec.mode))]
    if cfg.dma_on_stop is not None:
        v = (dma_ctrl & rf.DMA_CONTENTION) | (rf.DMA_AUTO_ON_STOP if cfg.dma_on_stop else 0)
        writes.append((rf.DMA_CTRL, v))
    writes.append((rf.GLOBAL_CTRL, rf.CTRL_ENABLE | (rf.CTRL_IRQ_EN if cfg.irq_enable else 0)))
    return writes


# -- device handle -----------------------------------------------------------

class DeviceHandle:
    """An open handle on one monitor. ``platform`` supplies the shared clock."""

    def __init__(self, platform):
        self.platform = platform
        self.monitor = platform.monitor
        self.is_open = True

    def _check(self):
        if not self.is_open:
            raise DeviceClosed("operation on a closed device handle")
        return self.monitor

    def close(self):
        self.is_open = False

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class MappedView:
    """Word-addressed view of the whole register space (the mmap path)."""

    def __init__(self, handle):
        self._h = handle

    def read(self, addr):
        return self._h._check().reg_read(addr)

    def write(self, addr, value):
        self._h._check().reg_write(addr, value)

    __getitem__ = read
    __setitem__ = write

    def __len__(self):
        return rf.SPACE_SIZE

    def dump(self):
        return [self.read(a) for a in range(0, rf.SPACE_SIZE, 4)]


def dev_open(platform):
    if platform.monitor is None:
        raise AbacusError("no monitor attached to this platform")
    return DeviceHandle(platform)


def dev_close(h):
    h.close()


def dev_ioctl_read(h, addr):
    return h._check().reg_read(addr)


def dev_ioctl_write(h, addr, value):
    h._check().reg_write(addr, value)


def dev_map(h):
    h._check()
    return MappedView(h)


def dev_alloc_page(h, page_size=DEFAULT_PAGE_SIZE):
    h._check()
    return h.platform.memory.alloc(page_size)


def dev_read_page(h, index):
    h._check()
    return bytes(h.platform.memory[index])


def dev_wait_irq(h, cause_mask, timeout_cycles):
    """Block (advancing the shared clock) until a cause in ``cause_mask`` is pending.

    Returns the pending causes within the mask, or 0 on timeout. Causes are
    not acknowledged.
    """
    mon = h._check()
    irq = mon.control.irq
    fired = irq.pending & cause_mask
    if fired:
        return fired
    plat = h.platform
    for _ in range(timeout_cycles):
        plat.step()
        fired = irq.pending & cause_mask
        if fired:
            return fired
    return 0


def dev_configure(h, cfg):
    """Apply ``cfg`` through register writes; invalid configs are rejected before any write."""
    mon = h._check()
    cfg.validate(mon.unit_types)
    if cfg.ncores is not None and cfg.ncores != mon.ncores:
        raise ConfigError("ncores", f"monitor is attached to {mon.ncores} cores, not {cfg.ncores}")
    writes = plan_writes(cfg, mon.reg_read(rf.DMA_CTRL))
    for addr, value in writes:
        mon.reg_write(addr, value)
    return writes


def dev_readback(h):
    """Reconstruct the full MonitorConfig currently programmed into the device."""
    mon = h._check()
    rd = mon.reg_read
    units = []
    for i, t in enumerate(mon.unit_types):
        b = rf.unit_base(i)
        ctrl = rd(b + rf.UNIT_CTRL)
        if t == "HIST":
            params = {"base": rd(b + 0x10) | rd(b + 0x14) << 32, "shift": rd(b + 0x18),
                      "nbuckets": rd(b + 0x1C)}
        elif t == "TRACE":
            kinds = rd(b + 0x18)
            params = {"capacity": rd(b + 0x10), "mode": TraceMode(rd(b + 0x14)).name,
                      "kinds": [k for k in ("read", "write", "instr") if kinds & _KIND_BITS[k]]}
        elif t == "LAT":
            params = {"bucket_width": rd(b + 0x10), "nbuckets": rd(b + 0x14),
                      "irq_threshold": rd(b + 0x18)}
        else:
            params = {"irq_threshold": rd(b + 0x10) | rd(b + 0x14) << 32}
        units.append(UnitConfig(
            index=i, type=t, enable=bool(ctrl & rf.UCTRL_ENABLE),
            core_mask=(ctrl >> rf.UCTRL_CORE_SHIFT) & 0xFF,
            pid_filter=rd(b + rf.UNIT_PID) if ctrl & rf.UCTRL_PID_FILTER else None,
            attr_mode=bool(ctrl & rf.UCTRL_ATTR), params=params))
    gctrl = rd(rf.GLOBAL_CTRL)
    return MonitorConfig(
        trigger_start=TriggerSpec(rd(rf.TRIG_START_MODE),
                                  rd(rf.TRIG_START_ARG_LO) | rd(rf.TRIG_START_ARG_HI) << 32),
        trigger_stop=TriggerSpec(rd(rf.TRIG_STOP_MODE),
                                 rd(rf.TRIG_STOP_ARG_LO) | rd(rf.TRIG_STOP_ARG_HI) << 32),
        units=units,
        dma_on_stop=bool(rd(rf.DMA_CTRL) & rf.DMA_AUTO_ON_STOP),
        irq_enable=bool(gctrl & rf.CTRL_IRQ_EN),
        ncores=mon.ncores,
    )


def dev_snapshot(h, page, timeout_cycles=1 << 20):
    """DMA all enabled units into ``page``, wait for completion and decode it."""
    mon = h._check()
    # a transfer already in flight (e.g. auto-DMA on stop) must land first
    waited = 0
    while mon.reg_read(rf.DMA_STATUS) & rf.DMA_BUSY:
        if waited >= timeout_cycles:
            raise AbacusError("DMA engine stayed busy")
        h.platform.step()
        waited += 1
    mon.reg_write(rf.IRQ_ACK, IRQ_DMA_DONE)
    mon.reg_write(rf.DMA_DEST, page)
    mon.reg_write(rf.DMA_CTRL, mon.reg_read(rf.DMA_CTRL) | rf.DMA_START)
    if not dev_wait_irq(h, IRQ_DMA_DONE, timeout_cycles):
        raise AbacusError("DMA did not complete")
    status = mon.reg_read(rf.DMA_STATUS)
    if status & rf.DMA_BAD_DEST:
        raise AbacusError(f"DMA destination page {page} is not allocated")
    return decode_page(dev_read_page(h, page))
