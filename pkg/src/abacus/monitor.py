"""The monitor device: control logic + monitoring units + DMA behind a register file."""

from .control import Control
from .dma import DmaEngine
from .pmu import IRQ_DMA_DONE, make_unit
from .regfile import MAX_UNITS, RegisterFile, map_layout

DEFAULT_UNITS = ("HIST", "TRACE", "LAT", "STALL")


class Monitor:
    """A monitor instance attached to an ``ncores``-core host.

    ``unit_types`` is the build-time selection of units, one per window.
    ``memory`` is the page pool DMA writes into (usually owned by the driver).
    Between cycles, software talks to it with :meth:`reg_read` /
    :meth:`reg_write`; the host clock drives it with :meth:`step`.
    """

    def __init__(self, ncores=1, unit_types=DEFAULT_UNITS, memory=None):
        if not 1 <= ncores <= 8:
            raise ValueError("ncores must be in 1..8")
        if len(unit_types) > MAX_UNITS:
            raise ValueError(f"at most {MAX_UNITS} units")
        self.ncores = ncores
        self.memory = memory
        self.control = Control()
        self.units = [make_unit(t, index=i, ncores=ncores) for i, t in enumerate(unit_types)]
        self.unit_types = tuple(u.type.name for u in self.units)
        self.dma = DmaEngine()
        self._now = 0
        for u in self.units:
            u.irq = self._unit_irq
        self.regs = RegisterFile(self)
        self.reg_read = self.regs.read
        self.reg_write = self.regs.write

    @property
    def cycle(self):
        return self.control.cycle

    def map_layout(self):
        return map_layout(self.unit_types, self.ncores)

    def _unit_irq(self, cause):
        self.control.post_interrupt(cause, self._now)

    def reset(self):
        """Global RESET: clear unit data, trigger state, IRQ causes and DMA status.

        Configuration registers and the cycle counter are preserved.
        """
        for u in self.units:
            u.reset()
        self.control.rearm()
        self.control.irq.pending = 0
        self.control.irq.posted_at.clear()
        self.dma.reset()

    def start_dma(self):
        if self.dma.start(self.units, self.control.cycle, self.memory):
            self.control.post_interrupt(IRQ_DMA_DONE, self.control.cycle)

    def step(self, events=()):
        """Advance one cycle, observing ``events`` (all stamped with the current cycle)."""
        ctl = self.control
        directive = ctl.step_cycle(events)
        now = directive.timestamp
        self._now = now
        if directive.active and events:
            ts = now if ctl.timestamping else 0
            for u in self.units:
                if not u.enable:
                    continue
                mask = u.core_mask
                filt = u.pid if u.pid_filter_en else None
                observe = u.observe
                for ev in events:
                    if (mask >> ev.core) & 1 and (filt is None or ev.pid == filt):
                        observe(ev, ts)
        if self.dma.busy and self.dma.tick():
            ctl.post_interrupt(IRQ_DMA_DONE, now)
        if directive.stopped and self.dma.auto_on_stop:
            self.start_dma()
        return directive

    def idle(self, ncycles):
        """Advance ``ncycles`` event-free cycles, skipping ahead where nothing can change."""
        ctl = self.control
        target = ctl.cycle + ncycles
        while ctl.cycle < target:
            if self.dma.busy:
                self.step(())
                continue
            wake = ctl.next_wakeup()
            if wake is None or wake >= target:
                ctl.cycle = target
                break
            if wake > ctl.cycle:
                ctl.cycle = wake
            self.step(())

    def feed(self, events):
        """Replay a whole cycle-ordered event log through the monitor."""
        i, n = 0, len(events)
        while i < n:
            c = events[i].cycle
            j = i + 1
            while j < n and events[j].cycle == c:
                j += 1
            if c < self.control.cycle:
                raise ValueError(f"event at cycle {c} is in the past (now {self.control.cycle})")
            self.idle(c - self.control.cycle)
            self.step(events[i:j])
            i = j
