"""Co-simulation of a host (live or replayed) with an attached monitor."""

from .dma import PageMemory
from .monitor import DEFAULT_UNITS, Monitor


class ReplaySource:
    """Serves a recorded, cycle-ordered event log one cycle at a time."""

    def __init__(self, events):
        self.events = events
        self.pos = 0
        self.cycle = 0

    @property
    def finished(self):
        return self.pos >= len(self.events)

    def step(self):
        evs = self.events
        i = self.pos
        c = self.cycle
        j = i
        n = len(evs)
        while j < n and evs[j].cycle == c:
            j += 1
        if j < n and evs[j].cycle < c:
            raise ValueError(f"log is not cycle-ordered at record {j}")
        self.pos = j
        self.cycle = c + 1
        return evs[i:j]

    def next_event_cycle(self):
        return self.events[self.pos].cycle if self.pos < len(self.events) else None


class Platform:
    """One host plus one monitor sharing a single clock.

    ``source`` is a :class:`~abacus.simsys.System`, a :class:`ReplaySource`,
    or None for a bare monitor whose clock ticks with no events. With
    ``record=True`` every emitted event is appended to :attr:`log`.
    """

    def __init__(self, source=None, ncores=None, unit_types=DEFAULT_UNITS,
                 memory=None, attach=True, record=True, halt_on_irq=False):
        if ncores is None:
            ncores = source.cfg.ncores if hasattr(source, "cfg") else 1
        self.source = source
        self.memory = memory if memory is not None else PageMemory()
        self.monitor = Monitor(ncores, unit_types, self.memory) if attach else None
        self.record = record
        self.log = []
        self.halt_on_irq = halt_on_irq

    @property
    def cycle(self):
        if self.monitor is not None:
            return self.monitor.cycle
        return self.source.cycle

    @property
    def source_finished(self):
        return self.source is None or self.source.finished

    def step(self):
        """Advance one cycle. Returns True if the monitor's IRQ line asks to halt."""
        mon = self.monitor
        src = self.source
        if src is not None:
            if mon is not None and mon.dma.busy and mon.dma.contention and hasattr(src, "bus"):
                src.bus.block(src.cycle)
            events = src.step()
            if self.record:
                self.log.extend(events)
        else:
            events = ()
        if mon is not None:
            mon.step(events)
            return self.halt_on_irq and mon.control.irq.line
        return False

    def _can_skip(self, until):
        mon = self.monitor
        if self.halt_on_irq or until is not None:
            return False
        return mon is None or not (mon.dma.busy and mon.dma.contention)

    def _quiet_cycles(self):
        src = self.source
        if isinstance(src, ReplaySource):
            nxt = src.next_event_cycle()
        else:
            nxt = src.next_activity()
        return nxt - src.cycle

    def _skip(self, gap):
        src = self.source
        if self.monitor is not None:
            self.monitor.idle(gap)
        if isinstance(src, ReplaySource):
            src.cycle += gap
        else:
            src.skip_to(src.cycle + gap)

    def run(self, max_cycles=None, until=None):
        """Step until the source finishes, ``max_cycles`` total cycles, or ``until()``.

        Stops early (returning True) if ``halt_on_irq`` is set and the IRQ line rises.
        """
        if (until is None and not self.halt_on_irq and self.monitor is not None
                and hasattr(self.source, "next_activity")):
            return self._run_live(max_cycles)
        while not self.source_finished:
            if max_cycles is not None and self.cycle >= max_cycles:
                break
            if until is not None and until():
                break
            if self._can_skip(until):
                gap = self._quiet_cycles()
                if gap > 0:
                    if max_cycles is not None:
                        gap = min(gap, max_cycles - self.cycle)
                    self._skip(gap)
                    continue
            if self.step():
                return True
        return False

    def _run_live(self, max_cycles):
        # the common case of run(), with the per-cycle lookups hoisted
        src, mon = self.source, self.monitor
        ctl, dma = mon.control, mon.dma
        sim_step, mon_step = src.step, mon.step
        next_activity = src.next_activity
        log_extend = self.log.extend
        limit = (1 << 64) if max_cycles is None else max_cycles
        while src.live:
            c = ctl.cycle
            if c >= limit:
                break
            if dma.busy and dma.contention:
                src.bus.block(src.cycle)
            else:
                gap = next_activity() - src.cycle
                if gap > 0:
                    self._skip(min(gap, limit - c))
                    continue
            events = sim_step()
            if self.record:
                log_extend(events)
            mon_step(events)
        return False
