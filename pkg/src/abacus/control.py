"""Control logic: global cycle counter, trigger window, interrupt controller."""

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import NamedTuple, Optional

from .events import INSTR, MEM, SWITCH, U64_MAX
from .pmu import IRQ_TRIGGER_STOP


class TriggerMode(IntEnum):
    IMMEDIATE = 0  # as a stop trigger this value means NEVER
    CYCLE_COUNT = 1
    MEM_ADDR_ACCESS = 2
    INSTR_ADDR = 3
    PID_SCHEDULED = 4


NEVER = TriggerMode.IMMEDIATE
VALID_MODES = frozenset(int(m) for m in TriggerMode)


class Phase(Enum):
    ARMED = "ARMED"
    ACTIVE = "ACTIVE"
    DONE = "DONE"


@dataclass(frozen=True)
class TriggerSpec:
    mode: int = 0
    arg: int = 0


@dataclass
class WindowState:
    phase: Phase = Phase.ARMED
    start_cycle: Optional[int] = None
    stop_cycle: Optional[int] = None


@dataclass
class IrqState:
    pending: int = 0
    enabled: bool = False
    posted_at: dict = field(default_factory=dict)  # cause bit -> last posting cycle

    @property
    def line(self):
        return bool(self.pending) and self.enabled


class CollectionDirective(NamedTuple):
    active: bool
    timestamp: int
    stopped: bool = False


def evaluate_trigger(spec, cycle, events, stop=False):
    """Does ``spec`` fire during ``cycle`` given that cycle's events?

    Mode 0 means IMMEDIATE for a start trigger and NEVER for a stop trigger;
    unknown modes never fire.
    """
    mode, arg = spec.mode, spec.arg
    if mode == 0:
        return not stop
    if mode == TriggerMode.CYCLE_COUNT:
        return cycle >= arg
    if mode == TriggerMode.MEM_ADDR_ACCESS:
        return any(ev.kind == MEM and ev.addr == arg for ev in events)
    if mode == TriggerMode.INSTR_ADDR:
        return any(ev.kind == INSTR and ev.addr == arg for ev in events)
    if mode == TriggerMode.PID_SCHEDULED:
        pid = arg & 0xFFFF
        return any(ev.kind == SWITCH and (ev.aux & 0xFFFF) == pid for ev in events)
    return False


class Control:
    def __init__(self):
        self.cycle = 0
        self.enabled = False
        self.timestamping = True
        self.start = TriggerSpec()
        self.stop = TriggerSpec()
        self.window = WindowState()
        self.irq = IrqState()

    @property
    def config_error(self):
        return self.start.mode not in VALID_MODES or self.stop.mode not in VALID_MODES

    @property
    def running(self):
        return self.enabled and self.window.phase is Phase.ACTIVE

    @property
    def triggered(self):
        return self.window.phase is not Phase.ARMED

    def rearm(self):
        self.window = WindowState()

    def set_start(self, mode=None, arg=None):
        self.start = TriggerSpec(self.start.mode if mode is None else mode,
                                 self.start.arg if arg is None else arg)
        if mode is not None:
            self.rearm()

    def set_stop(self, mode=None, arg=None):
        self.stop = TriggerSpec(self.stop.mode if mode is None else mode,
                                self.stop.arg if arg is None else arg)
        if mode is not None:
            self.rearm()

    def step_cycle(self, events):
        """Advance one cycle and report whether this cycle's events are collected.

        The start trigger is evaluated before the stop trigger, and both the
        starting and the stopping cycle are inside the window.
        """
        c = self.cycle
        self.cycle = c + 1 if c < U64_MAX else c
        if not self.enabled:
            return CollectionDirective(False, c)
        w = self.window
        if w.phase is Phase.ARMED:
            if not evaluate_trigger(self.start, c, events):
                return CollectionDirective(False, c)
            w.phase = Phase.ACTIVE
            w.start_cycle = c
        elif w.phase is Phase.DONE:
            return CollectionDirective(False, c)
        if self.stop.mode != 0 and evaluate_trigger(self.stop, c, events, stop=True):
            w.phase = Phase.DONE
            w.stop_cycle = c
            self.post_interrupt(IRQ_TRIGGER_STOP, c)
            return CollectionDirective(True, c, True)
        return CollectionDirective(True, c)

    def next_wakeup(self):
        """Earliest cycle >= now at which an event-free cycle could change state.

        Returns None when nothing can happen without events.
        """
        if not self.enabled:
            return None
        w = self.window
        if w.phase is Phase.ARMED:
            spec, stop = self.start, False
        elif w.phase is Phase.ACTIVE:
            spec, stop = self.stop, True
        else:
            return None
        if spec.mode == 0:
            return None if stop else self.cycle
        if spec.mode == TriggerMode.CYCLE_COUNT:
            return max(self.cycle, spec.arg)
        return None

    def post_interrupt(self, cause, cycle=None):
        self.irq.pending |= cause
        self.irq.posted_at[cause] = self.cycle if cycle is None else cycle

    def ack(self, mask):
        self.irq.pending &= ~mask & 0x1F
