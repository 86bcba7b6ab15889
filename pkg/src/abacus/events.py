"""Snooped-signal event model and the "ABLG" binary event-log codec.

An event log is a plain list of :class:`CoreEvent`, globally ordered by
``(cycle, core, emission order)``. On disk it is an 8-byte header followed by
one 32-byte little-endian record per event::

    u8 rec_type | u8 core | u8 access | u8 pad | u16 pid | u16 tid |
    u64 cycle | u64 addr | u64 aux
"""

from enum import IntEnum
from typing import NamedTuple

import numpy as np

from .errors import DecodeError, EncodeError

LOG_MAGIC = 0x41424C47  # "ABLG"
LOG_VERSION = 1
HEADER_SIZE = 8
RECORD_SIZE = 32

PID_IDLE = 0
PID_OTHER = 0xFFFF
U64_MAX = (1 << 64) - 1


class EventKind(IntEnum):
    INSTR_RETIRED = 0
    MEM_ACCESS = 1
    STALL = 2
    CONTEXT_SWITCH = 3


class Access(IntEnum):
    READ = 0
    WRITE = 1
    NA = 255


INSTR = EventKind.INSTR_RETIRED
MEM = EventKind.MEM_ACCESS
STALL = EventKind.STALL
SWITCH = EventKind.CONTEXT_SWITCH
READ = Access.READ
WRITE = Access.WRITE
NA = Access.NA


class ProcessRef(NamedTuple):
    pid: int
    tid: int = 0

    def pack(self):
        return (self.tid << 16) | self.pid

    @classmethod
    def unpack(cls, word):
        return cls(word & 0xFFFF, (word >> 16) & 0xFFFF)


class CoreEvent(NamedTuple):
    """One snooped occurrence on a core, stamped at its completion cycle.

    ``addr`` is the PC for InstrRetired and the byte address for MemAccess.
    ``aux`` is the latency (MemAccess), the episode length (Stall), or the
    incoming process packed as ``tid << 16 | pid`` (ContextSwitch). For a
    ContextSwitch, ``pid``/``tid`` name the outgoing process.
    """

    kind: int
    core: int
    access: int
    pid: int
    tid: int
    cycle: int
    addr: int
    aux: int

    @property
    def proc(self):
        return ProcessRef(self.pid, self.tid)

    @property
    def incoming(self):
        return ProcessRef.unpack(self.aux)


def instr_retired(core, proc, cycle, pc):
    return CoreEvent(INSTR, core, NA, proc[0], proc[1], cycle, pc, 0)


def mem_access(core, proc, cycle, addr, access, latency):
    return CoreEvent(MEM, core, access, proc[0], proc[1], cycle, addr, latency)


def stall(core, proc, cycle, length):
    return CoreEvent(STALL, core, NA, proc[0], proc[1], cycle, 0, length)


def context_switch(core, outgoing, cycle, incoming):
    return CoreEvent(SWITCH, core, NA, outgoing[0], outgoing[1], cycle, 0,
                     ProcessRef(*incoming).pack())


RECORD_DTYPE = np.dtype([
    ("rec_type", "u1"), ("core", "u1"), ("access", "u1"), ("pad", "u1"),
    ("pid", "<u2"), ("tid", "<u2"),
    ("cycle", "<u8"), ("addr", "<u8"), ("aux", "<u8"),
])
assert RECORD_DTYPE.itemsize == RECORD_SIZE

_FIELDS = ["rec_type", "core", "access", "pid", "tid", "cycle", "addr", "aux"]
_HEADER = np.array([LOG_MAGIC, LOG_VERSION], dtype="<u4").tobytes()


def record_problem(ev):
    """Return a description of the first per-record invariant ``ev`` breaks, or None."""
    kind, core, access, pid, tid, cycle, addr, aux = ev
    if kind not in (0, 1, 2, 3):
        return f"unknown kind {kind}"
    if not 0 <= core <= 0xFF:
        return f"core {core} out of range"
    if not 0 <= pid <= 0xFFFF or not 0 <= tid <= 0xFFFF:
        return "pid/tid out of 16-bit range"
    if pid == PID_OTHER:
        return "pid 0xFFFF is reserved"
    for name, v in (("cycle", cycle), ("addr", addr), ("aux", aux)):
        if not 0 <= v <= U64_MAX:
            return f"{name} out of 64-bit range"
    if kind == MEM:
        if access not in (0, 1):
            return "MemAccess needs read or write access"
        if aux < 1:
            return "MemAccess latency must be >= 1"
    else:
        if access != NA:
            return "access is only meaningful for MemAccess"
        if kind == STALL and aux < 1:
            return "stall length must be >= 1"
        if kind == INSTR and aux != 0:
            return "InstrRetired aux must be 0"
        if kind in (STALL, SWITCH) and addr != 0:
            return "addr must be 0 for Stall/ContextSwitch"
        if kind == SWITCH and (aux >> 32 or (aux & 0xFFFF) == PID_OTHER):
            return "bad incoming process"
    return None


def encode_event_log(events):
    """Serialize events to "ABLG" bytes. Raises EncodeError naming the bad record."""
    events = list(events)
    for i, ev in enumerate(events):
        problem = record_problem(ev)
        if problem:
            raise EncodeError(problem, i)
    if not events:
        return _HEADER
    arr = np.empty(len(events), dtype=RECORD_DTYPE)
    cols = list(zip(*events))
    for name, col in zip(_FIELDS, cols):
        arr[name] = col
    arr["pad"] = 0
    return _HEADER + arr.tobytes()


def _header_check(data):
    if len(data) < 4:
        raise DecodeError("truncated header", 0)
    magic, = np.frombuffer(data, "<u4", 1, 0)
    if magic != LOG_MAGIC:
        raise DecodeError("bad magic", 0)
    if len(data) < HEADER_SIZE:
        raise DecodeError("truncated header", 4)
    version, = np.frombuffer(data, "<u4", 1, 4)
    if version != LOG_VERSION:
        raise DecodeError("bad version", 4)


def decode_event_array(data):
    """Decode "ABLG" bytes into a numpy structured array of records."""
    data = bytes(data)
    _header_check(data)
    body = len(data) - HEADER_SIZE
    n, rem = divmod(body, RECORD_SIZE)
    if rem:
        raise DecodeError("truncated record", HEADER_SIZE + n * RECORD_SIZE)
    arr = np.frombuffer(data, RECORD_DTYPE, n, HEADER_SIZE)
    bad = np.flatnonzero(arr["rec_type"] > 3)
    if bad.size:
        raise DecodeError(f"unknown rec_type {arr['rec_type'][bad[0]]}",
                          HEADER_SIZE + int(bad[0]) * RECORD_SIZE)
    is_mem = arr["rec_type"] == MEM
    bad_access = np.where(is_mem, arr["access"] > 1, arr["access"] != NA)
    bad = np.flatnonzero(bad_access | (arr["pad"] != 0))
    if bad.size:
        raise DecodeError("bad access/pad byte", HEADER_SIZE + int(bad[0]) * RECORD_SIZE)
    return arr


def decode_event_log(data):
    """Inverse of :func:`encode_event_log`."""
    arr = decode_event_array(data)
    if not len(arr):
        return []
    rows = arr[_FIELDS].tolist()
    make = CoreEvent._make
    return [make(r) for r in rows]


def write_log(path, events):
    with open(path, "wb") as f:
        f.write(encode_event_log(events))


def read_log(path):
    with open(path, "rb") as f:
        return decode_event_log(f.read())


def validate_event_stream(events):
    """Return a list of human-readable invariant violations ([] if the stream is valid).

    Checked: per-record field invariants, global (cycle, core) ordering,
    per-core cycle monotonicity, and PID continuity after context switches.
    """
    violations = []
    last_cycle = {}
    current = {}
    prev_key = None
    for i, ev in enumerate(events):
        problem = record_problem(ev)
        if problem:
            violations.append(f"record {i}: {problem}")
        key = (ev.cycle, ev.core)
        if prev_key is not None and key < prev_key:
            violations.append(f"record {i}: out of (cycle, core) order")
        prev_key = key
        c = ev.core
        if c in last_cycle and ev.cycle < last_cycle[c]:
            violations.append(f"record {i}: cycle goes backwards on core {c}")
        last_cycle[c] = ev.cycle
        if c in current and (ev.pid, ev.tid) != current[c]:
            exp = current[c]
            violations.append(
                f"record {i}: PID continuity broken on core {c}: "
                f"carries pid {ev.pid} tid {ev.tid}, expected pid {exp[0]} tid {exp[1]}")
        if ev.kind == SWITCH:
            current[c] = (ev.aux & 0xFFFF, (ev.aux >> 16) & 0xFFFF)
    return violations
