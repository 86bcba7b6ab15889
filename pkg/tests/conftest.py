import json
import pathlib

import numpy as np

from abacus.control import TriggerSpec
from abacus.driver import MonitorConfig, UnitConfig
from abacus.events import INSTR, MEM, SWITCH
from abacus.simsys import ProcessConfig, SystemConfig, WorkloadSpec

FIXTURES = pathlib.Path(__file__).parent / "fixtures"
GOLDEN = pathlib.Path(__file__).parent / "golden"

PATTERNS = ("seq_scan", "strided", "random_uniform", "hot_cold")


def random_system(seed, max_ops=300, max_cores=4):
    """A small random host: a few processes, mixed patterns, sometimes pinned."""
    rng = np.random.default_rng(seed)
    ncores = int(rng.integers(1, max_cores + 1))
    procs = []
    pids = rng.choice(np.arange(1, 40), size=int(rng.integers(1, 5)), replace=False)
    for pid in pids.tolist():
        size = int(2 ** rng.integers(8, 15))
        spec = WorkloadSpec(
            pattern=str(rng.choice(PATTERNS)),
            region_base=int(rng.integers(0, 64)) * 4096,
            region_size=size,
            ops=int(rng.integers(0, max_ops)),
            write_ratio=float(rng.choice([0.0, 0.3, 1.0])),
            compute_gap=int(rng.integers(0, 4)),
            stride=int(rng.choice([4, 64, 132])),
        )
        pin = int(rng.integers(0, ncores)) if rng.random() < 0.2 else None
        procs.append(ProcessConfig(pid, spec, threads=int(rng.integers(1, 4)),
                                   seed=int(rng.integers(0, 1000)), pin=pin))
    return SystemConfig(
        ncores=ncores,
        cache_size=int(2 ** rng.integers(9, 13)),
        line_bytes=int(rng.choice([16, 32, 64])),
        transfer_cycles=int(rng.integers(1, 6)),
        memory_latency=int(rng.integers(0, 30)),
        quantum=int(rng.integers(30, 400)),
        switch_cost=int(rng.integers(0, 8)),
        processes=procs,
    )


def _trigger(rng, log):
    """A trigger whose argument usually matches something in ``log``."""
    mode = int(rng.integers(0, 5))
    if mode == 0:
        return TriggerSpec(0, 0) if rng.random() < 0.5 else None
    last = log[-1].cycle if log else 100
    if mode == 1:
        return TriggerSpec(1, int(rng.integers(0, last + 2)))
    kind = {2: MEM, 3: INSTR, 4: SWITCH}[mode]
    pool = [ev for ev in log if ev.kind == kind]
    if not pool or rng.random() < 0.1:
        return TriggerSpec(mode, int(rng.integers(0, 1 << 16)))
    ev = pool[int(rng.integers(0, len(pool)))]
    arg = ev.aux & 0xFFFF if mode == 4 else ev.addr
    return TriggerSpec(mode, arg)


def random_unit(rng, index, utype, pids):
    pid_filter = None
    if pids and rng.random() < 0.3:
        pid_filter = int(rng.choice(pids))
    core_mask = 0xFF if rng.random() < 0.5 else int(rng.integers(0, 256))
    if utype == "HIST":
        params = dict(base=int(rng.integers(0, 32)) * 2048, shift=int(rng.integers(2, 10)),
                      nbuckets=int(rng.integers(1, 200)))
    elif utype == "TRACE":
        kinds = [k for k in ("read", "write", "instr") if rng.random() < 0.6]
        params = dict(capacity=int(rng.integers(1, 300)),
                      mode=str(rng.choice(["WRAP", "STOP_ON_FULL"])), kinds=kinds)
    elif utype == "LAT":
        params = dict(bucket_width=int(rng.integers(1, 9)), nbuckets=int(rng.integers(1, 40)))
    else:
        params = {}
    return UnitConfig(index, utype, enable=bool(rng.random() < 0.9), core_mask=core_mask,
                      pid_filter=pid_filter, attr_mode=bool(rng.random() < 0.5), params=params)


def random_monitor(seed, log, ncores):
    rng = np.random.default_rng([seed, 7])
    pids = sorted({ev.pid for ev in log if ev.pid})
    units = [random_unit(rng, i, t, pids) for i, t in enumerate(("HIST", "TRACE", "LAT", "STALL"))]
    return MonitorConfig(trigger_start=_trigger(rng, log),
                         trigger_stop=_trigger(rng, log),
                         units=units, ncores=ncores)


def full_monitor(ncores=None, attr=True, **kw):
    """All four default units enabled, attribution on."""
    units = [UnitConfig(0, "HIST", attr_mode=attr, params=dict(base=0, shift=8, nbuckets=4096)),
             UnitConfig(1, "TRACE", params=dict(capacity=256)),
             UnitConfig(2, "LAT", attr_mode=attr),
             UnitConfig(3, "STALL", attr_mode=attr)]
    return MonitorConfig(units=units, ncores=ncores, **kw)


def load_json(path):
    with open(path) as f:
        return json.load(f)


# one line per acceptance criterion, echoed at the end of the session
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
