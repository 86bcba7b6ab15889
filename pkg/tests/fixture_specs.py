"""Definitions of the shipped run manifests.

Each fixture directory under tests/fixtures holds the manifest, the monitor
config on its own, the emitted event log and the live report. The golden
manifest lives in tests/golden. See make_goldens.py.
"""

CODE_BASE = 1 << 32


def pc(pid, j):
    return CODE_BASE + (pid << 20) + 4 * j


def proc(pid, pattern="seq_scan", base=0, size=4096, ops=200, threads=1, seed=1, pin=None, **prog):
    program = {"pattern": pattern, "region": {"base": base, "size_bytes": size}, "ops": ops}
    program.update(prog)
    return {"pid": pid, "threads": threads, "seed": seed, "pin": pin, "program": program}


def system(ncores, processes, cache=2048, line=64, transfer=4, latency=20, quantum=500, switch=0):
    return {
        "ncores": ncores,
        "cache": {"size_bytes": cache, "line_bytes": line, "hit_latency": 1},
        "bus": {"arbitration": "round-robin", "transfer_cycles": transfer},
        "memory": {"latency_cycles": latency},
        "scheduler": {"quantum_cycles": quantum, "context_switch_cost_cycles": switch},
        "processes": processes,
    }


def hist(index=0, base=0, shift=6, nbuckets=256, **kw):
    return dict(index=index, type="HIST", params={"base": base, "shift": shift, "nbuckets": nbuckets}, **kw)


def trace(index=1, capacity=64, mode="WRAP", kinds=("read", "write"), **kw):
    return dict(index=index, type="TRACE",
                params={"capacity": capacity, "mode": mode, "kinds": list(kinds)}, **kw)


def lat(index=2, width=4, nbuckets=32, **kw):
    return dict(index=index, type="LAT", params={"bucket_width": width, "nbuckets": nbuckets}, **kw)


def stall(index=3, **kw):
    return dict(index=index, type="STALL", **kw)


def all_units(attr=True):
    return [hist(attr_mode=attr), trace(), lat(attr_mode=attr), stall(attr_mode=attr)]


FIXTURES = {
    "f00_zero_ops": (
        system(1, [proc(1, ops=0)]),
        {"units": all_units()},
    ),
    "f01_seq_single_core": (
        system(1, [proc(1, ops=400, compute_gap=1, write_ratio=0.25)]),
        {"units": all_units(attr=False)},
    ),
    "f02_window_mem_to_cycle": (
        system(2, [proc(1, ops=300, threads=2), proc(2, "random_uniform", 8192, 8192, 300, seed=4)],
               quantum=200),
        {"trigger_start": {"mode": "MEM_ADDR_ACCESS", "arg": 0x100},
         "trigger_stop": {"mode": "CYCLE_COUNT", "arg": 2500},
         "units": [hist(), trace(capacity=4096, kinds=("read", "write", "instr")), lat(), stall()]},
    ),
    "f03_three_procs_four_cores": (
        system(4, [proc(11, "random_uniform", 0, 16384, 600, threads=3, seed=7),
                   proc(12, "hot_cold", 16384, 16384, 600, threads=2, seed=8),
                   proc(13, "strided", 32768, 16384, 500, threads=2, stride=132)],
               quantum=150, switch=3),
        {"units": [hist(shift=10, nbuckets=64, attr_mode=True), trace(), lat(attr_mode=True),
                   stall(attr_mode=True)]},
    ),
    "f04_trace_stop_on_full": (
        system(2, [proc(1, ops=120, threads=2), proc(2, ops=120, base=4096)]),
        {"units": [hist(), trace(capacity=16, mode="STOP_ON_FULL"), lat(), stall()],
         "irq_enable": True},
    ),
    "f05_filters": (
        system(3, [proc(5, "random_uniform", 0, 4096, 300, seed=2),
                   proc(6, "random_uniform", 4096, 4096, 300, seed=3),
                   proc(7, ops=300, base=8192, threads=2)], quantum=120),
        {"units": [hist(pid_filter=6, attr_mode=True, shift=7, nbuckets=128),
                   trace(core_mask=0b010, capacity=128),
                   lat(core_mask=0b101, attr_mode=True), stall(pid_filter=7)]},
    ),
    "f06_instr_to_pid": (
        system(1, [proc(21, ops=200), proc(22, ops=200, base=4096), proc(23, ops=200, base=8192)],
               quantum=300, switch=2),
        {"trigger_start": {"mode": "INSTR_ADDR", "arg": pc(21, 50)},
         "trigger_stop": {"mode": "PID_SCHEDULED", "arg": 23},
         "units": all_units()},
    ),
    "f07_hot_cold_latency": (
        system(4, [proc(3, "hot_cold", 0, 65536, 500, threads=4, seed=9, hot_fraction=0.05,
                        hot_bias=0.8, write_ratio=0.3)], cache=1024, line=32, transfer=6, latency=35),
        {"units": [hist(shift=12, nbuckets=16), trace(capacity=32), lat(width=8, nbuckets=16,
                                                                       attr_mode=True),
                   stall(attr_mode=True)]},
    ),
    "f08_dma_on_stop": (
        system(2, [proc(1, "random_uniform", 0, 8192, 400, threads=2, seed=5)]),
        {"trigger_stop": {"mode": "CYCLE_COUNT", "arg": 3000}, "dma_on_stop": True,
         "units": all_units()},
    ),
    "f09_strided_switch_cost": (
        system(2, [proc(31, "strided", 0, 8192, 250, threads=3, stride=260),
                   proc(32, "strided", 8192, 8192, 250, stride=64, compute_gap=2)],
               quantum=60, switch=5),
        {"units": [hist(shift=8, nbuckets=64, attr_mode=True),
                   trace(capacity=100, kinds=("instr", "write")), lat(), stall(attr_mode=True)]},
    ),
}

FIXTURE_NAMES = sorted(FIXTURES)


def fixture_manifest(name):
    sysd, mon = FIXTURES[name]
    mon = dict(mon, ncores=sysd["ncores"])
    return {"system": sysd, "monitor": mon, "max_cycles": 1_000_000,
            "outputs": {"report": "report.json"}}


def golden_manifest():
    return {
        "system": system(2, [proc(1, "random_uniform", 0, 4096, 64, threads=2, seed=42),
                             proc(2, ops=64, base=4096)], quantum=100, switch=1),
        "monitor": {"units": all_units(), "ncores": 2},
        "max_cycles": 100_000,
        "outputs": {"report": "golden_report.json"},
    }
