# Per-process results on a multicore host
#
# Three processes migrate across four cores. A single histogram unit with
# attribution on still reports how many accesses each process made, and the
# latency unit shows what bus contention does to miss latency.
#
#     python demos/03_per_process_attribution.py

# %%
import numpy as np

from abacus import (MonitorConfig, ProcessConfig, SystemConfig, UnitConfig, WorkloadSpec,
                    run_bare, run_live)
from abacus.events import MEM

procs = [
    ProcessConfig(11, WorkloadSpec("random_uniform", 0, 16384, 600), threads=3, seed=7),
    ProcessConfig(12, WorkloadSpec("hot_cold", 16384, 16384, 600, hot_fraction=0.1), threads=2, seed=8),
    ProcessConfig(13, WorkloadSpec("strided", 32768, 16384, 500, stride=132), threads=2),
]
host = SystemConfig(ncores=4, quantum=150, switch_cost=3, processes=procs)

cfg = MonitorConfig(units=[
    UnitConfig(0, "HIST", attr_mode=True, params={"base": 0, "shift": 10, "nbuckets": 64}),
    UnitConfig(2, "LAT", attr_mode=True, params={"bucket_width": 8, "nbuckets": 16}),
    UnitConfig(3, "STALL", attr_mode=True),
])
res = run_live(host, cfg, 10 ** 7)

# %% [markdown]
# Which cores did each process run on? Threads are rescheduled on whichever
# core frees up first.

# %%
cores = {}
for ev in res.log:
    if ev.kind == MEM:
        cores.setdefault(ev.pid, set()).add(ev.core)
for pid, cs in sorted(cores.items()):
    print(f"pid {pid} ran on cores {sorted(cs)}")

# %%
hist = res.report.unit(0)
print("\nHIST accesses by pid:", {pid: v for pid, v in hist.attribution if pid != 0xFFFF})
counts = np.array(hist.fields["counts"])[:48].reshape(3, 16)
for pid, row in zip((11, 12, 13), counts):
    print(f"  region of pid {pid}: {row.tolist()}")
print("stall cycles by pid:", {pid: v for pid, v in res.report.unit(3).attribution if pid != 0xFFFF})

# %% [markdown]
# Latency with all four cores busy, against each process running alone on a
# one-core host. Caches are private, so a thread that migrates starts cold on
# its new core, and misses can queue behind other cores on the shared bus.

# %%
busy = np.array(res.report.unit(2).fields["counts"])
alone = np.zeros(16, dtype=int)
for p in procs:
    solo = run_bare(SystemConfig(ncores=1, processes=[p]), 10 ** 7)
    lat = np.array([ev.aux for ev in solo if ev.kind == MEM])
    alone += np.bincount(np.minimum(lat // 8, 15), minlength=16)
print("\nlatency bucket   alone   4 cores")
for i, (a, b) in enumerate(zip(alone, busy)):
    if a or b:
        label = f"{i * 8}-{i * 8 + 7}" if i < 15 else f"{i * 8}+"
        print(f"  {label:>10}  {a:7d}  {b:8d}")
