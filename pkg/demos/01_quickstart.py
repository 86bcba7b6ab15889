# Quickstart: monitor a small two-core host
#
# Build a simulated host, attach the monitor through the driver API, run the
# workload to completion, DMA a snapshot into a page and decode it. Then check
# the result against the offline oracle.
#
#     python demos/01_quickstart.py

# %%
import numpy as np

from abacus import (MonitorConfig, Platform, ProcessConfig, SystemConfig, UnitConfig,
                    WorkloadSpec, build_system, dev_alloc_page, dev_configure, dev_open,
                    dev_snapshot, oracle_profile, report_to_dict)

# %% [markdown]
# Two processes share a two-core host. Process 1 scans 8 KiB sequentially
# with two threads; process 2 hits a random word in its own 8 KiB region.

# %%
host = SystemConfig(ncores=2, quantum=300, processes=[
    ProcessConfig(1, WorkloadSpec("seq_scan", 0x0000, 8192, 600), threads=2),
    ProcessConfig(2, WorkloadSpec("random_uniform", 0x2000, 8192, 600), seed=7),
])
plat = Platform(build_system(host))
h = dev_open(plat)
page = dev_alloc_page(h)

# %% [markdown]
# One unit of each kind. The histogram covers 16 KiB in 1 KiB buckets and
# keeps a per-process breakdown.

# %%
cfg = MonitorConfig(units=[
    UnitConfig(0, "HIST", attr_mode=True, params={"base": 0, "shift": 10, "nbuckets": 16}),
    UnitConfig(1, "TRACE", params={"capacity": 8}),
    UnitConfig(2, "LAT", params={"bucket_width": 4, "nbuckets": 12}),
    UnitConfig(3, "STALL", attr_mode=True),
], ncores=2)
writes = dev_configure(h, cfg)
print(f"configured with {len(writes)} register writes")

plat.run()
report = dev_snapshot(h, page)
print(f"host finished; snapshot taken at cycle {report.snapshot_cycle}")

# %%
hist = report.unit(0)
counts = np.array(hist.fields["counts"])
print("\naddress histogram (1 KiB buckets)")
for i, c in enumerate(counts):
    print(f"  {i * 1024:#06x}  {c:5d}  {'#' * int(40 * c / counts.max())}")
print("accesses per pid:", {pid: v for pid, v in hist.attribution if pid != 0xFFFF})

# %%
lat = report.unit(2).fields
print("\nlatency buckets (4 cycles wide, last one open-ended)")
print(" ", lat["counts"])
stall = report.unit(3)
print("stall cycles per core:", stall.fields["per_core"])
print("stall cycles per pid: ", {pid: v for pid, v in stall.attribution if pid != 0xFFFF})

# %% [markdown]
# The trace keeps the last 8 accesses (WRAP mode).

# %%
for e in report.unit(1).fields["entries"]:
    print(f"  t={e['timestamp']:5d} core={e['core']} pid={e['pid']} addr={e['addr']:#06x} "
          f"lat={e['latency']}")

# %% [markdown]
# The oracle recomputes everything from the recorded event log with plain
# numpy passes. The two must agree exactly.

# %%
want = oracle_profile(plat.log, cfg, 2, until=report.snapshot_cycle)
print("\nlive == oracle:", report_to_dict(report) == report_to_dict(want))
