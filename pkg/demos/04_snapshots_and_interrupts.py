# Snapshots while the host runs, and interrupts
#
# Software can DMA the monitor's state into a page at any time without
# pausing the host. Here a driver takes a snapshot every 1000 cycles, then
# uses a trace-full interrupt to wake up exactly when a trace buffer fills.
#
#     python demos/04_snapshots_and_interrupts.py

# %%
from abacus import (MonitorConfig, Platform, ProcessConfig, SystemConfig, UnitConfig,
                    WorkloadSpec, build_system, dev_alloc_page, dev_configure, dev_map, dev_open,
                    dev_snapshot, dev_wait_irq, oracle_profile, report_to_dict)
from abacus import regfile as rf
from abacus.pmu import IRQ_TRACE_FULL

host = SystemConfig(ncores=2, quantum=150, processes=[
    ProcessConfig(1, WorkloadSpec("random_uniform", 0, 8192, 800), threads=2, seed=1),
    ProcessConfig(2, WorkloadSpec("hot_cold", 8192, 8192, 800), seed=2),
])

# %% [markdown]
# Periodic snapshots. Each one freezes the units at the moment DMA_CTRL.START
# is written and copies 4 bytes per cycle in the background.

# %%
cfg = MonitorConfig(units=[
    UnitConfig(0, "HIST", params={"base": 0, "shift": 11, "nbuckets": 8}),
    UnitConfig(2, "LAT", params={"bucket_width": 8, "nbuckets": 8}),
    UnitConfig(3, "STALL"),
], ncores=2)
plat = Platform(build_system(host))
h = dev_open(plat)
dev_configure(h, cfg)
pages = []
while not plat.source_finished:
    target = plat.cycle + 1000
    plat.run(until=lambda: plat.cycle >= target or plat.source_finished)
    page = dev_alloc_page(h)
    rep = dev_snapshot(h, page)
    pages.append(rep)
    print(f"cycle {rep.snapshot_cycle:6d}: {sum(rep.unit(0).fields['counts']):5d} accesses, "
          f"{rep.unit(3).fields['total']:6d} stall cycles")

# %% [markdown]
# Every snapshot equals the oracle run over the log prefix it covers.

# %%
ok = all(report_to_dict(r) == report_to_dict(oracle_profile(plat.log, cfg, 2, until=r.snapshot_cycle))
         for r in pages)
print("all snapshots match the oracle:", ok)

# %% [markdown]
# Interrupts. A 16-entry trace in STOP_ON_FULL mode raises TRACE_FULL when
# its last slot fills. dev_wait_irq drives the clock until then.

# %%
plat = Platform(build_system(host))
h = dev_open(plat)
dev_configure(h, MonitorConfig(units=[
    UnitConfig(1, "TRACE", params={"capacity": 16, "mode": "STOP_ON_FULL"})], irq_enable=True))
fired = dev_wait_irq(h, IRQ_TRACE_FULL, 100000)
regs = dev_map(h)
print(f"\nwait returned {fired:#x} at cycle {plat.cycle}")
print(f"IRQ_CAUSE={regs[rf.IRQ_CAUSE]:#x} GLOBAL_STATUS={regs[rf.GLOBAL_STATUS]:#x}")
regs[rf.IRQ_ACK] = IRQ_TRACE_FULL
print(f"after ack IRQ_CAUSE={regs[rf.IRQ_CAUSE]:#x}")

# %% [markdown]
# The register file can also be dumped raw, four words per line.

# %%
print()
print(rf.format_dump(regs.dump()[:16]))
