import numpy as np
import pytest

from abacus import regfile as rf
from abacus.control import TriggerSpec
from abacus.driver import (MonitorConfig, UnitConfig, dev_alloc_page, dev_close, dev_configure,
                           dev_ioctl_read, dev_ioctl_write, dev_map, dev_open, dev_readback,
                           dev_snapshot, dev_wait_irq, plan_writes)
from abacus.errors import AbacusError, AddressFault, ConfigError, DeviceClosed
from abacus.monitor import DEFAULT_UNITS
from abacus.oracle import oracle_profile
from abacus.platform import Platform
from abacus.pmu import IRQ_LAT_THRESHOLD, IRQ_TRIGGER_STOP
from abacus.report import report_to_dict
from abacus.runner import run_bare
from abacus.simsys import ProcessConfig, SystemConfig, WorkloadSpec, build_system

from conftest import random_unit


def bare_handle(ncores=1):
    return dev_open(Platform(None, ncores=ncores))


def test_ioctl_basics():
    h = bare_handle()
    assert dev_ioctl_read(h, 0x000) == 0
    dev_ioctl_write(h, rf.GLOBAL_CTRL, rf.CTRL_ENABLE)
    assert dev_ioctl_read(h, rf.GLOBAL_CTRL) & 1
    dev_ioctl_write(h, rf.GLOBAL_CTRL, 0)
    assert dev_ioctl_read(h, rf.GLOBAL_CTRL) & 1 == 0


def test_map_view():
    h = bare_handle()
    view = dev_map(h)
    assert view[rf.unit_base(0) + rf.UNIT_ID] == 1
    assert view[0x0FF8] == 0
    view[rf.GLOBAL_CTRL] = 0b10
    assert view[rf.GLOBAL_CTRL] == 0
    assert view[rf.GLOBAL_STATUS] == 4 << 8
    with pytest.raises(AddressFault):
        view[0x1000]


def test_closed_handle_rejects_everything():
    h = bare_handle()
    view = dev_map(h)
    dev_close(h)
    for call in (lambda: dev_ioctl_read(h, 0), lambda: dev_ioctl_write(h, 0, 1),
                 lambda: dev_map(h), lambda: dev_alloc_page(h), lambda: view[0],
                 lambda: dev_wait_irq(h, 1, 1), lambda: dev_configure(h, MonitorConfig())):
        with pytest.raises(DeviceClosed):
            call()


def test_page_allocation_limit():
    h = bare_handle()
    assert dev_alloc_page(h) == 0
    assert dev_alloc_page(h) == 1
    for i in range(2, 16):
        assert dev_alloc_page(h) == i
    with pytest.raises(AbacusError):
        dev_alloc_page(h)


def test_pages_start_zeroed():
    h = bare_handle()
    p = dev_alloc_page(h, page_size=256)
    assert h.platform.memory[p] == bytearray(256)


def _script(rng, n=300):
    """A random register access script over the whole space, with fault-free addresses."""
    ops = []
    for _ in range(n):
        addr = int(rng.integers(0, 0x400)) * 4
        if addr == rf.DMA_CTRL:
            addr = rf.DMA_DEST
        if rng.random() < 0.5:
            ops.append(("r", addr, 0))
        else:
            ops.append(("w", addr, int(rng.integers(0, 1 << 32))))
        if rng.random() < 0.05:
            ops.append(("step", 0, int(rng.integers(1, 20))))
    return ops


def _replay_script(ops, read, write, plat):
    out = []
    for kind, addr, value in ops:
        if kind == "r":
            out.append(read(addr))
        elif kind == "w":
            write(addr, value)
        else:
            for _ in range(value):
                plat.step()
    out.append([read(a) for a in range(0, 0x1000, 4)])
    return out


def test_path_equivalence():
    sc = SystemConfig(ncores=2, processes=[
        ProcessConfig(1, WorkloadSpec("random_uniform", 0, 4096, 300), threads=2)])
    for seed in range(5):
        ops = _script(np.random.default_rng(seed))
        results = []
        for path in ("direct", "ioctl", "map"):
            plat = Platform(build_system(sc))
            h = dev_open(plat)
            if path == "direct":
                rd, wr = plat.monitor.reg_read, plat.monitor.reg_write
            elif path == "ioctl":
                rd, wr = (lambda a: dev_ioctl_read(h, a)), (lambda a, v: dev_ioctl_write(h, a, v))
            else:
                view = dev_map(h)
                rd, wr = view.read, view.write
            results.append(_replay_script(ops, rd, wr, plat))
        assert results[0] == results[1] == results[2]


def test_wait_irq_returns_immediately_when_pending():
    h = bare_handle()
    mon = h.monitor
    mon.control.post_interrupt(IRQ_TRIGGER_STOP)
    c = mon.cycle
    assert dev_wait_irq(h, IRQ_TRIGGER_STOP, 100) == IRQ_TRIGGER_STOP
    assert mon.cycle == c


def test_wait_irq_fires_at_stop_cycle():
    h = bare_handle()
    dev_configure(h, MonitorConfig(trigger_stop=TriggerSpec(1, 500)))
    assert dev_wait_irq(h, IRQ_TRIGGER_STOP, 1000) == IRQ_TRIGGER_STOP
    mon = h.monitor
    assert mon.control.irq.posted_at[IRQ_TRIGGER_STOP] == 500
    assert mon.cycle == 501
    assert mon.reg_read(rf.IRQ_CAUSE) & IRQ_TRIGGER_STOP  # not acked


def test_wait_irq_times_out_when_threshold_disabled():
    sc = SystemConfig(ncores=1, processes=[ProcessConfig(1, WorkloadSpec("random_uniform", 0, 65536, 300))])
    plat = Platform(build_system(sc))
    h = dev_open(plat)
    dev_configure(h, MonitorConfig(units=[UnitConfig(2, "LAT", params={"irq_threshold": 0})]))
    assert dev_wait_irq(h, IRQ_LAT_THRESHOLD, 2000) == 0
    assert plat.cycle == 2000


def test_wait_irq_threshold_enabled_fires():
    sc = SystemConfig(ncores=1, processes=[ProcessConfig(1, WorkloadSpec("random_uniform", 0, 65536, 300))])
    plat = Platform(build_system(sc))
    h = dev_open(plat)
    dev_configure(h, MonitorConfig(units=[UnitConfig(2, "LAT", params={"irq_threshold": 20})]))
    assert dev_wait_irq(h, IRQ_LAT_THRESHOLD, 2000) == IRQ_LAT_THRESHOLD
    first_miss = next(ev.cycle for ev in plat.log if ev.kind == 1 and ev.aux >= 20)
    assert plat.cycle == first_miss + 1


def test_empty_config_writes_only_global_ctrl():
    h = bare_handle()
    assert dev_configure(h, MonitorConfig()) == [(rf.GLOBAL_CTRL, rf.CTRL_ENABLE)]


def test_configure_reflects_in_unit_window():
    h = bare_handle()
    dev_configure(h, MonitorConfig(units=[UnitConfig(0, "HIST", params=dict(base=0x1000, shift=6,
                                                                            nbuckets=128))]))
    b = rf.unit_base(0)
    assert [dev_ioctl_read(h, b + o) for o in (0x10, 0x14, 0x18, 0x1C)] == [0x1000, 0, 6, 128]
    assert dev_ioctl_read(h, b + rf.UNIT_CTRL) & rf.UCTRL_ENABLE


def test_configure_order_is_documented_sequence():
    cfg = MonitorConfig(trigger_start=TriggerSpec(2, 0x1_0000_2000), trigger_stop=TriggerSpec(1, 9),
                        units=[UnitConfig(2, "LAT", pid_filter=4, attr_mode=True),
                               UnitConfig(0, "HIST", core_mask=0x3)],
                        dma_on_stop=True, irq_enable=True)
    w = plan_writes(cfg)
    h0, l2 = rf.unit_base(0), rf.unit_base(2)
    assert w == [
        (h0 + 4, 0), (h0 + 0x10, 0), (h0 + 0x14, 0), (h0 + 0x18, 6), (h0 + 0x1C, 256),
        (h0 + 8, 0), (h0 + 4, 0x3 << 16 | 0b0011),
        (l2 + 4, 0), (l2 + 0x10, 4), (l2 + 0x14, 64), (l2 + 0x18, 0),
        (l2 + 8, 4), (l2 + 4, 0xFF << 16 | 0b1111),
        (rf.TRIG_START_ARG_LO, 0x2000), (rf.TRIG_START_ARG_HI, 1), (rf.TRIG_START_MODE, 2),
        (rf.TRIG_STOP_ARG_LO, 9), (rf.TRIG_STOP_ARG_HI, 0), (rf.TRIG_STOP_MODE, 1),
        (rf.DMA_CTRL, rf.DMA_AUTO_ON_STOP),
        (rf.GLOBAL_CTRL, rf.CTRL_ENABLE | rf.CTRL_IRQ_EN),
    ]


def test_manual_writes_equal_configure():
    cfg = MonitorConfig(trigger_stop=TriggerSpec(1, 700),
                        units=[UnitConfig(0, "HIST", attr_mode=True), UnitConfig(3, "STALL")])
    sc = SystemConfig(ncores=2, processes=[ProcessConfig(1, WorkloadSpec("random_uniform", 0, 4096, 200),
                                                         threads=2)])
    reports = []
    for manual in (False, True):
        plat = Platform(build_system(sc))
        h = dev_open(plat)
        page = dev_alloc_page(h)
        if manual:
            for a, v in plan_writes(cfg):
                dev_ioctl_write(h, a, v)
        else:
            dev_configure(h, cfg)
        plat.run()
        reports.append(report_to_dict(dev_snapshot(h, page)))
    assert reports[0] == reports[1]


@pytest.mark.parametrize("cfg, path", [
    (MonitorConfig(units=[UnitConfig(99, "HIST")]), "units[0].index"),
    (MonitorConfig(units=[UnitConfig(0, "LAT")]), "units[0].type"),
    (MonitorConfig(units=[UnitConfig(0, "HIST", params={"nbuckets": 5000})]), "units[0].params.nbuckets"),
    (MonitorConfig(units=[UnitConfig(1, "TRACE", params={"mode": "SOMETIMES"})]), "units[0].params.mode"),
    (MonitorConfig(units=[UnitConfig(0, "HIST", core_mask=0x100)]), "units[0].core_mask"),
    (MonitorConfig(trigger_start=TriggerSpec(7, 0)), "trigger_start.mode"),
    (MonitorConfig(units=[UnitConfig(0, "HIST"), UnitConfig(0, "HIST")]), "units[1].index"),
])
def test_invalid_config_is_rejected_before_any_write(cfg, path):
    h = bare_handle()
    before = dev_map(h).dump()
    with pytest.raises(ConfigError) as exc:
        dev_configure(h, cfg)
    assert exc.value.path == path
    assert "config" in str(exc.value)
    assert dev_map(h).dump() == before


def test_readback_round_trip():
    rng = np.random.default_rng(1)
    for seed in range(30):
        units = [random_unit(rng, i, t, [1, 2, 3]) for i, t in enumerate(DEFAULT_UNITS)]
        for u in units:
            if u.type == "STALL":
                u.params = {"irq_threshold": int(rng.integers(0, 1 << 40))}
        cfg = MonitorConfig(trigger_start=TriggerSpec(int(rng.integers(0, 5)), int(rng.integers(0, 1 << 63))),
                            trigger_stop=TriggerSpec(int(rng.integers(0, 5)), int(rng.integers(0, 1 << 63))),
                            units=units, dma_on_stop=bool(seed % 2), irq_enable=bool(seed % 3),
                            ncores=4)
        h = bare_handle(4)
        dev_configure(h, cfg)
        assert dev_readback(h).to_dict() == cfg.to_dict()


def test_reconfigure_between_phases_matches_oracle():
    sc = SystemConfig(ncores=2, quantum=100, processes=[
        ProcessConfig(1, WorkloadSpec("random_uniform", 0, 4096, 400), seed=1),
        ProcessConfig(2, WorkloadSpec("random_uniform", 4096, 4096, 400), seed=2)])
    log = run_bare(sc, 10 ** 6)
    plat = Platform(build_system(sc))
    h = dev_open(plat)
    page = dev_alloc_page(h)
    small = {"shift": 10, "nbuckets": 16}  # keeps the DMA short so phase 2 sees traffic
    phase1 = MonitorConfig(units=[UnitConfig(0, "HIST", pid_filter=1, attr_mode=True, params=small)],
                           ncores=2)
    dev_configure(h, phase1)
    mid = log[len(log) // 3].cycle
    plat.run(until=lambda: plat.cycle >= mid)
    first = dev_snapshot(h, page)
    switch = plat.cycle
    phase2 = MonitorConfig(units=[UnitConfig(0, "HIST", pid_filter=2, attr_mode=True, params=small)],
                           ncores=2)
    dev_configure(h, phase2)
    plat.run()
    second = dev_snapshot(h, page)
    assert plat.cycle > switch  # the cycle counter kept running
    assert plat.log == log
    assert report_to_dict(first) == report_to_dict(oracle_profile(log, phase1, 2, until=mid))
    tail = [ev for ev in log if ev.cycle >= switch]
    want = oracle_profile(tail, phase2, 2, start=switch, until=second.snapshot_cycle)
    assert report_to_dict(second) == report_to_dict(want)
    assert first.unit(0).attribution[0][0] == 1 and second.unit(0).attribution[0][0] == 2
