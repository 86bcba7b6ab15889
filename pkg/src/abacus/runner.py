"""End-to-end helpers: live monitored runs and log replay, as used by the CLI."""

from dataclasses import dataclass, replace
from typing import Optional

from . import regfile as rf
from .driver import dev_alloc_page, dev_configure, dev_open, dev_read_page, dev_snapshot
from .platform import Platform, ReplaySource
from .simsys import build_system


@dataclass
class RunResult:
    report: object
    log: list
    page: bytes
    platform: Platform
    stop_page: Optional[bytes] = None


def _monitored(platform, monitor_cfg, max_cycles=None):
    h = dev_open(platform)
    end_page = dev_alloc_page(h)
    stop_page = None
    if monitor_cfg.dma_on_stop:
        stop_page = dev_alloc_page(h)
        h.monitor.reg_write(rf.DMA_DEST, stop_page)
    dev_configure(h, monitor_cfg)
    platform.run(max_cycles)
    platform.record = False
    report = dev_snapshot(h, end_page)
    return RunResult(report, platform.log, dev_read_page(h, end_page), platform,
                     dev_read_page(h, stop_page) if stop_page is not None else None)


def run_live(system_cfg, monitor_cfg, max_cycles):
    """Build the host, configure the monitor, run, and DMA a final snapshot."""
    system = build_system(system_cfg)
    if monitor_cfg.ncores is None:
        monitor_cfg = replace(monitor_cfg, ncores=system.cfg.ncores)
    return _monitored(Platform(system), monitor_cfg, max_cycles)


def run_bare(system_cfg, max_cycles):
    """Run the host with no monitor attached; returns the event log."""
    platform = Platform(build_system(system_cfg), attach=False)
    platform.run(max_cycles)
    return platform.log


def infer_ncores(events):
    return max((ev.core for ev in events), default=0) + 1


def replay(events, monitor_cfg, ncores=None):
    """Feed a recorded log through a fresh monitor exactly as a live run would."""
    ncores = ncores or monitor_cfg.ncores or infer_ncores(events)
    platform = Platform(ReplaySource(events), ncores=ncores, record=False)
    return _monitored(platform, monitor_cfg)
