"""Device model of a non-intrusive hardware performance monitor.

The monitor snoops a deterministic simulated multicore host, accumulates
histograms, traces, latency and stall statistics per process, and DMAs
snapshots into host memory pages. A brute-force oracle recomputes every
result from the recorded event log.
"""

from .control import Control, TriggerMode, TriggerSpec, evaluate_trigger
from .dma import PageMemory, Report, UnitResult, decode_page, encode_page
from .driver import (MonitorConfig, UnitConfig, dev_alloc_page, dev_close, dev_configure,
                     dev_ioctl_read, dev_ioctl_write, dev_map, dev_open, dev_read_page,
                     dev_readback, dev_snapshot, dev_wait_irq, plan_writes)
from .errors import AbacusError, AddressFault, ConfigError, DecodeError, DeviceClosed, EncodeError
from .events import (CoreEvent, EventKind, decode_event_log, encode_event_log, read_log,
                     validate_event_stream, write_log)
from .monitor import DEFAULT_UNITS, Monitor
from .oracle import oracle_profile, trigger_window
from .platform import Platform, ReplaySource
from .pmu import make_unit, unit_observe, unit_reset, unit_serialize
from .regfile import map_layout
from .report import report_json, report_to_dict
from .runner import replay, run_bare, run_live
from .simsys import ProcessConfig, System, SystemConfig, WorkloadSpec, build_system

__version__ = "0.1.0"

__all__ = [
    "Control", "TriggerMode", "TriggerSpec", "evaluate_trigger",
    "PageMemory", "Report", "UnitResult", "decode_page", "encode_page",
    "MonitorConfig", "UnitConfig", "dev_alloc_page", "dev_close", "dev_configure",
    "dev_ioctl_read", "dev_ioctl_write", "dev_map", "dev_open", "dev_read_page",
    "dev_readback", "dev_snapshot", "dev_wait_irq", "plan_writes",
    "AbacusError", "AddressFault", "ConfigError", "DecodeError", "DeviceClosed", "EncodeError",
    "CoreEvent", "EventKind", "decode_event_log", "encode_event_log", "read_log",
    "validate_event_stream", "write_log",
    "DEFAULT_UNITS", "Monitor", "oracle_profile", "trigger_window", "Platform", "ReplaySource",
    "make_unit", "unit_observe", "unit_reset", "unit_serialize", "map_layout",
    "report_json", "report_to_dict", "replay", "run_bare", "run_live",
    "ProcessConfig", "System", "SystemConfig", "WorkloadSpec", "build_system",
]
