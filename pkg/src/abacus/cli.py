"""Command-line harness: ``run``, ``replay``, ``decode`` and ``oracle``.

Exit codes: 0 success, 1 configuration error, 2 I/O error, 3 malformed
log or page.
"""

import argparse
import json
import sys
from dataclasses import replace

from .dma import decode_page
from .driver import MonitorConfig
from .errors import ConfigError, DecodeError
from .events import decode_event_log, encode_event_log
from .monitor import DEFAULT_UNITS
from .oracle import oracle_profile
from .report import write_csv, write_report
from .runner import infer_ncores, replay, run_live
from .simsys import SystemConfig

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_BAD_INPUT = 0, 1, 2, 3


class _IOFailure(Exception):
    pass


def _read_bytes(path):
    try:
        with open(path, "rb") as f:
            return f.read()
    except OSError as e:
        raise _IOFailure(f"cannot read {path}: {e.strerror}") from None


def _write_bytes(path, data):
    try:
        with open(path, "wb") as f:
            f.write(data)
    except OSError as e:
        raise _IOFailure(f"cannot write {path}: {e.strerror}") from None


def _load_json(path, what):
    text = _read_bytes(path)
    try:
        return json.loads(text)
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ConfigError(what, f"malformed JSON in {path}: {e}") from None


def _load_monitor(path):
    return MonitorConfig.from_dict(_load_json(path, "monitor"))


def _write_outputs(report, out, csv_dir=None):
    try:
        write_report(out, report)
        if csv_dir:
            write_csv(csv_dir, report)
    except OSError as e:
        raise _IOFailure(f"cannot write report: {e.strerror}") from None


def cmd_run(args):
    manifest = _load_json(args.config, "config")
    if not isinstance(manifest, dict):
        raise ConfigError("config", "manifest must be a JSON object")
    extra = set(manifest) - {"system", "monitor", "outputs", "max_cycles"}
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown field")
    system = SystemConfig.from_dict(manifest.get("system"), "system")
    monitor = MonitorConfig.from_dict(manifest.get("monitor", {}), "monitor")
    monitor.validate(DEFAULT_UNITS)
    outputs = manifest.get("outputs") or {}
    if not isinstance(outputs, dict):
        raise ConfigError("outputs", "expected an object")
    max_cycles = manifest.get("max_cycles", 1 << 40)
    if not isinstance(max_cycles, int) or isinstance(max_cycles, bool) or max_cycles < 1:
        raise ConfigError("max_cycles", "must be an integer >= 1")
    out = args.out or outputs.get("report")
    if not out:
        raise ConfigError("outputs.report", "no report path given (use --out)")
    if monitor.ncores is None:
        monitor = replace(monitor, ncores=system.ncores)
    elif monitor.ncores != system.ncores:
        raise ConfigError("monitor.ncores", "must match system.ncores")
    result = run_live(system, monitor, max_cycles)
    log_path = args.emit_log or outputs.get("log")
    if log_path:
        _write_bytes(log_path, encode_event_log(result.log))
    page_path = args.dump_page or outputs.get("page")
    if page_path:
        _write_bytes(page_path, result.page)
    _write_outputs(result.report, out, args.csv)
    return EXIT_OK


def _load_log(path):
    return decode_event_log(_read_bytes(path))


def cmd_replay(args):
    monitor = _load_monitor(args.monitor)
    events = _load_log(args.log)
    result = replay(events, monitor)
    _write_outputs(result.report, args.out, args.csv)
    return EXIT_OK


def cmd_decode(args):
    report = decode_page(_read_bytes(args.page))
    _write_outputs(report, args.out, args.csv)
    return EXIT_OK


def cmd_oracle(args):
    monitor = _load_monitor(args.monitor)
    monitor.validate(DEFAULT_UNITS)
    events = _load_log(args.log)
    report = oracle_profile(events, monitor, ncores=monitor.ncores or infer_ncores(events))
    _write_outputs(report, args.out, args.csv)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="abacus", description="Monitor a simulated multicore host.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a manifest under monitoring")
    r.add_argument("--config", required=True, help="run manifest (JSON)")
    r.add_argument("--out", help="report JSON path")
    r.add_argument("--emit-log", help="write the host's ABLG event log here")
    r.add_argument("--dump-page", help="write the final snapshot page here")
    r.add_argument("--csv", help="directory for per-unit CSV files")
    r.set_defaults(func=cmd_run)

    for name, func, helptext in (("replay", cmd_replay, "feed a recorded log through the monitor"),
                                 ("oracle", cmd_oracle, "compute the reference report offline")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--log", required=True)
        s.add_argument("--monitor", required=True, help="monitor config (JSON)")
        s.add_argument("--out", required=True)
        s.add_argument("--csv")
        s.set_defaults(func=func)

    d = sub.add_parser("decode", help="decode a snapshot page")
    d.add_argument("--page", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--csv")
    d.set_defaults(func=cmd_decode)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"abacus: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except _IOFailure as e:
        print(f"abacus: I/O error: {e}", file=sys.stderr)
        return EXIT_IO
    except DecodeError as e:
        print(f"abacus: bad input: {e}", file=sys.stderr)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
