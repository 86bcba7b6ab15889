"""Report JSON (schema_version 1) and per-unit CSV export."""

import csv
import json
import os

SCHEMA_VERSION = 1
TRACE_MODES = {0: "WRAP", 1: "STOP_ON_FULL"}
TRACE_KINDS = {0: "read", 1: "write", 2: "instr"}


def unit_to_dict(u):
    d = {"index": u.index, "type": u.type, "overflow": u.overflow}
    f = dict(u.fields)
    if u.type == "TRACE":
        f["mode"] = TRACE_MODES.get(f["mode"], f["mode"])
        f["entries"] = [dict(e, kind=TRACE_KINDS.get(e["kind"], e["kind"])) for e in f["entries"]]
    d.update(f)
    d["attribution"] = (None if u.attribution is None
                        else [{"pid": p, "value": v} for p, v in u.attribution])
    return d


def report_to_dict(report):
    return {
        "schema_version": SCHEMA_VERSION,
        "snapshot_cycle": report.snapshot_cycle,
        "units": [unit_to_dict(u) for u in report.units],
    }


def dumps(obj):
    """Canonical JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, separators=(",", ": ")) + "\n"


def report_json(report):
    return dumps(report_to_dict(report))


def write_report(path, report):
    with open(path, "w", newline="\n") as f:
        f.write(report_json(report))


def write_csv(directory, report):
    """One CSV per unit, named ``unit<index>_<type>.csv``; returns the written paths."""
    os.makedirs(directory, exist_ok=True)
    paths = []
    for u in report.units:
        path = os.path.join(directory, f"unit{u.index}_{u.type.lower()}.csv")
        f = u.fields
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            if u.type == "HIST":
                w.writerow(["bucket_index", "range_lo", "range_hi", "count"])
                width = 1 << f["shift"]
                for i, c in enumerate(f["counts"]):
                    lo = f["base"] + i * width
                    w.writerow([i, lo, lo + width, c])
            elif u.type == "LAT":
                w.writerow(["bucket_index", "range_lo", "range_hi", "count"])
                width, nb = f["bucket_width"], f["nbuckets"]
                for i, c in enumerate(f["counts"]):
                    hi = "" if i == nb - 1 else (i + 1) * width
                    w.writerow([i, i * width, hi, c])
            elif u.type == "STALL":
                w.writerow(["core", "stall_cycles"])
                for i, c in enumerate(f["per_core"]):
                    w.writerow([i, c])
            else:
                w.writerow(["timestamp", "addr", "pid", "core", "kind", "latency"])
                for e in f["entries"]:
                    w.writerow([e["timestamp"], e["addr"], e["pid"], e["core"],
                                TRACE_KINDS.get(e["kind"], e["kind"]), e["latency"]])
        paths.append(path)
        if u.attribution is not None:
            apath = os.path.join(directory, f"unit{u.index}_{u.type.lower()}_attribution.csv")
            with open(apath, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(["pid", "value"])
                w.writerows(u.attribution)
            paths.append(apath)
    return paths
