"""Offline reference profiler.

Recomputes every unit's payload from a complete event log with whole-array
numpy operations: find the trigger window, clip the log to it, apply the
core-mask and PID filters, then accumulate. It deliberately shares no
accumulation or packing code with the streaming units in :mod:`abacus.pmu`.
"""

import numpy as np

from .dma import BYTES_PER_CYCLE, DEFAULT_PAGE_SIZE, Report, UnitResult, image_size
from .events import RECORD_DTYPE, decode_event_array

U64 = (1 << 64) - 1
OTHER = 0xFFFF
ATTR_SLOTS = 8

_KINDS = {"read": 1, "write": 2, "instr": 4}


def as_record_array(events):
    """Accept a list of CoreEvent, a record array, or raw "ABLG" bytes."""
    if isinstance(events, np.ndarray):
        return events
    if isinstance(events, (bytes, bytearray, memoryview)):
        return decode_event_array(events)
    arr = np.zeros(len(events), dtype=RECORD_DTYPE)
    if len(events):
        kind, core, access, pid, tid, cycle, addr, aux = zip(*events)
        arr["rec_type"] = kind
        arr["core"] = core
        arr["access"] = access
        arr["pid"] = pid
        arr["tid"] = tid
        arr["cycle"] = cycle
        arr["addr"] = addr
        arr["aux"] = aux
    return arr


def _first_cycle(arr, mask, from_cycle):
    hits = np.flatnonzero(mask & (arr["cycle"] >= from_cycle))
    return int(arr["cycle"][hits[0]]) if hits.size else None


def _fire_cycle(arr, mode, arg, from_cycle, until, stop):
    """First cycle >= from_cycle (and < until) at which the trigger fires."""
    if mode == 0:
        c = None if stop else from_cycle
    elif mode == 1:
        c = max(arg, from_cycle)
    elif mode == 2:
        c = _first_cycle(arr, (arr["rec_type"] == 1) & (arr["addr"] == np.uint64(arg)), from_cycle)
    elif mode == 3:
        c = _first_cycle(arr, (arr["rec_type"] == 0) & (arr["addr"] == np.uint64(arg)), from_cycle)
    elif mode == 4:
        incoming = (arr["aux"] & np.uint64(0xFFFF)) == np.uint64(arg & 0xFFFF)
        c = _first_cycle(arr, (arr["rec_type"] == 3) & incoming, from_cycle)
    else:
        c = None
    if c is not None and until is not None and c >= until:
        return None
    return c


def trigger_window(events, start_spec=None, stop_spec=None, start=0, until=None):
    """Return (start_cycle, stop_cycle) with None for "never"; monitoring enabled at ``start``."""
    arr = as_record_array(events)
    smode, sarg = (0, 0) if start_spec is None else (start_spec.mode, start_spec.arg)
    emode, earg = (0, 0) if stop_spec is None else (stop_spec.mode, stop_spec.arg)
    s = _fire_cycle(arr, smode, sarg, start, until, stop=False)
    if s is None:
        return None, None
    return s, _fire_cycle(arr, emode, earg, s, until, stop=True)


def _exact_sum(values):
    if values.size == 0:
        return 0
    if int(values.max()) * values.size < (1 << 63):
        return int(values.sum(dtype=np.uint64))
    return sum(int(v) for v in values.tolist())


def _clamp(v):
    return (U64, True) if v > U64 else (v, False)


def _attribution(pids, amounts):
    """First-seen PID slots (up to 8) plus OTHER; returns (entries, overflowed)."""
    if pids.size == 0:
        return [(OTHER, 0)], False
    uniq, first = np.unique(pids, return_index=True)
    order = uniq[np.argsort(first, kind="stable")]
    named = order[:ATTR_SLOTS]
    entries = []
    over = False
    for pid in named.tolist():
        v, o = _clamp(_exact_sum(amounts[pids == pid]))
        over |= o
        entries.append((pid, v))
    rest = ~np.isin(pids, named)
    v, o = _clamp(_exact_sum(amounts[rest]))
    entries.append((OTHER, v))
    return entries, over | o


def _u64s(values):
    return np.asarray(values, dtype="<u8").tobytes()


def _attr_bytes(entries):
    rec = np.zeros(len(entries), dtype=[("pid", "<u4"), ("pad", "<u4"), ("value", "<u8")])
    if entries:
        rec["pid"] = [p for p, _ in entries]
        rec["value"] = [v for _, v in entries]
    return np.array([len(entries), 0], dtype="<u4").tobytes() + rec.tobytes()


def _hist(sel, params, attr):
    base, shift, nb = params["base"], params["shift"], params["nbuckets"]
    mem = sel[sel["rec_type"] == 1]
    addr = mem["addr"]
    limit = base + (nb << shift)
    inr = addr >= np.uint64(base)
    if limit <= U64:
        inr &= addr < np.uint64(limit)
    buckets = ((addr[inr] - np.uint64(base)) >> np.uint64(shift)).astype(np.int64)
    counts = np.bincount(buckets, minlength=nb).tolist()
    oor = int((~inr).sum())
    fields = dict(base=base, shift=shift, nbuckets=nb, out_of_range=oor, counts=counts)
    payload = (np.array([base], "<u8").tobytes() + np.array([shift, nb], "<u4").tobytes()
               + _u64s([oor] + counts))
    entries = over = None
    if attr:
        entries, over = _attribution(mem["pid"][inr], np.ones(int(inr.sum()), dtype=np.uint64))
        payload += _attr_bytes(entries)
    return fields, payload, entries, bool(over)


def _lat(sel, params, attr):
    width, nb = params["bucket_width"], params["nbuckets"]
    mem = sel[sel["rec_type"] == 1]
    b = np.minimum(mem["aux"] // np.uint64(width), np.uint64(nb - 1)).astype(np.int64)
    counts = np.bincount(b, minlength=nb).tolist()
    fields = dict(bucket_width=width, nbuckets=nb, counts=counts)
    payload = np.array([width, nb], "<u4").tobytes() + _u64s(counts)
    entries = over = None
    if attr:
        entries, over = _attribution(mem["pid"], np.ones(len(mem), dtype=np.uint64))
        payload += _attr_bytes(entries)
    return fields, payload, entries, bool(over)


def _stall(sel, params, attr, ncores):
    st = sel[sel["rec_type"] == 2]
    over = False
    per_core = []
    for k in range(ncores):
        v, o = _clamp(_exact_sum(st["aux"][st["core"] == k]))
        per_core.append(v)
        over |= o
    total, o = _clamp(_exact_sum(st["aux"]))
    over |= o
    fields = dict(ncores=ncores, total=total, per_core=per_core)
    payload = np.array([ncores, 0], "<u4").tobytes() + _u64s([total] + per_core)
    entries = None
    if attr:
        entries, o = _attribution(st["pid"], st["aux"])
        over |= o
        payload += _attr_bytes(entries)
    return fields, payload, entries, over


def _trace_selection(sel, params):
    kinds = sum(_KINDS[k] for k in set(params["kinds"]))
    rt, acc = sel["rec_type"], sel["access"]
    want = np.zeros(len(sel), dtype=bool)
    if kinds & 1:
        want |= (rt == 1) & (acc == 0)
    if kinds & 2:
        want |= (rt == 1) & (acc == 1)
    if kinds & 4:
        want |= rt == 0
    return sel[want]


def _trace(sel, params, timestamping):
    cap = params["capacity"]
    mode = 1 if params["mode"] in ("STOP_ON_FULL", 1) else 0
    cand = _trace_selection(sel, params)
    n = len(cand)
    kept = cand[:cap] if mode == 1 else cand[max(0, n - cap):]
    dropped = max(0, n - cap)
    ent = np.zeros(len(kept), dtype=[("ts", "<u8"), ("addr", "<u8"), ("pid", "<u2"), ("core", "u1"),
                                      ("kind", "u1"), ("lat", "<u2"), ("pad", "<u2")])
    ent["ts"] = kept["cycle"] if timestamping else 0
    ent["addr"] = kept["addr"]
    ent["pid"] = kept["pid"]
    ent["core"] = kept["core"]
    ent["kind"] = np.where(kept["rec_type"] == 0, 2, kept["access"])
    ent["lat"] = np.where(kept["rec_type"] == 0, 0, np.minimum(kept["aux"], np.uint64(0xFFFF)))
    entries = [dict(timestamp=t, addr=a, pid=p, core=c, kind=k, latency=l)
               for t, a, p, c, k, l, _ in ent.tolist()]
    fields = dict(capacity=cap, mode=mode, count=len(kept), dropped=dropped, entries=entries)
    payload = np.array([cap, mode, len(kept), 0], "<u4").tobytes() + _u64s([dropped]) + ent.tobytes()
    return fields, payload, None, dropped > 0


def _unit_selection(arr, u):
    sel = arr
    mask = u.core_mask
    if mask != 0xFF:
        allowed = np.array([(mask >> k) & 1 for k in range(256)], dtype=bool)
        sel = sel[allowed[sel["core"]]]
    if u.pid_filter is not None:
        sel = sel[sel["pid"] == u.pid_filter]
    return sel


def clip(events, start_cycle, stop_cycle=None, until=None):
    arr = as_record_array(events)
    if start_cycle is None:
        return arr[:0]
    keep = arr["cycle"] >= start_cycle
    if stop_cycle is not None:
        keep &= arr["cycle"] <= stop_cycle
    if until is not None:
        keep &= arr["cycle"] < until
    return arr[keep]


def oracle_profile(events, cfg, ncores=None, start=0, until=None, timestamping=True):
    """Brute-force report for ``cfg`` over ``events``.

    ``start`` is the cycle at which monitoring was enabled (trigger evaluation
    begins there) and ``until`` is the exclusive snapshot cycle. By default
    the snapshot is taken right after the last event, or, with dma_on_stop,
    once the stop-time transfer has finished if that is later.
    """
    cfg.validate()
    arr = as_record_array(events)
    if ncores is None:
        ncores = cfg.ncores or (int(arr["core"].max()) + 1 if len(arr) else 1)
    at_end = until is None
    if at_end:
        until = int(arr["cycle"][-1]) + 1 if len(arr) else 0
    s, e = trigger_window(arr, cfg.trigger_start, cfg.trigger_stop, start, until)
    window = clip(arr, s, e, until)
    report = Report(until)
    for u in sorted(cfg.units, key=lambda u: u.index):
        if not u.enable:
            continue
        params = u.full_params()
        sel = _unit_selection(window, u)
        if u.type == "HIST":
            fields, payload, attr, over = _hist(sel, params, u.attr_mode)
        elif u.type == "LAT":
            fields, payload, attr, over = _lat(sel, params, u.attr_mode)
        elif u.type == "STALL":
            fields, payload, attr, over = _stall(sel, params, u.attr_mode, ncores)
        else:
            fields, payload, attr, over = _trace(sel, params, timestamping)
        report.units.append(UnitResult(index=u.index, type=u.type, overflow=over,
                                       fields=fields, attribution=attr, payload=payload))
    if at_end and cfg.dma_on_stop and e is not None:
        # units are frozen after the stop cycle, so this is the image the engine copied
        size = image_size(report.units)
        if size <= DEFAULT_PAGE_SIZE:
            report.snapshot_cycle = max(until, e + 1 + -(-size // BYTES_PER_CYCLE))
    return report


def trace_fill_cycle(events, cfg, unit_index, start=0):
    """Cycle at which a STOP_ON_FULL trace unit records its last free slot (None if never)."""
    arr = as_record_array(events)
    u = next(u for u in cfg.units if u.index == unit_index)
    s, e = trigger_window(arr, cfg.trigger_start, cfg.trigger_stop, start)
    cand = _trace_selection(_unit_selection(clip(arr, s, e), u), u.full_params())
    cap = u.full_params()["capacity"]
    return int(cand["cycle"][cap - 1]) if len(cand) >= cap else None
