"""DMA snapshot engine and the "ABAC" snapshot-page codec.

Page layout (little-endian)::

    header : u32 magic "ABAC" | u32 version=1 | u64 snapshot_cycle | u32 nrecords | u32 reserved
    record : u32 unit_type | u32 unit_index | u32 payload_len | u32 flags | payload
             flags bit0 = OVERFLOW, bit1 = ATTR_PRESENT

Records appear for enabled units only, in ascending unit index.
"""

import struct
from dataclasses import dataclass, field
from typing import List, Optional

from .errors import AbacusError, DecodeError
from .pmu import UnitType

PAGE_MAGIC = 0x41424143  # "ABAC"
PAGE_VERSION = 1
DEFAULT_PAGE_SIZE = 65536
DEFAULT_PAGE_LIMIT = 16
BYTES_PER_CYCLE = 4

FLAG_OVERFLOW = 1
FLAG_ATTR = 2

_header = struct.Struct("<IIQII")
_tlv = struct.Struct("<IIII")


class PageMemory:
    """The OS-side pool of kernel pages that the monitor may DMA into."""

    def __init__(self, limit=DEFAULT_PAGE_LIMIT):
        self.limit = limit
        self.pages = []

    def alloc(self, page_size=DEFAULT_PAGE_SIZE):
        if len(self.pages) >= self.limit:
            raise AbacusError(f"page allocation limit ({self.limit}) exceeded")
        if page_size < _header.size:
            raise AbacusError(f"page size {page_size} is smaller than the page header")
        self.pages.append(bytearray(page_size))
        return len(self.pages) - 1

    def __contains__(self, index):
        return 0 <= index < len(self.pages)

    def __getitem__(self, index):
        return self.pages[index]


def build_image(units, snapshot_cycle):
    """Serialize the enabled units into a page image (header + TLV records)."""
    records = []
    for unit in sorted(units, key=lambda u: u.index):
        if not unit.enable:
            continue
        payload = unit.payload()
        flags = (FLAG_OVERFLOW if unit.overflow else 0) | (FLAG_ATTR if unit.attr_present else 0)
        records.append(_tlv.pack(int(unit.type), unit.index, len(payload), flags) + payload)
    return _header.pack(PAGE_MAGIC, PAGE_VERSION, snapshot_cycle, len(records), 0) + b"".join(records)


def image_size(results):
    """Page image length for decoded unit results (header plus one TLV record each)."""
    return _header.size + sum(_tlv.size + len(r.payload) for r in results)


def empty_image(snapshot_cycle):
    return _header.pack(PAGE_MAGIC, PAGE_VERSION, snapshot_cycle, 0, 0)


class DmaEngine:
    """Copies a frozen unit image into a page, BYTES_PER_CYCLE bytes per cycle."""

    def __init__(self):
        self.busy = False
        self.done = False
        self.overflow = False
        self.bad_dest = False
        self.auto_on_stop = False
        self.contention = False
        self.dest = 0
        self.remaining = 0
        self.snapshot_cycle = None
        self._image = None
        self._page = None

    def reset(self):
        self.busy = self.done = self.overflow = self.bad_dest = False
        self.remaining = 0
        self._image = self._page = None

    @property
    def status_word(self):
        return (int(self.busy) | int(self.done) << 1 | int(self.overflow) << 2
                | int(self.bad_dest) << 3)

    @property
    def ctrl_word(self):
        return int(self.auto_on_stop) << 1 | int(self.contention) << 2

    def start(self, units, cycle, memory):
        """Freeze the snapshot now. Returns True if the transfer finished immediately."""
        if self.busy:
            return False
        self.done = self.overflow = self.bad_dest = False
        self.snapshot_cycle = cycle
        if memory is None or self.dest not in memory:
            self.bad_dest = True
            self.done = True
            return True
        page = memory[self.dest]
        image = build_image(units, cycle)
        if len(image) > len(page):
            self.overflow = True
            page[:] = bytes(len(page))
            page[:_header.size] = empty_image(cycle)
            self.done = True
            return True
        self._image = image
        self._page = page
        self.remaining = -(-len(image) // BYTES_PER_CYCLE)
        self.busy = True
        return False

    def tick(self):
        """Advance one cycle of transfer. Returns True on the completing cycle."""
        if not self.busy:
            return False
        self.remaining -= 1
        if self.remaining > 0:
            return False
        page, image = self._page, self._image
        page[:] = bytes(len(page))
        page[:len(image)] = image
        self._image = self._page = None
        self.busy = False
        self.done = True
        return True


# -- decoding ---------------------------------------------------------------

@dataclass
class UnitResult:
    index: int
    type: str
    overflow: bool
    fields: dict
    attribution: Optional[list] = None  # [(pid, value), ...] with OTHER (0xFFFF) last
    payload: bytes = b""


@dataclass
class Report:
    snapshot_cycle: int
    units: List[UnitResult] = field(default_factory=list)

    def unit(self, index):
        for u in self.units:
            if u.index == index:
                return u
        raise KeyError(index)


class _Reader:
    def __init__(self, data, pos, end):
        self.data, self.pos, self.end = data, pos, end

    def take(self, fmt):
        size = struct.calcsize(fmt)
        if self.pos + size > self.end:
            raise DecodeError("truncated payload", self.pos)
        vals = struct.unpack_from(fmt, self.data, self.pos)
        self.pos += size
        return vals


def _decode_attr(r):
    npids, _ = r.take("<II")
    out = []
    for _ in range(npids):
        pid, _, value = r.take("<IIQ")
        out.append((pid, value))
    return out


def decode_payload(unit_type, data, start=0, end=None, attr_present=False):
    """Decode one unit payload into (fields, attribution)."""
    end = len(data) if end is None else end
    r = _Reader(data, start, end)
    t = UnitType(unit_type)
    if t == UnitType.HIST:
        base, shift, nb, oor = r.take("<QIIQ")
        counts = list(r.take(f"<{nb}Q"))
        fields = dict(base=base, shift=shift, nbuckets=nb, out_of_range=oor, counts=counts)
    elif t == UnitType.TRACE:
        cap, mode, count, _, dropped = r.take("<IIIIQ")
        entries = []
        for _ in range(count):
            ts, addr, pid, core, kind, lat, _ = r.take("<QQHBBHH")
            entries.append(dict(timestamp=ts, addr=addr, pid=pid, core=core, kind=kind, latency=lat))
        fields = dict(capacity=cap, mode=mode, count=count, dropped=dropped, entries=entries)
    elif t == UnitType.LAT:
        width, nb = r.take("<II")
        fields = dict(bucket_width=width, nbuckets=nb, counts=list(r.take(f"<{nb}Q")))
    elif t == UnitType.STALL:
        ncores, _, total = r.take("<IIQ")
        fields = dict(ncores=ncores, total=total, per_core=list(r.take(f"<{ncores}Q")))
    else:
        raise DecodeError(f"unknown unit type {unit_type}", start)
    attribution = _decode_attr(r) if attr_present else None
    if r.pos != end:
        raise DecodeError("payload length mismatch", r.pos)
    return fields, attribution


def decode_page(data):
    """Decode a snapshot page into a :class:`Report`."""
    data = bytes(data)
    if len(data) < 4:
        raise DecodeError("truncated header", 0)
    magic, = struct.unpack_from("<I", data, 0)
    if magic != PAGE_MAGIC:
        raise DecodeError("bad magic", 0)
    if len(data) < _header.size:
        raise DecodeError("truncated header", 4)
    _, version, cycle, nrecords, _ = _header.unpack_from(data, 0)
    if version != PAGE_VERSION:
        raise DecodeError("bad version", 4)
    report = Report(cycle)
    pos = _header.size
    for _ in range(nrecords):
        if pos + _tlv.size > len(data):
            raise DecodeError("truncated record header", pos)
        utype, index, plen, flags = _tlv.unpack_from(data, pos)
        pos += _tlv.size
        if pos + plen > len(data):
            raise DecodeError("truncated payload", pos)
        if utype not in (1, 2, 3, 4):
            raise DecodeError(f"unknown unit type {utype}", pos - _tlv.size)
        fields, attribution = decode_payload(utype, data, pos, pos + plen, bool(flags & FLAG_ATTR))
        report.units.append(UnitResult(
            index=index, type=UnitType(utype).name, overflow=bool(flags & FLAG_OVERFLOW),
            fields=fields, attribution=attribution, payload=data[pos:pos + plen]))
        pos += plen
    return report


def encode_payload(unit_type, fields, attribution=None):
    """Inverse of :func:`decode_payload`: pack decoded fields back into payload bytes."""
    t = UnitType[unit_type] if isinstance(unit_type, str) else UnitType(unit_type)
    f = fields
    if t == UnitType.HIST:
        out = struct.pack("<QIIQ", f["base"], f["shift"], f["nbuckets"], f["out_of_range"])
        out += struct.pack(f"<{len(f['counts'])}Q", *f["counts"])
    elif t == UnitType.TRACE:
        out = struct.pack("<IIIIQ", f["capacity"], f["mode"], len(f["entries"]), 0, f["dropped"])
        out += b"".join(struct.pack("<QQHBBHH", e["timestamp"], e["addr"], e["pid"], e["core"],
                                    e["kind"], e["latency"], 0) for e in f["entries"])
    elif t == UnitType.LAT:
        out = struct.pack("<II", f["bucket_width"], f["nbuckets"])
        out += struct.pack(f"<{len(f['counts'])}Q", *f["counts"])
    elif t == UnitType.STALL:
        out = struct.pack("<IIQ", len(f["per_core"]), 0, f["total"])
        out += struct.pack(f"<{len(f['per_core'])}Q", *f["per_core"])
    else:
        raise ValueError(f"unknown unit type {unit_type}")
    if attribution is not None:
        out += struct.pack("<II", len(attribution), 0)
        out += b"".join(struct.pack("<IIQ", pid, 0, v) for pid, v in attribution)
    return out


def encode_page(report):
    """Pack a :class:`Report` into page bytes (no padding to the page size)."""
    records = []
    for u in report.units:
        payload = encode_payload(u.type, u.fields, u.attribution)
        flags = (FLAG_OVERFLOW if u.overflow else 0) | (FLAG_ATTR if u.attribution is not None else 0)
        records.append(_tlv.pack(int(UnitType[u.type]), u.index, len(payload), flags) + payload)
    return _header.pack(PAGE_MAGIC, PAGE_VERSION, report.snapshot_cycle, len(records), 0) + b"".join(records)
