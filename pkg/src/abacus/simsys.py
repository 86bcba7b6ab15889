"""Deterministic cycle-stepped multicore host that emits the snooped event stream.

Model summary:

* Each core has a private direct-mapped, write-allocate cache (hit = 1 cycle).
* Misses go over one shared bus with round-robin arbitration. A miss issued
  (looked up) at cycle ``i`` requests the bus from ``i + 1``; once granted at
  ``g`` it holds the bus for ``transfer_cycles`` and completes at
  ``g + transfer_cycles + memory_latency - 1``. Its latency is
  ``completion - i + 1``, so an uncontended miss costs
  ``memory_latency + transfer_cycles + 1``.
* Each workload op is ``compute_gap`` idle cycles followed by one memory
  access. On completion the core emits ``Stall(latency - 1)`` (misses only),
  ``MemAccess`` and ``InstrRetired`` for that op.
* Threads share a global FIFO run queue (optionally pinned to one core) and
  are preempted at quantum expiry when another thread is waiting, but never
  in the middle of a memory access. A switch emits ``ContextSwitch`` and,
  if the switch cost is non-zero, a ``Stall`` of that length charged to the
  incoming thread; the thread starts running once the cost has elapsed.
"""

import hashlib
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from .errors import ConfigError
from .events import CoreEvent, INSTR, MEM, NA, STALL, SWITCH

DATA_LIMIT = 1 << 32
CODE_BASE = 1 << 32
WORD_BYTES = 4
PATTERNS = ("seq_scan", "strided", "random_uniform", "hot_cold")


def _pow2(v):
    return isinstance(v, int) and v > 0 and v & (v - 1) == 0


@dataclass
class WorkloadSpec:
    pattern: str = "seq_scan"
    region_base: int = 0
    region_size: int = 4096
    ops: int = 0
    write_ratio: float = 0.0
    compute_gap: int = 0
    stride: int = 64
    hot_fraction: float = 0.1
    hot_bias: float = 0.9

    def to_dict(self):
        d = dict(pattern=self.pattern, region={"base": self.region_base, "size_bytes": self.region_size},
                 ops=self.ops, write_ratio=self.write_ratio, compute_gap=self.compute_gap)
        if self.pattern == "strided":
            d["stride"] = self.stride
        if self.pattern == "hot_cold":
            d.update(hot_fraction=self.hot_fraction, hot_bias=self.hot_bias)
        return d


@dataclass
class ProcessConfig:
    pid: int
    program: WorkloadSpec = field(default_factory=WorkloadSpec)
    threads: int = 1
    seed: int = 0
    pin: Optional[int] = None


@dataclass
class SystemConfig:
    ncores: int = 1
    cache_size: int = 4096
    line_bytes: int = 64
    transfer_cycles: int = 4
    memory_latency: int = 20
    quantum: int = 1000
    switch_cost: int = 0
    processes: List[ProcessConfig] = field(default_factory=list)

    def validate(self):
        def bad(path, msg):
            raise ConfigError(path, msg)

        if not isinstance(self.ncores, int) or not 1 <= self.ncores <= 8:
            bad("ncores", "must be an integer in 1..8")
        if not _pow2(self.cache_size):
            bad("cache.size_bytes", "must be a power of two")
        if not _pow2(self.line_bytes) or self.line_bytes > self.cache_size:
            bad("cache.line_bytes", "must be a power of two no larger than the cache")
        if not isinstance(self.transfer_cycles, int) or self.transfer_cycles < 1:
            bad("bus.transfer_cycles", "must be >= 1")
        if not isinstance(self.memory_latency, int) or self.memory_latency < 0:
            bad("memory.latency_cycles", "must be >= 0")
        if not isinstance(self.quantum, int) or self.quantum < 1:
            bad("scheduler.quantum_cycles", "must be >= 1")
        if not isinstance(self.switch_cost, int) or self.switch_cost < 0:
            bad("scheduler.context_switch_cost_cycles", "must be >= 0")
        seen = set()
        for i, p in enumerate(self.processes):
            path = f"processes[{i}]"
            if not isinstance(p.pid, int) or not 1 <= p.pid <= 0xFFFE:
                bad(f"{path}.pid", "must be in 1..0xFFFE")
            if p.pid in seen:
                bad(f"{path}.pid", f"duplicate pid {p.pid}")
            seen.add(p.pid)
            if not isinstance(p.threads, int) or not 1 <= p.threads <= 0xFFFF:
                bad(f"{path}.threads", "must be in 1..65535")
            if not isinstance(p.seed, int) or p.seed < 0:
                bad(f"{path}.seed", "must be a non-negative integer")
            if p.pin is not None and (not isinstance(p.pin, int) or not 0 <= p.pin < self.ncores):
                bad(f"{path}.pin", "must name an existing core")
            w = p.program
            wp = f"{path}.program"
            if w.pattern not in PATTERNS:
                bad(f"{wp}.pattern", f"unknown pattern {w.pattern!r}")
            if not _pow2(w.region_size) or w.region_size < WORD_BYTES:
                bad(f"{wp}.region.size_bytes", "must be a power of two >= 4")
            if not isinstance(w.region_base, int) or w.region_base < 0 or w.region_base % WORD_BYTES:
                bad(f"{wp}.region.base", "must be a non-negative word-aligned address")
            if w.region_base + w.region_size > DATA_LIMIT:
                bad(f"{wp}.region", "must lie inside simulated physical memory (4 GiB)")
            if not isinstance(w.ops, int) or w.ops < 0:
                bad(f"{wp}.ops", "must be >= 0")
            if not 0.0 <= w.write_ratio <= 1.0:
                bad(f"{wp}.write_ratio", "must be in [0, 1]")
            if not isinstance(w.compute_gap, int) or w.compute_gap < 0:
                bad(f"{wp}.compute_gap", "must be >= 0")
            if w.pattern == "strided" and (not isinstance(w.stride, int) or w.stride < 1):
                bad(f"{wp}.stride", "must be >= 1")
            if w.pattern == "hot_cold":
                if not 0.0 < w.hot_fraction <= 1.0:
                    bad(f"{wp}.hot_fraction", "must be in (0, 1]")
                if not 0.0 <= w.hot_bias <= 1.0:
                    bad(f"{wp}.hot_bias", "must be in [0, 1]")
        return self

    # -- JSON ------------------------------------------------------------
    def to_dict(self):
        return {
            "ncores": self.ncores,
            "cache": {"size_bytes": self.cache_size, "line_bytes": self.line_bytes, "hit_latency": 1},
            "bus": {"arbitration": "round-robin", "transfer_cycles": self.transfer_cycles},
            "memory": {"latency_cycles": self.memory_latency},
            "scheduler": {"quantum_cycles": self.quantum,
                          "context_switch_cost_cycles": self.switch_cost},
            "processes": [
                {"pid": p.pid, "threads": p.threads, "seed": p.seed, "pin": p.pin,
                 "program": p.program.to_dict()}
                for p in self.processes
            ],
        }

    @classmethod
    def from_dict(cls, d, path="system"):
        r = _Fields(d, path)
        cache = r.sub("cache")
        bus = r.sub("bus")
        mem = r.sub("memory")
        sched = r.sub("scheduler")
        if cache.get("hit_latency", 1) != 1:
            raise ConfigError(f"{path}.cache.hit_latency", "only hit_latency=1 is modelled")
        if bus.get("arbitration", "round-robin") != "round-robin":
            raise ConfigError(f"{path}.bus.arbitration", "only round-robin is modelled")
        procs = []
        for i, pd in enumerate(r.get("processes", [])):
            pr = _Fields(pd, f"{path}.processes[{i}]")
            prog = pr.sub("program")
            region = prog.sub("region")
            spec = WorkloadSpec(
                pattern=prog.get("pattern", "seq_scan"),
                region_base=region.get("base", 0),
                region_size=region.get("size_bytes", 4096),
                ops=prog.get("ops", 0),
                write_ratio=prog.get("write_ratio", 0.0),
                compute_gap=prog.get("compute_gap", 0),
                stride=prog.get("stride", 64),
                hot_fraction=prog.get("hot_fraction", 0.1),
                hot_bias=prog.get("hot_bias", 0.9),
            )
            prog.done()
            region.done()
            procs.append(ProcessConfig(pid=pr.get("pid", None), program=spec,
                                       threads=pr.get("threads", 1), seed=pr.get("seed", 0),
                                       pin=pr.get("pin", None)))
            pr.done()
        cfg = cls(
            ncores=r.get("ncores", 1),
            cache_size=cache.get("size_bytes", 4096),
            line_bytes=cache.get("line_bytes", 64),
            transfer_cycles=bus.get("transfer_cycles", 4),
            memory_latency=mem.get("latency_cycles", 20),
            quantum=sched.get("quantum_cycles", 1000),
            switch_cost=sched.get("context_switch_cost_cycles", 0),
            processes=procs,
        )
        for sub in (cache, bus, mem, sched, r):
            sub.done()
        try:
            return cfg.validate()
        except ConfigError as e:
            raise ConfigError(f"{path}.{e.path}", e.message) from None


class _Fields:
    """Dict reader that tracks consumed keys so unknown keys can be reported."""

    def __init__(self, d, path):
        if d is None:
            d = {}
        if not isinstance(d, dict):
            raise ConfigError(path, "expected an object")
        self.d, self.path, self.seen = d, path, set()

    def get(self, key, default):
        self.seen.add(key)
        return self.d.get(key, default)

    def sub(self, key):
        self.seen.add(key)
        return _Fields(self.d.get(key), f"{self.path}.{key}")

    def done(self):
        extra = sorted(set(self.d) - self.seen)
        if extra:
            raise ConfigError(f"{self.path}.{extra[0]}", "unknown field")


# -- components ------------------------------------------------------------

class CacheResult(NamedTuple):
    hit: bool
    evicted_line: Optional[int] = None


class DirectMappedCache:
    """Direct-mapped, write-allocate cache; writebacks cost nothing."""

    def __init__(self, size_bytes, line_bytes):
        self.line_bytes = line_bytes
        self.nlines = size_bytes // line_bytes
        self.line_shift = line_bytes.bit_length() - 1
        self.tags = [-1] * self.nlines

    def access(self, addr, write=False):
        line = addr >> self.line_shift
        idx = line % self.nlines
        old = self.tags[idx]
        if old == line:
            return CacheResult(True)
        self.tags[idx] = line
        return CacheResult(False, None if old < 0 else old << self.line_shift)


def cache_access(cache, addr, kind="read"):
    return cache.access(addr, kind in ("write", 1))


class Bus:
    """Shared bus with round-robin arbitration among pending requesters."""

    def __init__(self, ncores, transfer_cycles):
        self.ncores = ncores
        self.transfer_cycles = transfer_cycles
        self.free_at = 0
        self.last = ncores - 1  # first search starts at core 0
        self.requests = {}      # core -> first cycle the request may be granted

    def request(self, core, cycle):
        self.requests[core] = cycle

    def block(self, cycle):
        """Occupy an otherwise idle bus for ``cycle`` (external DMA traffic)."""
        if self.free_at <= cycle:
            self.free_at = cycle + 1

    def grant(self, cycle):
        """Grant at most one request at ``cycle``; returns the core or None."""
        if cycle < self.free_at or not self.requests:
            return None
        reqs = self.requests
        n = self.ncores
        for k in range(1, n + 1):
            core = (self.last + k) % n
            r = reqs.get(core)
            if r is not None and r <= cycle:
                del reqs[core]
                self.last = core
                self.free_at = cycle + self.transfer_cycles
                return core
        return None


def arbitrate(bus, requests):
    """Drain ``requests`` ({core: request_cycle}) through a copy of ``bus``.

    Returns ``[(core, grant_cycle, queuing_delay), ...]`` in grant order,
    assuming no further requests arrive.
    """
    b = Bus(bus.ncores, bus.transfer_cycles)
    b.free_at, b.last = bus.free_at, bus.last
    for core, c in requests.items():
        b.request(core, c)
    out = []
    cycle = min(requests.values()) if requests else 0
    while b.requests:
        core = b.grant(cycle)
        if core is not None:
            out.append((core, cycle, cycle - requests[core]))
            cycle = b.free_at
        else:
            cycle = max(cycle + 1, min(b.free_at, min(b.requests.values())))
    return out


class Thread:
    __slots__ = ("pid", "tid", "addrs", "writes", "pc_base", "stride_j", "first_j",
                 "k", "gap_left", "gap", "issue", "done_at", "waiting")

    def __init__(self, pid, tid, addrs, writes, first_j, stride_j, gap):
        self.pid, self.tid = pid, tid
        self.addrs, self.writes = addrs, writes
        self.pc_base = CODE_BASE + (pid << 20)
        self.first_j, self.stride_j = first_j, stride_j
        self.k = 0
        self.gap = gap
        self.gap_left = gap
        self.issue = -1      # issue cycle of the outstanding access, -1 if none
        self.done_at = -1    # completion cycle once granted, -1 while queued for the bus
        self.waiting = False

    @property
    def finished(self):
        return self.k >= len(self.addrs)

    def pc(self, k):
        return self.pc_base + WORD_BYTES * ((self.first_j + k * self.stride_j) & 0x3FFFF)

    def state(self):
        return (self.pid, self.tid, self.k, self.gap_left, self.issue, self.done_at, self.waiting)


class Core:
    __slots__ = ("index", "cache", "thread", "last", "run_from", "q_start", "stall_at")

    def __init__(self, index, cache):
        self.index = index
        self.cache = cache
        self.thread = None
        self.last = (0, 0)
        self.run_from = 0
        self.q_start = 0
        self.stall_at = -1


def thread_program(spec, seed, pid, tid, nthreads):
    """Addresses and write flags for one thread's share of a process's ops."""
    js = np.arange(tid, spec.ops, nthreads, dtype=np.int64)
    m = len(js)
    rng = np.random.default_rng([seed, pid, tid])
    size = spec.region_size
    words = size // WORD_BYTES
    if spec.pattern == "seq_scan":
        off = (js * WORD_BYTES) % size
    elif spec.pattern == "strided":
        off = (js * spec.stride) % size
        off -= off % WORD_BYTES
    elif spec.pattern == "random_uniform":
        off = rng.integers(0, words, m) * WORD_BYTES
    else:
        hot_words = min(words, max(1, int(words * spec.hot_fraction)))
        hot = rng.random(m) < spec.hot_bias
        hot_off = rng.integers(0, hot_words, m)
        cold_words = words - hot_words
        cold_off = hot_words + rng.integers(0, max(cold_words, 1), m)
        off = np.where(hot | (cold_words == 0), hot_off, cold_off) * WORD_BYTES
    writes = rng.random(m) < spec.write_ratio
    addrs = (spec.region_base + off).tolist()
    return addrs, writes.tolist(), tid, nthreads


class System:
    def __init__(self, cfg):
        cfg.validate()
        self.cfg = cfg
        self.cycle = 0
        self.bus = Bus(cfg.ncores, cfg.transfer_cycles)
        self.cores = [Core(i, DirectMappedCache(cfg.cache_size, cfg.line_bytes))
                      for i in range(cfg.ncores)]
        self.queue = []
        self.pins = {}
        self.live = 0
        for p in sorted(cfg.processes, key=lambda p: p.pid):
            for tid in range(p.threads):
                addrs, writes, first, stride = thread_program(p.program, p.seed, p.pid, tid, p.threads)
                th = Thread(p.pid, tid, addrs, writes, first, stride, p.program.compute_gap)
                self.pins[th] = p.pin
                self.queue.append(th)
                self.live += 1

    @property
    def finished(self):
        return self.live == 0

    def digest(self):
        h = hashlib.sha256()
        h.update(repr((self.cycle, self.bus.free_at, self.bus.last, sorted(self.bus.requests.items()),
                       [(c.cache.tags, c.thread.state() if c.thread else None, c.last, c.run_from,
                         c.q_start, c.stall_at) for c in self.cores],
                       [t.state() for t in self.queue])).encode())
        return h.hexdigest()

    def _take(self, core):
        q = self.queue
        for i, th in enumerate(q):
            pin = self.pins[th]
            if pin is None or pin == core:
                return q.pop(i)
        return None

    def _dispatch(self, core, th, c, out):
        out.append(CoreEvent(SWITCH, core.index, NA, core.last[0], core.last[1], c, 0,
                             (th.tid << 16) | th.pid))
        core.last = (th.pid, th.tid)
        if th.finished:
            core.thread = None
            self.live -= 1
            return
        core.thread = th
        cost = self.cfg.switch_cost
        core.run_from = c + cost
        core.q_start = c + cost
        core.stall_at = c + cost - 1 if cost else -1

    def step(self):
        """Simulate one cycle; returns that cycle's events in (core, emission) order."""
        c = self.cycle
        cfg = self.cfg
        per_core = [[] for _ in self.cores]
        # scheduling
        for core in self.cores:
            th = core.thread
            if th is None:
                if self.queue:
                    nxt = self._take(core.index)
                    if nxt is not None:
                        self._dispatch(core, nxt, c, per_core[core.index])
            elif (self.queue and c >= core.run_from and th.issue < 0
                    and c - core.q_start >= cfg.quantum):
                nxt = self._take(core.index)
                if nxt is not None:
                    self.queue.append(th)
                    self._dispatch(core, nxt, c, per_core[core.index])
        # bus
        granted = self.bus.grant(c)
        if granted is not None:
            th = self.cores[granted].thread
            th.waiting = False
            th.done_at = c + cfg.transfer_cycles + cfg.memory_latency - 1
        # execution
        for core in self.cores:
            th = core.thread
            if th is None:
                continue
            out = per_core[core.index]
            pid, tid = th.pid, th.tid
            if core.stall_at == c:
                out.append(CoreEvent(STALL, core.index, NA, pid, tid, c, 0, cfg.switch_cost))
                core.stall_at = -1
            if c < core.run_from:
                continue
            if th.issue >= 0:
                if th.done_at == c:
                    lat = c - th.issue + 1
                    out.append(CoreEvent(STALL, core.index, NA, pid, tid, c, 0, lat - 1))
                    self._retire(core, th, c, lat, out)
                continue
            if th.gap_left:
                th.gap_left -= 1
                continue
            k = th.k
            addr = th.addrs[k]
            if core.cache.access(addr).hit:
                self._retire(core, th, c, 1, out)
            else:
                th.issue = c
                th.done_at = -1
                th.waiting = True
                self.bus.request(core.index, c + 1)
        self.cycle = c + 1
        if len(self.cores) == 1:
            return per_core[0]
        return [ev for evs in per_core for ev in evs]

    def _retire(self, core, th, c, lat, out):
        k = th.k
        out.append(CoreEvent(MEM, core.index, 1 if th.writes[k] else 0, th.pid, th.tid, c,
                             th.addrs[k], lat))
        out.append(CoreEvent(INSTR, core.index, NA, th.pid, th.tid, c, th.pc(k), 0))
        th.k = k + 1
        th.issue = -1
        th.gap_left = th.gap
        if th.finished:
            core.thread = None
            self.live -= 1

    def next_activity(self):
        """Earliest cycle >= now at which :meth:`step` can change state or emit events.

        Cycles before it are pure waiting (compute gaps, in-flight misses,
        switch costs) and may be skipped with :meth:`skip_to`.
        """
        c = self.cycle
        best = None
        quantum = self.cfg.quantum
        queue = self.queue
        for core in self.cores:
            th = core.thread
            if th is None:
                if queue:
                    return c
                continue
            if c < core.run_from:
                t = core.stall_at if core.stall_at >= 0 else core.run_from
            elif th.issue >= 0:
                t = th.done_at if th.done_at >= 0 else None
            else:
                t = c + th.gap_left
                if queue:
                    t = min(t, max(c, core.q_start + quantum))
            if t is not None and (best is None or t < best):
                best = t
                if t <= c:
                    return c
        reqs = self.bus.requests
        if reqs:
            t = max(self.bus.free_at, min(reqs.values()))
            if best is None or t < best:
                best = t
        if best is None:
            return c
        return max(best, c)

    def skip_to(self, target):
        """Jump the clock forward to ``target`` (must not pass :meth:`next_activity`)."""
        delta = target - self.cycle
        if delta <= 0:
            return
        for core in self.cores:
            th = core.thread
            if th is not None and th.issue < 0 and self.cycle >= core.run_from and th.gap_left:
                th.gap_left -= delta
        self.cycle = target

    def run(self, max_cycles):
        """Step until every thread has finished or ``max_cycles`` cycles have elapsed."""
        log = []
        while self.live and self.cycle < max_cycles:
            nxt = self.next_activity()
            if nxt > self.cycle:
                self.skip_to(min(nxt, max_cycles))
                continue
            log.extend(self.step())
        return log


def build_system(cfg):
    if isinstance(cfg, dict):
        cfg = SystemConfig.from_dict(cfg)
    return System(cfg)


def run(system, max_cycles):
    return system.run(max_cycles)
