"""Deterministic discrete-event core and MAC-level frame transmission.

The engine is a plain (time, seq) heap: identical scenario + seed gives an
identical event trace. The medium models 802.11-style unicast with a retry
limit of 8 total attempts (one try plus seven retries) and a contention-
dependent access delay instead of slot-level CSMA/CA: each attempt waits an
exponential access delay whose mean scales with 1/(1 - busy fraction) of the
link's contention domain, plus a linear per-retry backoff penalty.
"""

from __future__ import annotations

import hashlib
import heapq
import random
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

from .errors import PastTime, UnknownLink
from .topology import Topology


def rng_stream(seed: int, label: str) -> random.Random:
    """Independent deterministic random stream per (seed, label).

    Seeds a Mersenne Twister from a SHA-256 digest so streams are stable
    across platforms and uncorrelated across labels.
    """
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))


class Event(NamedTuple):
    time: float
    seq: int
    kind: str
    payload: object          # opaque to the engine; callables are invoked


@dataclass
class EngineStats:
    events_processed: int = 0
    frames_sent: int = 0
    frames_delivered: int = 0
    frames_dropped: int = 0
    airtime_by_channel: dict[int, float] = field(default_factory=dict)


class Engine:
    """Virtual clock + event queue. Single-threaded per scenario replica."""

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.now = 0.0
        self._heap: list[Event] = []
        self._seq = 0
        self.stats = EngineStats()
        self._streams: dict[str, random.Random] = {}

    def rng(self, label: str) -> random.Random:
        try:
            return self._streams[label]
        except KeyError:
            r = self._streams[label] = rng_stream(self.seed, label)
            return r

    def schedule(self, time: float, payload, kind: str = "protocol") -> Event:
        if time < self.now:
            raise PastTime(f"schedule at {time} < now {self.now}")
        ev = Event(time, self._seq, kind, payload)
        self._seq += 1
        heapq.heappush(self._heap, ev)
        return ev

    def schedule_in(self, delay: float, payload, kind: str = "protocol") -> Event:
        return self.schedule(self.now + delay, payload, kind)

    def run_until(self, t_end: float) -> EngineStats:
        if t_end < self.now:
            raise PastTime(f"run_until {t_end} < now {self.now}")
        heap = self._heap
        stats = self.stats
        while heap and heap[0].time <= t_end:
            ev = heapq.heappop(heap)
            self.now = ev.time
            stats.events_processed += 1
            payload = ev.payload
            if callable(payload):
                payload()
        self.now = t_end
        return stats


class TransmitOutcome(NamedTuple):
    delivered: bool
    attempts: int             # total attempts, 1..retry_limit
    completion_time: float
    airtime: float            # channel time consumed by all attempts


@dataclass
class MacParams:
    retry_limit: int = 8              # total attempts = 1 try + 7 retries
    base_access_delay: float = 5e-4   # seconds, mean at idle channel
    queue_limit: int = 50             # frames per directed link
    busy_window: float = 5.0          # seconds, sliding measurement window
    b_max: float = 0.99


class Medium:
    """Frame transmission over topology links with airtime accounting.

    Transmissions are attributed to (transmitter node, channel) slots; the
    busy fraction seen by a link sums recent airtime of every slot within
    carrier-sense range of its endpoints, over a bucketed sliding window.
    """

    BUCKETS = 5

    def __init__(self, topo: Topology, engine: Engine, params: MacParams | None = None):
        self.topo = topo
        self.engine = engine
        self.params = params or MacParams()
        self._rng = engine.rng("mac")
        # enumerate (node, channel) transmitter slots
        self._slot_of: dict[tuple[int, int], int] = {}
        for nid in sorted(topo.nodes):
            for r in topo.nodes[nid].radios:
                self._slot_of.setdefault((nid, r.channel), len(self._slot_of))
        n_slots = len(self._slot_of)
        self._bucket_air = [[0.0] * n_slots for _ in range(self.BUCKETS)]
        self._win_air = [0.0] * n_slots                 # sum over buckets
        self._bucket = 0
        self._bucket_dt = self.params.busy_window / self.BUCKETS
        # per link: transmitter slots that its endpoints can sense
        self._sensed_slots = self._build_sensed_slots()
        self._busy_cache = [0.0] * len(topo.links)
        self._busy_cache_t = [-1.0] * len(topo.links)
        # per directed link serialization
        n = len(topo.links)
        self._busy_until = [[0.0, 0.0] for _ in range(n)]
        self._pending = [[0, 0] for _ in range(n)]
        self.on_tx_failure: Callable | None = None      # (src, dst, link_idx, t)
        engine.schedule_in(self._bucket_dt, self._rotate, kind="timer")

    def _build_sensed_slots(self):
        import math
        sensed = []
        nodes = self.topo.nodes
        for link in self.topo.links:
            slots = set()
            for end_id in (link.src, link.dst):
                end = nodes[end_id]
                cs = max(r.cs_range for r in end.radios if r.channel == link.channel)
                for (nid, ch), slot in self._slot_of.items():
                    if ch != link.channel:
                        continue
                    other = nodes[nid]
                    d = math.hypot(other.position[0] - end.position[0],
                                   other.position[1] - end.position[1])
                    if d <= cs:
                        slots.add(slot)
            sensed.append(sorted(slots))
        return sensed

    def _rotate(self):
        self._bucket = (self._bucket + 1) % self.BUCKETS
        old = self._bucket_air[self._bucket]
        win = self._win_air
        for i, v in enumerate(old):
            if v:
                win[i] -= v
                old[i] = 0.0
        self.engine.schedule_in(self._bucket_dt, self._rotate, kind="timer")

    def _record_airtime(self, node: int, channel: int, airtime: float):
        slot = self._slot_of.get((node, channel))
        if slot is None:
            return
        self._bucket_air[self._bucket][slot] += airtime
        self._win_air[slot] += airtime
        ch_air = self.engine.stats.airtime_by_channel
        ch_air[channel] = ch_air.get(channel, 0.0) + airtime

    def busy_fraction(self, link_idx: int) -> float:
        """Measured busy fraction of the link's contention domain, clamped."""
        now = self.engine.now
        # cheap cache: busy moves on window timescales, not per frame
        if now - self._busy_cache_t[link_idx] < 0.05:
            return self._busy_cache[link_idx]
        win = self._win_air
        air = 0.0
        for s in self._sensed_slots[link_idx]:
            air += win[s]
        b = air / self.params.busy_window
        if b > self.params.b_max:
            b = self.params.b_max
        self._busy_cache[link_idx] = b
        self._busy_cache_t[link_idx] = now
        return b

    def transmit(self, frame_size: float, link_idx: int, forward: bool,
                 t_start: float) -> TransmitOutcome:
        """Bernoulli attempt sequence on one directed link, no queueing."""
        if link_idx < 0 or link_idx >= len(self.topo.links):
            raise UnknownLink(f"link index {link_idx}")
        if frame_size <= 0:
            raise ValueError("frame_size must be > 0")
        link = self.topo.links[link_idx]
        p = link.p_deliver_fwd if forward else link.p_deliver_rev
        air = frame_size / link.capacity
        b = self.busy_fraction(link_idx)
        rate = (1.0 - b) / self.params.base_access_delay
        base = self.params.base_access_delay
        rng = self._rng
        t = t_start
        airtime = 0.0
        delivered = False
        attempts = 0
        for k in range(self.params.retry_limit):
            attempts += 1
            t += rng.expovariate(rate) + k * base + air
            airtime += air
            if rng.random() < p:
                delivered = True
                break
        tx_node = link.src if forward else link.dst
        self._record_airtime(tx_node, link.channel, airtime)
        return TransmitOutcome(delivered, attempts, t, airtime)

    def send_frame(self, link_idx: int, forward: bool, bits: float,
                   on_delivered=None, on_failed=None, notify_routing: bool = True):
        """Queue a frame on a directed link; callbacks fire at completion.

        on_failed reason is "queue" (tail drop) or "retry" (8 failed
        attempts; also raises the routing failure notification).
        """
        dirn = 0 if forward else 1
        stats = self.engine.stats
        if self._pending[link_idx][dirn] >= self.params.queue_limit:
            stats.frames_dropped += 1
            if on_failed is not None:
                on_failed("queue")
            return
        now = self.engine.now
        start = self._busy_until[link_idx][dirn]
        if start < now:
            start = now
        out = self.transmit(bits, link_idx, forward, start)
        self._busy_until[link_idx][dirn] = out.completion_time
        self._pending[link_idx][dirn] += 1
        stats.frames_sent += 1

        def complete():
            self._pending[link_idx][dirn] -= 1
            if out.delivered:
                stats.frames_delivered += 1
                if on_delivered is not None:
                    on_delivered(out.completion_time)
            else:
                stats.frames_dropped += 1
                if notify_routing and self.on_tx_failure is not None:
                    link = self.topo.links[link_idx]
                    self.on_tx_failure(link.transmitter(forward),
                                       link.receiver(forward),
                                       link_idx, out.completion_time)
                if on_failed is not None:
                    on_failed("retry")

        self.engine.schedule(out.completion_time, complete, kind="frame-tx")

    def broadcast(self, node_id: int, bits: float, deliver):
        """One unreliable transmission per radio; no retries, no ACKs.

        deliver(neighbor_id, link_idx, t_arrive) fires per reached neighbor.
        """
        now = self.engine.now
        rng = self._rng
        sent_channels = set()
        for nbr, link_idx, fwd in self.topo.adjacency.get(node_id, ()):
            link = self.topo.links[link_idx]
            if link.channel not in sent_channels:
                sent_channels.add(link.channel)
                self._record_airtime(node_id, link.channel, bits / link.capacity)
                self.engine.stats.frames_sent += 1
            p = link.p_deliver(fwd)
            if rng.random() < p:
                t_arrive = now + bits / link.capacity
                self.engine.schedule(t_arrive,
                                     lambda n=nbr, li=link_idx, t=t_arrive: deliver(n, li, t),
                                     kind="frame-tx")
