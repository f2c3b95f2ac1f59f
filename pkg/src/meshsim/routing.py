"""Proactive link-state routing with resilient route maintenance.

Each node runs HELLO neighbor sensing (HELLOs double as loss probes), full
topology-control flooding with per-originator sequence numbers, gateway
(HNA) announcements from server nodes, metric-weighted shortest paths with
a deterministic tiebreak, switch hysteresis against route oscillation, and
a route maintainer that distinguishes transient link trouble (suppress and
reroute locally) from genuine link death (flood a topology change).
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass, field

from . import metrics
from .errors import DeadLink, NoGateway
from .metrics import ElpParams, LinkStats


@dataclass
class RoutingParams:
    hello_interval: float = 1.0
    tc_interval: float = 5.0
    hold_multiplier: int = 3          # entry lifetime = multiplier * interval
    hysteresis: float = 0.1
    recompute_interval: float = 1.0
    maintenance: bool = True          # route maintainer on/off (off = AODV-style)
    long_term_threshold: float = 0.7  # score gate for suppression vs link-down
    suppress_duration: float = 10.0
    max_suppressions: int = 3         # strikes within strike_window force down
    strike_window: float = 60.0
    control_bits: int = 2048          # HELLO/TC/HNA frame size (256 bytes)
    long_term_alpha: float = 0.05     # slow EWMA feeding the long-term score
    metric: str = "elp"               # elp | hop_count


@dataclass
class Route:
    dest: int
    next_hop: int
    path_cost: float
    path: tuple[int, ...]
    installed_at: float
    link_idx: int = -1
    forward: bool = True

    @property
    def hops(self) -> int:
        return len(self.path) - 1


def compute_routes(graph: dict[int, dict[int, float]], source: int,
                   t: float = 0.0) -> dict[int, Route]:
    """Shortest-path tree over an advertised-cost graph.

    Deterministic tiebreak: lower cost, then fewer hops, then lowest
    lexicographic node-id path. graph[u][v] is the directed cost u -> v.
    """
    settled: dict[int, tuple[float, int, tuple[int, ...]]] = {}
    heap = [(0.0, 0, (source,))]
    while heap:
        cost, hops, path = heapq.heappop(heap)
        u = path[-1]
        if u in settled:
            continue
        settled[u] = (cost, hops, path)
        for v in sorted(graph.get(u, ())):
            if v not in settled:
                heapq.heappush(heap, (cost + graph[u][v], hops + 1, path + (v,)))
    table = {}
    for dest, (cost, _hops, path) in settled.items():
        if dest == source:
            continue
        table[dest] = Route(dest, path[1], cost, path, t)
    return table


def maybe_switch_route(current: Route | None, candidate: Route | None,
                       h: float) -> bool:
    """True if the candidate should replace the incumbent route."""
    if candidate is None:
        return False
    if current is None:
        return True
    return candidate.path_cost < current.path_cost * (1.0 - h)


@dataclass
class NeighborLink:
    """Directional bookkeeping for one link to one neighbor."""

    link_idx: int
    forward: bool                     # our transmit direction on the link
    stats: LinkStats = None
    last_heard: float = -1.0
    heard_since_tick: bool = False
    reported: bool = False            # neighbor has reported hearing us
    long_term_score: float = 1.0
    suppressed_until: float = -1.0
    suppression_times: deque = field(default_factory=deque)

    def usable(self, now: float, hold: float) -> bool:
        return (self.reported and self.last_heard >= 0
                and now - self.last_heard <= hold
                and now >= self.suppressed_until)


class Router:
    """One node's routing agent, driven entirely by engine events."""

    def __init__(self, node_id, topo, engine, medium, params: RoutingParams,
                 elp_params: ElpParams | None = None, is_server=False):
        self.node_id = node_id
        self.topo = topo
        self.engine = engine
        self.medium = medium
        self.params = params
        self.elp = elp_params or ElpParams()
        self.is_server = is_server
        self.peers: dict[int, "Router"] = {}     # filled by wire_network
        # neighbor node -> {link_idx: NeighborLink}
        self.neighbors: dict[int, dict[int, NeighborLink]] = {}
        self.db: dict[int, dict] = {}            # origin -> {seq, expires, links}
        self.hna: dict[int, dict] = {}           # origin -> {seq, expires}
        self._seen_tc: set[tuple[int, int]] = set()
        self._seen_hna: set[tuple[int, int]] = set()
        self._tc_seq = 0
        self._hna_seq = 0
        self.table: dict[int, Route] = {}
        self.dirty = True
        self.events: list[tuple[float, str, str]] = []

    # -- lifecycle -------------------------------------------------------

    def start(self, phase: float = 0.0):
        p = self.params
        self.engine.schedule(self.engine.now + phase + 1e-4, self._hello_tick)
        self.engine.schedule(self.engine.now + phase + p.hello_interval / 2,
                             self._tc_tick)
        self.engine.schedule(self.engine.now + phase + p.recompute_interval,
                             self._recompute_tick)

    def log(self, kind: str, info: str = ""):
        self.events.append((self.engine.now, kind, info))

    # -- HELLO / neighbor sensing ---------------------------------------

    def _hello_tick(self):
        now = self.engine.now
        p = self.params
        for nbr_id in list(self.neighbors):
            for nl in list(self.neighbors[nbr_id].values()):
                metrics.record_probe(nl.stats, "rev", nl.heard_since_tick,
                                     self.elp.ewma_alpha)
                nl.heard_since_tick = False
        self._expire_neighbors(now)
        self.emit_hello(now)
        self.engine.schedule(now + p.hello_interval, self._hello_tick)

    def emit_hello(self, t):
        ratios = {}
        for nbr_id, links in self.neighbors.items():
            for li, nl in links.items():
                ratios[li] = nl.stats.d_r      # measured neighbor -> us
        msg = {"type": "hello", "origin": self.node_id, "ratios": ratios}
        self.medium.broadcast(self.node_id, self.params.control_bits,
                              lambda nbr, li, tt, m=msg: self.peers[nbr].process_hello(m, li, tt))

    def process_hello(self, msg, link_idx: int, t: float):
        origin = msg["origin"]
        link = self.topo.links[link_idx]
        forward = link.src == self.node_id     # our data direction on this link
        links = self.neighbors.setdefault(origin, {})
        nl = links.get(link_idx)
        if nl is None:
            nl = links[link_idx] = NeighborLink(
                link_idx, forward,
                stats=LinkStats(d_f=1.0, d_r=1.0, capacity=link.capacity))
            self.dirty = True
        nl.last_heard = t
        nl.heard_since_tick = True
        reported = msg["ratios"].get(link_idx)
        if reported is not None:
            if not nl.reported:
                self.dirty = True
            nl.reported = True
            nl.stats.d_f = reported            # our -> neighbor, measured there
            a = self.params.long_term_alpha
            nl.long_term_score = (1 - a) * nl.long_term_score + a * reported

    def _expire_neighbors(self, now):
        p = self.params
        hold = p.hold_multiplier * p.hello_interval
        for nbr_id in list(self.neighbors):
            for li, nl in list(self.neighbors[nbr_id].items()):
                if nl.last_heard < 0 or now - nl.last_heard <= hold:
                    continue
                if now < nl.suppressed_until:
                    continue                   # held by the maintainer
                if (p.maintenance and nl.long_term_score >= p.long_term_threshold
                        and self._suppression_allowed(nl, now)):
                    self._suppress(nbr_id, nl, now, "missed hellos")
                else:
                    self._drop_neighbor_link(nbr_id, li, now, "neighbor_lost")

    def _drop_neighbor_link(self, nbr_id, link_idx, now, reason):
        del self.neighbors[nbr_id][link_idx]
        if not self.neighbors[nbr_id]:
            del self.neighbors[nbr_id]
        self.log("link_down", f"nbr={nbr_id} link={link_idx} {reason}")
        self.dirty = True
        self.flood_tc(reason=reason)
        self._recompute(now)

    # -- link costs ------------------------------------------------------

    def _link_cost(self, nl: NeighborLink) -> float | None:
        if self.params.metric == "hop_count":
            return metrics.hop_count_metric()
        st = nl.stats
        try:
            return metrics.elp_link(
                LinkStats(d_f=st.d_f, d_r=st.d_r,
                          busy=self.medium.busy_fraction(nl.link_idx),
                          capacity=st.capacity),
                self.elp)
        except DeadLink:
            return None

    #: routing-time cost multiplier for suppressed links: alternatives win,
    #: but a cut link keeps carrying traffic rather than blackholing
    SUPPRESS_PENALTY = 4.0

    def _local_links(self, now, advertise=False):
        """{neighbor: (cost, link_idx, forward)} over usable links.

        With advertise=True, suppressed links stay in at plain cost so the
        maintainer never leaks a topology change; for route computation
        they carry a penalty instead.
        """
        p = self.params
        hold = p.hold_multiplier * p.hello_interval
        out = {}
        for nbr_id in sorted(self.neighbors):
            best = None
            for li in sorted(self.neighbors[nbr_id]):
                nl = self.neighbors[nbr_id][li]
                suppressed = now < nl.suppressed_until
                alive = (nl.reported and nl.last_heard >= 0
                         and now - nl.last_heard <= hold)
                if not alive and not suppressed:
                    continue
                cost = self._link_cost(nl)
                if cost is None:
                    continue
                if suppressed and not advertise:
                    cost *= self.SUPPRESS_PENALTY
                if best is None or cost < best[0]:
                    best = (cost, li, nl.forward)
            if best is not None:
                out[nbr_id] = best
        return out

    # -- TC / HNA flooding ----------------------------------------------

    def _tc_tick(self):
        now = self.engine.now
        self.flood_tc(reason="periodic")
        if self.is_server:
            self.flood_hna()
        self.engine.schedule(now + self.params.tc_interval, self._tc_tick)

    def flood_tc(self, reason="periodic"):
        now = self.engine.now
        links = {nbr: cost for nbr, (cost, _li, _f)
                 in self._local_links(now, advertise=True).items()}
        self._tc_seq += 1
        msg = {"type": "tc", "origin": self.node_id, "seq": self._tc_seq,
               "links": links}
        self.log("tc_flood", reason)
        self._seen_tc.add((self.node_id, self._tc_seq))
        self._broadcast_ctrl(msg, self.process_tc)

    def flood_hna(self):
        self._hna_seq += 1
        msg = {"type": "hna", "origin": self.node_id, "seq": self._hna_seq}
        self._seen_hna.add((self.node_id, self._hna_seq))
        self._broadcast_ctrl(msg, self.process_hna)

    def _broadcast_ctrl(self, msg, handler_name_unused=None):
        self.medium.broadcast(
            self.node_id, self.params.control_bits,
            lambda nbr, li, tt, m=msg: self.peers[nbr].receive_control(m, tt))

    def receive_control(self, msg, t):
        if msg["type"] == "tc":
            self.process_tc(msg, t)
        elif msg["type"] == "hna":
            self.process_hna(msg, t)

    def process_tc(self, msg, t):
        origin, seq = msg["origin"], msg["seq"]
        if origin == self.node_id or (origin, seq) in self._seen_tc:
            return
        self._seen_tc.add((origin, seq))
        entry = self.db.get(origin)
        if entry is not None and seq < entry["seq"]:
            return                             # stale
        expires = t + self.params.hold_multiplier * self.params.tc_interval
        self.db[origin] = {"seq": seq, "expires": expires,
                           "links": dict(msg["links"])}
        self.dirty = True
        self._broadcast_ctrl(msg)              # re-flood once

    def process_hna(self, msg, t):
        origin, seq = msg["origin"], msg["seq"]
        if origin == self.node_id or (origin, seq) in self._seen_hna:
            return
        self._seen_hna.add((origin, seq))
        entry = self.hna.get(origin)
        if entry is not None and seq < entry["seq"]:
            return
        expires = t + self.params.hold_multiplier * self.params.tc_interval
        self.hna[origin] = {"seq": seq, "expires": expires}
        self._broadcast_ctrl(msg)

    # -- route computation ----------------------------------------------

    def _graph(self, now) -> dict[int, dict[int, float]]:
        graph: dict[int, dict[int, float]] = {}
        for origin in sorted(self.db):
            entry = self.db[origin]
            if entry["expires"] < now:
                continue
            graph[origin] = dict(entry["links"])
        local = self._local_links(now)
        graph[self.node_id] = {nbr: cost for nbr, (cost, _li, _f) in local.items()}
        self._local_cache = local
        return graph

    def _recompute_tick(self):
        now = self.engine.now
        if self.dirty:
            self._recompute(now)
        self.engine.schedule(now + self.params.recompute_interval,
                             self._recompute_tick)

    def _recompute(self, now):
        self.dirty = False
        graph = self._graph(now)
        fresh = compute_routes(graph, self.node_id, now)
        local = self._local_cache
        table = {}
        h = self.params.hysteresis
        for dest in fresh:
            cand = fresh[dest]
            if cand.next_hop in local:
                _cost, li, fwd = local[cand.next_hop]
                cand.link_idx, cand.forward = li, fwd
            cur = self.table.get(dest)
            cur_valid = cur is not None and cur.next_hop in local and all(
                hop in graph.get(prev, {})
                for prev, hop in zip(cur.path, cur.path[1:]))
            if cur_valid:
                nl = self.neighbors.get(cur.next_hop, {}).get(cur.link_idx)
                if nl is not None and now < nl.suppressed_until:
                    cur_valid = False
            if not cur_valid:
                if cur is not None:
                    self.log("route_switch", f"dest={dest} invalidated")
                table[dest] = cand
            elif cand.path == cur.path:
                cand.installed_at = cur.installed_at
                table[dest] = cand
            elif maybe_switch_route(cur, cand, h):
                self.log("route_switch", f"dest={dest} {cur.path}->{cand.path}")
                table[dest] = cand
            else:
                # keep the incumbent; refresh its next-hop link binding
                _cost, li, fwd = local[cur.next_hop]
                cur.link_idx, cur.forward = li, fwd
                table[dest] = cur
        for dest, cur in self.table.items():
            if dest not in table:
                self.log("route_switch", f"dest={dest} lost")
        self.table = table

    def route_to(self, dest: int) -> Route | None:
        r = self.table.get(dest)
        if r is None:
            if self.dirty:
                self._recompute(self.engine.now)
                r = self.table.get(dest)
            return r
        nl = self.neighbors.get(r.next_hop, {}).get(r.link_idx)
        if nl is None or self.engine.now < nl.suppressed_until:
            self._recompute(self.engine.now)
            r = self.table.get(dest)
        return r

    def resolve_gateway(self) -> Route:
        """Least-cost route to any node with an unexpired gateway announcement."""
        now = self.engine.now
        best = None
        for origin in sorted(self.hna):
            if self.hna[origin]["expires"] < now:
                continue
            r = self.table.get(origin)
            if r is not None and (best is None or r.path_cost < best.path_cost):
                best = r
        if self.is_server:
            return Route(self.node_id, self.node_id, 0.0, (self.node_id,), now)
        if best is None:
            raise NoGateway(f"node {self.node_id}: no gateway announcement heard")
        return best

    # -- route maintenance ----------------------------------------------

    def _suppression_allowed(self, nl: NeighborLink, now) -> bool:
        w = self.params.strike_window
        while nl.suppression_times and now - nl.suppression_times[0] > w:
            nl.suppression_times.popleft()
        return len(nl.suppression_times) < self.params.max_suppressions

    def _suppress(self, nbr_id, nl: NeighborLink, now, why):
        nl.suppressed_until = now + self.params.suppress_duration
        nl.suppression_times.append(now)
        self.log("suppress", f"nbr={nbr_id} link={nl.link_idx} ({why})")
        self.dirty = True
        self._recompute(now)
        self.engine.schedule(nl.suppressed_until + 1e-6,
                             lambda: self._unsuppress(nbr_id, nl))

    def _unsuppress(self, nbr_id, nl: NeighborLink):
        now = self.engine.now
        if now < nl.suppressed_until:
            return
        if self.neighbors.get(nbr_id, {}).get(nl.link_idx) is not nl:
            return                             # dropped while suppressed
        self.log("unsuppress", f"nbr={nbr_id} link={nl.link_idx}")
        self.dirty = True
        hold = self.params.hold_multiplier * self.params.hello_interval
        if nl.last_heard < 0 or now - nl.last_heard > hold:
            # the grace period is over and the link is still silent: dead
            self._drop_neighbor_link(nbr_id, nl.link_idx, now,
                                     "suppression_expired")
        else:
            self._recompute(now)

    def handle_tx_failure(self, neighbor: int, link_idx: int, t: float):
        """MAC reported 8 consecutive failed attempts toward a neighbor."""
        p = self.params
        nl = self.neighbors.get(neighbor, {}).get(link_idx)
        if nl is None:
            return
        a = p.long_term_alpha
        nl.long_term_score = (1 - a) * nl.long_term_score
        on_route = any(r.next_hop == neighbor for r in self.table.values())
        if not on_route:
            self.log("tx_failure", f"nbr={neighbor} link={link_idx} off-route")
            return
        if not p.maintenance:
            self._drop_neighbor_link(neighbor, link_idx, t, "tx_failure")
            return
        if t < nl.suppressed_until:
            return
        if (nl.long_term_score >= p.long_term_threshold
                and self._suppression_allowed(nl, t)):
            self._suppress(neighbor, nl, t, "tx failure burst")
        else:
            self._drop_neighbor_link(neighbor, link_idx, t, "tx_failure")

    # -- introspection ---------------------------------------------------

    def table_rows(self):
        """Sorted (dest, next_hop, cost, hops, path) rows for dumps."""
        rows = []
        for dest in sorted(self.table):
            r = self.table[dest]
            rows.append((dest, r.next_hop, r.path_cost, r.hops,
                         "-".join(str(n) for n in r.path)))
        return rows


def wire_network(routers: dict[int, Router], medium):
    """Connect router instances and the MAC failure notification."""
    for r in routers.values():
        r.peers = routers

    def on_fail(src, dst, link_idx, t):
        rt = routers.get(src)
        if rt is not None:
            rt.handle_tx_failure(dst, link_idx, t)

    medium.on_tx_failure = on_fail
