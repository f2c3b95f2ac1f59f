"""Physical network model: nodes, radios, derived links and contention sets.

Links are derived from node placement: a channel-matched pair of radios within
mutual transmit range forms one (bidirectional) link. Per-attempt frame
delivery probability falls off piecewise-linearly near the edge of range,
which is where real deployments get ugly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import UnknownLink, ValidationError


@dataclass(frozen=True)
class RadioSpec:
    channel: int
    nominal_rate: float       # bits/s
    tx_range: float           # meters
    cs_range: float           # meters, carrier sense >= tx_range
    role: str = "backbone"    # backbone | access


@dataclass(frozen=True)
class NodeSpec:
    id: int
    position: tuple[float, float]
    radios: tuple[RadioSpec, ...]
    is_server: bool = False


@dataclass(frozen=True)
class PropagationModel:
    """Distance -> per-attempt delivery probability.

    Flat at p_max out to knee*tx_range, linear decay to p_min at tx_range,
    zero beyond. Two knobs, both calibration parameters rather than measured
    hardware curves.
    """

    p_max: float = 0.98
    p_min: float = 0.5
    knee: float = 0.6

    def delivery_probability(self, distance: float, tx_range: float) -> float:
        if distance > tx_range:
            return 0.0
        edge = self.knee * tx_range
        if distance <= edge:
            return self.p_max
        frac = (distance - edge) / (tx_range - edge)
        return self.p_max - (self.p_max - self.p_min) * frac


@dataclass(eq=False)
class Link:
    """One undirected link (stored once) with per-direction delivery odds.

    Direction ``forward`` means src -> dst with src < dst by node id.
    """

    index: int
    src: int
    dst: int
    channel: int
    distance: float
    p_deliver_fwd: float
    p_deliver_rev: float
    capacity: float           # bits/s

    def p_deliver(self, forward: bool) -> float:
        return self.p_deliver_fwd if forward else self.p_deliver_rev

    def transmitter(self, forward: bool) -> int:
        return self.src if forward else self.dst

    def receiver(self, forward: bool) -> int:
        return self.dst if forward else self.src


@dataclass
class Topology:
    nodes: dict[int, NodeSpec]
    links: list[Link]
    # (a, b, channel) with a < b -> link index
    link_index: dict[tuple[int, int, int], int] = field(default_factory=dict)
    # node -> [(neighbor, link index, forward?)]
    adjacency: dict[int, list[tuple[int, int, bool]]] = field(default_factory=dict)
    # link index -> indices of same-channel links whose transmitter can be
    # sensed at either endpoint (includes the link itself)
    domains: list[list[int]] = field(default_factory=list)

    def link_between(self, a: int, b: int, channel: int | None = None) -> Link:
        """Return the link between a and b, cheapest-index first if several."""
        lo, hi = min(a, b), max(a, b)
        if channel is not None:
            idx = self.link_index.get((lo, hi, channel))
            if idx is None:
                raise UnknownLink(f"no link {a}<->{b} on channel {channel}")
            return self.links[idx]
        for nbr, idx, _fwd in self.adjacency.get(a, ()):
            if nbr == b:
                return self.links[idx]
        raise UnknownLink(f"no link {a}<->{b}")

    def server_nodes(self) -> list[int]:
        return sorted(n.id for n in self.nodes.values() if n.is_server)


def _validate_nodes(nodes):
    problems = []
    seen = set()
    for n in nodes:
        if n.id in seen:
            problems.append(f"duplicate node id {n.id}")
        seen.add(n.id)
        if not n.radios:
            problems.append(f"node {n.id}: needs at least one radio")
        if not all(math.isfinite(c) for c in n.position):
            problems.append(f"node {n.id}: non-finite position")
        for r in n.radios:
            if r.tx_range <= 0:
                problems.append(f"node {n.id}: tx_range must be > 0")
            if r.cs_range < r.tx_range:
                problems.append(f"node {n.id}: cs_range < tx_range on channel {r.channel}")
            if r.nominal_rate <= 0:
                problems.append(f"node {n.id}: nominal_rate must be > 0")
    if problems:
        raise ValidationError(problems)


def _distance(a: NodeSpec, b: NodeSpec) -> float:
    return math.hypot(a.position[0] - b.position[0], a.position[1] - b.position[1])


def build_topology(nodes, overrides=None, deletions=None,
                   propagation: PropagationModel | None = None) -> Topology:
    """Derive the link set from node placement.

    overrides: {(a, b) or (a, b, channel): (p_fwd, p_rev)} with a < b;
    an entry with a single float applies symmetrically. deletions: iterable
    of (a, b) or (a, b, channel) pairs to drop (terrain, obstacles).
    """
    nodes = sorted(nodes, key=lambda n: n.id)
    _validate_nodes(nodes)
    prop = propagation or PropagationModel()
    overrides = dict(overrides or {})
    deletions = {_norm_pair(d) for d in (deletions or ())}

    by_id = {n.id: n for n in nodes}
    links: list[Link] = []
    link_index = {}
    adjacency = {n.id: [] for n in nodes}

    ids = [n.id for n in nodes]
    for i, a in enumerate(ids):
        for b in ids[i + 1:]:
            na, nb = by_id[a], by_id[b]
            d = _distance(na, nb)
            for ra in na.radios:
                for rb in nb.radios:
                    if ra.channel != rb.channel:
                        continue
                    key3 = (a, b, ra.channel)
                    if (a, b) in deletions or key3 in deletions:
                        continue
                    if key3 in link_index:
                        continue
                    if d > min(ra.tx_range, rb.tx_range):
                        continue
                    p = prop.delivery_probability(d, min(ra.tx_range, rb.tx_range))
                    p_fwd = p_rev = p
                    ov = overrides.get(key3, overrides.get((a, b)))
                    if ov is not None:
                        if isinstance(ov, (int, float)):
                            p_fwd = p_rev = float(ov)
                        else:
                            p_fwd, p_rev = float(ov[0]), float(ov[1])
                    if not (0.0 <= p_fwd <= 1.0 and 0.0 <= p_rev <= 1.0):
                        raise ValidationError(
                            [f"link {a}<->{b} ch{ra.channel}: probability outside [0,1]"])
                    idx = len(links)
                    links.append(Link(idx, a, b, ra.channel, d, p_fwd, p_rev,
                                      min(ra.nominal_rate, rb.nominal_rate)))
                    link_index[key3] = idx
                    adjacency[a].append((b, idx, True))
                    adjacency[b].append((a, idx, False))

    topo = Topology(by_id, links, link_index, adjacency)
    topo.domains = _build_domains(topo)
    return topo


def _norm_pair(d):
    if len(d) == 3:
        a, b, ch = d
        return (min(a, b), max(a, b), ch)
    a, b = d
    return (min(a, b), max(a, b))


def _cs_range(node: NodeSpec, channel: int) -> float:
    return max(r.cs_range for r in node.radios if r.channel == channel)


def _build_domains(topo: Topology) -> list[list[int]]:
    domains = []
    for link in topo.links:
        members = []
        ea = topo.nodes[link.src]
        eb = topo.nodes[link.dst]
        for other in topo.links:
            if other.channel != link.channel:
                continue
            hit = False
            for tx_id in (other.src, other.dst):
                tx = topo.nodes[tx_id]
                if (_distance(tx, ea) <= _cs_range(ea, link.channel)
                        or _distance(tx, eb) <= _cs_range(eb, link.channel)):
                    hit = True
                    break
            if hit:
                members.append(other.index)
        domains.append(members)
    return domains


def contention_domain(topo: Topology, link: Link) -> set[Link]:
    """All links sharing airtime with the given one (itself included)."""
    if link.index >= len(topo.links) or topo.links[link.index] is not link:
        raise UnknownLink(f"link {link.src}<->{link.dst} not part of this topology")
    return {topo.links[i] for i in topo.domains[link.index]}
