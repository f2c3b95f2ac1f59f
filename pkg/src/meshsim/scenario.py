"""Scenario files: strict structured-text configuration for experiments.

YAML with four sections (topology, protocol, workload, run). Unknown keys
are hard errors: silent typos in field configs are how deployments die, so
the loader fails loud and reports every problem it can find at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import yaml

from .engine import MacParams
from .errors import ParseError, ValidationError
from .metrics import ElpParams
from .qos import AdmissionLedger
from .routing import RoutingParams
from .services import ServiceParams
from .topology import NodeSpec, PropagationModel, RadioSpec, Topology, build_topology

_RADIO_KEYS = {"channel", "nominal_rate", "tx_range", "cs_range", "role"}
_NODE_KEYS = {"id", "position", "radios", "is_server"}
_TOPOLOGY_KEYS = {"nodes", "link_overrides", "link_deletions", "propagation"}
_OVERRIDE_KEYS = {"a", "b", "channel", "p", "p_fwd", "p_rev"}
_PROP_KEYS = {"p_max", "p_min", "knee"}
_PROTOCOL_KEYS = {"metric", "elp", "routing", "engine", "qos", "services"}
_ROUTING_KEYS = {"hello_interval", "tc_interval", "hold_multiplier", "hysteresis",
                 "recompute_interval", "maintenance", "long_term_threshold",
                 "suppress_duration", "max_suppressions", "strike_window",
                 "control_bits", "long_term_alpha"}
_ELP_KEYS = {"w", "b_max", "ref_rate", "ewma_alpha"}
_ENGINE_KEYS = {"retry_limit", "base_access_delay", "queue_limit", "busy_window",
                "b_max", "header_bits"}
_QOS_KEYS = {"u_max", "goodput_factor"}
_SERVICE_KEYS = {"ack_timeout", "presence_timeout", "beacon_interval",
                 "max_transmissions", "voice_rate", "voice_packet_bits",
                 "video_rate", "video_answer_timeout", "broadcast_limit",
                 "sms_bits", "ack_bits"}
_WORKLOAD_KEYS = {"clients", "calls", "actions"}
_CLIENT_KEYS = {"id", "attach", "position", "video_answer"}
_CALLS_KEYS = {"count", "background", "duration", "codec_rate", "start", "stagger"}
_ACTION_KEYS = {"at", "kind", "src", "dst", "client", "node", "size", "chunk_size",
                "duration", "a", "b", "response"}
_ACTION_KINDS = {"sms", "file", "call", "broadcast_audio", "video_request",
                 "attach", "outage"}
_RUN_KEYS = {"duration", "warmup", "seeds"}
_TOP_KEYS = {"topology", "protocol", "workload", "run"}


def _check_keys(d, allowed, path, problems):
    if not isinstance(d, dict):
        problems.append(f"{path}: expected a mapping")
        return {}
    for k in d:
        if k not in allowed:
            problems.append(f"{path}.{k}: unknown key")
    return d


@dataclass
class CallTemplate:
    count: int = 0
    background: int = 0
    duration: float = 30.0
    codec_rate: float = 64000.0
    start: float | None = None        # default: warmup end
    stagger: float = 0.05


@dataclass
class ClientDef:
    id: str
    attach: int
    position: tuple[float, float] = (0.0, 0.0)
    video_answer: str = "accept"


@dataclass
class Scenario:
    name: str
    topology: Topology
    metric: str
    elp: ElpParams
    routing: RoutingParams
    mac: MacParams
    header_bits: int
    qos_u_max: float
    qos_goodput: float
    services: ServiceParams
    clients: list[ClientDef]
    calls: CallTemplate
    actions: list[dict]
    duration: float
    warmup: float
    seeds: list[int]

    def make_ledger(self) -> AdmissionLedger:
        return AdmissionLedger(self.topology, self.qos_u_max, self.qos_goodput)

    @staticmethod
    def from_dict(raw: dict, name: str = "<dict>") -> "Scenario":
        return _build(raw, name)


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ParseError(f"{path}: no such file")
    except yaml.YAMLError as e:
        raise ParseError(f"{path}: {e}")
    if not isinstance(raw, dict):
        raise ParseError(f"{path}: scenario must be a mapping")
    return _build(raw, str(path))


def _build(raw, name) -> Scenario:
    problems: list[str] = []
    _check_keys(raw, _TOP_KEYS, "scenario", problems)
    topo_raw = _check_keys(raw.get("topology", {}), _TOPOLOGY_KEYS, "topology", problems)
    proto = _check_keys(raw.get("protocol", {}), _PROTOCOL_KEYS, "protocol", problems)
    workload = _check_keys(raw.get("workload", {}), _WORKLOAD_KEYS, "workload", problems)
    run = _check_keys(raw.get("run", {}), _RUN_KEYS, "run", problems)

    # topology
    nodes = []
    for i, n in enumerate(topo_raw.get("nodes", [])):
        _check_keys(n, _NODE_KEYS, f"topology.nodes[{i}]", problems)
        radios = []
        for j, r in enumerate(n.get("radios", [])):
            _check_keys(r, _RADIO_KEYS, f"topology.nodes[{i}].radios[{j}]", problems)
            try:
                radios.append(RadioSpec(int(r["channel"]), float(r["nominal_rate"]),
                                        float(r["tx_range"]), float(r["cs_range"]),
                                        r.get("role", "backbone")))
            except (KeyError, TypeError, ValueError) as e:
                problems.append(f"topology.nodes[{i}].radios[{j}]: {e}")
        try:
            nodes.append(NodeSpec(int(n["id"]), tuple(map(float, n["position"])),
                                  tuple(radios), bool(n.get("is_server", False))))
        except (KeyError, TypeError, ValueError) as e:
            problems.append(f"topology.nodes[{i}]: {e}")

    ids_seen = set()
    for n in nodes:
        if n.id in ids_seen:
            problems.append(f"topology.nodes: duplicate node id {n.id}")
        ids_seen.add(n.id)

    overrides = {}
    for i, ov in enumerate(topo_raw.get("link_overrides", [])):
        _check_keys(ov, _OVERRIDE_KEYS, f"topology.link_overrides[{i}]", problems)
        try:
            a, b = int(ov["a"]), int(ov["b"])
            lo, hi = min(a, b), max(a, b)
            key = (lo, hi, int(ov["channel"])) if "channel" in ov else (lo, hi)
            if "p" in ov:
                overrides[key] = float(ov["p"])
            else:
                # p_fwd refers to the low-id -> high-id direction
                p_ab, p_ba = float(ov["p_fwd"]), float(ov["p_rev"])
                overrides[key] = (p_ab, p_ba) if a == lo else (p_ba, p_ab)
        except (KeyError, TypeError, ValueError) as e:
            problems.append(f"topology.link_overrides[{i}]: {e}")

    deletions = []
    for i, d in enumerate(topo_raw.get("link_deletions", [])):
        try:
            deletions.append(tuple(int(x) for x in d))
        except (TypeError, ValueError) as e:
            problems.append(f"topology.link_deletions[{i}]: {e}")

    prop_raw = _check_keys(topo_raw.get("propagation", {}), _PROP_KEYS,
                           "topology.propagation", problems)
    propagation = PropagationModel(**{k: float(v) for k, v in prop_raw.items()})

    # protocol
    metric = proto.get("metric", "elp")
    if metric not in ("elp", "hop_count"):
        problems.append(f"protocol.metric: must be elp or hop_count, got {metric!r}")
    elp_raw = _check_keys(proto.get("elp", {}), _ELP_KEYS, "protocol.elp", problems)
    routing_raw = _check_keys(proto.get("routing", {}), _ROUTING_KEYS,
                              "protocol.routing", problems)
    engine_raw = _check_keys(proto.get("engine", {}), _ENGINE_KEYS,
                             "protocol.engine", problems)
    qos_raw = _check_keys(proto.get("qos", {}), _QOS_KEYS, "protocol.qos", problems)
    svc_raw = _check_keys(proto.get("services", {}), _SERVICE_KEYS,
                          "protocol.services", problems)

    # workload
    clients = []
    client_ids = set()
    for i, c in enumerate(workload.get("clients", [])):
        _check_keys(c, _CLIENT_KEYS, f"workload.clients[{i}]", problems)
        try:
            cd = ClientDef(str(c["id"]), int(c["attach"]),
                           tuple(c.get("position", (0.0, 0.0))),
                           c.get("video_answer", "accept"))
            if cd.id in client_ids:
                problems.append(f"workload.clients[{i}]: duplicate client id {cd.id!r}")
            client_ids.add(cd.id)
            clients.append(cd)
        except (KeyError, TypeError, ValueError) as e:
            problems.append(f"workload.clients[{i}]: {e}")

    calls_raw = _check_keys(workload.get("calls", {}), _CALLS_KEYS,
                            "workload.calls", problems)
    calls = CallTemplate(**{k: v for k, v in calls_raw.items()})

    actions = []
    for i, a in enumerate(workload.get("actions", [])):
        _check_keys(a, _ACTION_KEYS, f"workload.actions[{i}]", problems)
        kind = a.get("kind")
        if kind not in _ACTION_KINDS:
            problems.append(f"workload.actions[{i}].kind: unknown kind {kind!r}")
            continue
        for ref_key in ("src", "dst", "client"):
            if ref_key in a and a[ref_key] not in client_ids:
                problems.append(
                    f"workload.actions[{i}].{ref_key}: undefined client {a[ref_key]!r}")
        actions.append(dict(a))

    duration = float(run.get("duration", 60.0))
    warmup = float(run.get("warmup", 15.0))
    seeds = [int(s) for s in run.get("seeds", [1])]
    if duration <= warmup:
        problems.append(f"run.duration ({duration}) must exceed run.warmup ({warmup})")

    node_ids = {n.id for n in nodes}
    for c in clients:
        if c.attach not in node_ids:
            problems.append(f"workload.clients: client {c.id!r} attaches to "
                            f"undefined node {c.attach}")

    if problems:
        raise ValidationError(problems)

    topology = build_topology(nodes, overrides, deletions, propagation)

    return Scenario(
        name=name,
        topology=topology,
        metric=metric,
        elp=ElpParams(**{k: float(v) for k, v in elp_raw.items()}),
        routing=RoutingParams(metric=metric, **routing_raw),
        mac=MacParams(**{k: v for k, v in engine_raw.items() if k != "header_bits"}),
        header_bits=int(engine_raw.get("header_bits", 320)),
        qos_u_max=float(qos_raw.get("u_max", 0.85)),
        qos_goodput=float(qos_raw.get("goodput_factor", 0.8)),
        services=ServiceParams(**svc_raw),
        clients=clients,
        calls=calls,
        actions=actions,
        duration=duration,
        warmup=warmup,
        seeds=seeds,
    )
