"""Experiment harness: scenario execution, sweeps, statistics, export.

A run is a pure function of (scenario, seed): it assembles the engine,
medium, per-node routers, and service stack, replays the workload, and
reduces post-warmup traffic to per-flow PDR/PLR/delay/jitter. Sweeps vary
the (call count, background load) grid and aggregate across seeds with
Student-t 95% confidence intervals, matching how field-trial graphs are
usually reported.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from dataclasses import dataclass, field

from scipy import stats as _scipy_stats

from .engine import Engine, EngineStats, Medium
from .errors import IoError, TooFewSamples
from .routing import Router, wire_network
from .scenario import Scenario
from .services import Client, MeshTransport, Server, ServiceStack

MEASURED_KINDS = ("voice",)


def compute_jitter(transit_times) -> float:
    """Smoothed interarrival jitter: J += (|D| - J)/16 over transit diffs."""
    if len(transit_times) < 2:
        raise TooFewSamples(f"need >= 2 arrivals, got {len(transit_times)}")
    j = 0.0
    prev = transit_times[0]
    for t in transit_times[1:]:
        d = abs(t - prev)
        j += (d - j) / 16.0
        prev = t
    return j


def confidence_interval(samples, level: float = 0.95):
    """Student-t (mean, half_width) for a small sample."""
    n = len(samples)
    if n < 2:
        raise TooFewSamples(f"need >= 2 samples, got {n}")
    mean = sum(samples) / n
    var = sum((x - mean) ** 2 for x in samples) / (n - 1)
    t = _scipy_stats.t.ppf((1.0 + level) / 2.0, n - 1)
    return mean, t * math.sqrt(var / n)


@dataclass
class MetricsReport:
    """Everything measured in one run."""

    flows: list
    admission_log: list
    route_changes: int
    engine_stats: EngineStats
    seed: int = 0

    def flow_rows(self):
        rows = []
        for f in self.flows:
            rows.append({"flow_id": f.flow_id, "kind": f.kind, "src": f.src,
                         "dst": f.dst, "sent": f.sent, "delivered": f.delivered,
                         "pdr": f.pdr, "mean_delay_s": f.mean_delay,
                         "jitter_s": f.jitter})
        return rows

    def aggregate(self, kinds=MEASURED_KINDS):
        """Per-run scalars: mean over measured flows that carried traffic."""
        vals = {"pdr": [], "plr": [], "delay": [], "jitter": []}
        for f in self.flows:
            if f.kind not in kinds or f.sent == 0:
                continue
            vals["pdr"].append(f.pdr)
            vals["plr"].append(f.plr)
            if f.delivered:
                vals["delay"].append(f.mean_delay)
                vals["jitter"].append(f.jitter)
        return {k: (sum(v) / len(v) if v else float("nan")) for k, v in vals.items()}


class Simulation:
    """One scenario replica, fully isolated; safe to run many in parallel."""

    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.engine = Engine(seed)
        self.topo = scenario.topology
        self.medium = Medium(self.topo, self.engine, scenario.mac)
        servers = self.topo.server_nodes()
        if not servers:
            raise ValueError("scenario topology declares no server node")
        self.routers = {}
        node_ids = sorted(self.topo.nodes)
        for i, nid in enumerate(node_ids):
            r = Router(nid, self.topo, self.engine, self.medium,
                       scenario.routing, scenario.elp,
                       is_server=self.topo.nodes[nid].is_server)
            self.routers[nid] = r
        wire_network(self.routers, self.medium)
        phase_step = scenario.routing.hello_interval / max(len(node_ids), 1)
        for i, nid in enumerate(node_ids):
            self.routers[nid].start(phase=i * phase_step)
        self.transport = MeshTransport(self.engine, self.topo, self.medium,
                                       self.routers, scenario.header_bits)
        self.ledger = scenario.make_ledger()
        self.server = Server(self.transport, servers[0], scenario.services,
                             ledger=self.ledger)
        self.stack = ServiceStack(self.transport, self.server, self.topo,
                                  self.ledger, scenario.services,
                                  medium=self.medium, warmup=scenario.warmup)
        self.clients = {}
        for cd in scenario.clients:
            self.clients[cd.id] = Client(cd.id, cd.attach, self.transport,
                                         self.server, scenario.services,
                                         position=cd.position,
                                         video_answer=cd.video_answer)
        self._schedule_bringup()
        self._schedule_calls()
        self._schedule_actions()

    # -- workload ----------------------------------------------------------

    def _schedule_bringup(self):
        def bringup():
            self.server.start_presence_timer()
            for cid in sorted(self.clients):
                self.clients[cid].register(mode="open")
                self.clients[cid].start_beacons()
        self.engine.schedule(0.2, bringup, kind="workload")

    def _pick_pair(self, rng, client_ids):
        src = rng.choice(client_ids)
        for _ in range(8):
            dst = rng.choice(client_ids)
            if dst != src and (self.clients[dst].attach_node
                               != self.clients[src].attach_node):
                return src, dst
        dst = rng.choice([c for c in client_ids if c != src] or client_ids)
        return src, dst

    def _schedule_calls(self):
        tpl = self.scenario.calls
        if tpl.count <= 0 and tpl.background <= 0:
            return
        rng = self.engine.rng("workload")
        client_ids = sorted(self.clients)
        if len(client_ids) < 2:
            return
        start = self.scenario.warmup if tpl.start is None else tpl.start

        def place(i, background):
            src, dst = self._pick_pair(rng, client_ids)
            t = start + i * tpl.stagger

            def go():
                try:
                    self.stack.start_call(src, dst, tpl.duration,
                                          tpl.codec_rate, background=background)
                except Exception:
                    pass          # offline endpoints: call never happens
            self.engine.schedule(t, go, kind="workload")

        for i in range(tpl.count):
            place(i, background=False)
        for i in range(tpl.background):
            place(tpl.count + i, background=True)

    def _schedule_actions(self):
        for action in self.scenario.actions:
            self.engine.schedule(float(action["at"]),
                                 lambda a=action: self._run_action(a),
                                 kind="workload")

    def _run_action(self, a):
        kind = a["kind"]
        if kind == "sms":
            self.clients[a["src"]].send_sms(a["dst"], a.get("size"))
        elif kind == "file":
            self.clients[a["src"]].send_file(a["dst"], a["size"], a["chunk_size"])
        elif kind == "call":
            self.stack.start_call(a["src"], a["dst"],
                                  a.get("duration", self.scenario.calls.duration))
        elif kind == "broadcast_audio":
            self.stack.broadcast_audio(a["duration"])
        elif kind == "video_request":
            if "response" in a and a["dst"] in self.clients:
                self.clients[a["dst"]].video_answer = a["response"]
            self.stack.request_video(a["src"], a["dst"],
                                     a.get("duration", 30.0))
        elif kind == "attach":
            self.clients[a["client"]].attach(a["node"])
        elif kind == "outage":
            self._outage(a["a"], a["b"], a.get("duration", 5.0))

    def _outage(self, node_a, node_b, duration):
        affected = [l for l in self.topo.links
                    if {l.src, l.dst} == {node_a, node_b}]
        saved = [(l, l.p_deliver_fwd, l.p_deliver_rev) for l in affected]
        for l in affected:
            l.p_deliver_fwd = 0.0
            l.p_deliver_rev = 0.0

        def restore():
            for l, pf, pr in saved:
                l.p_deliver_fwd = pf
                l.p_deliver_rev = pr
        self.engine.schedule_in(duration, restore, kind="workload")

    # -- execution -----------------------------------------------------------

    def run(self) -> MetricsReport:
        self.engine.run_until(self.scenario.duration)
        route_changes = 0
        for nid in sorted(self.routers):
            route_changes += sum(1 for (t, kind, _info) in self.routers[nid].events
                                 if kind == "route_switch" and t >= self.scenario.warmup)
        return MetricsReport(self.stack.flows, list(self.ledger.log),
                             route_changes, self.engine.stats, self.seed)

    def routing_table_dump(self) -> str:
        """Structured text dump: one block per node, columns as documented."""
        lines = []
        for nid in sorted(self.routers):
            lines.append(f"# node {nid} t={self.engine.now:.3f}")
            lines.append("dest next_hop cost hops path")
            for dest, nh, cost, hops, path in self.routers[nid].table_rows():
                lines.append(f"{dest} {nh} {cost:.6g} {hops} {path}")
        return "\n".join(lines) + "\n"


def run_scenario(scenario: Scenario, seed: int) -> MetricsReport:
    return Simulation(scenario, seed).run()


@dataclass
class ExperimentResult:
    """Aggregated sweep output plus per-flow detail rows."""

    # (calls, bg) -> metric -> (mean, ci95_half, n_seeds)
    cells: dict = field(default_factory=dict)
    flow_details: list = field(default_factory=list)


def _aggregate_cell(reports) -> dict:
    per_metric = {"pdr": [], "plr": [], "delay": [], "jitter": []}
    for rep in reports:
        agg = rep.aggregate()
        for k, v in agg.items():
            if not math.isnan(v):
                per_metric[k].append(v)
    out = {}
    for k, samples in per_metric.items():
        if len(samples) >= 2:
            mean, half = confidence_interval(samples)
        elif samples:
            mean, half = samples[0], 0.0
        else:
            mean, half = float("nan"), float("nan")
        out[k] = (mean, half, len(samples))
    return out


def _with_cell(scenario: Scenario, calls: int, bg: int) -> Scenario:
    tpl = dataclasses.replace(scenario.calls, count=calls, background=bg)
    return dataclasses.replace(scenario, calls=tpl)


def sweep(scenario: Scenario, calls_grid, bg_grid, seeds,
          keep_flow_details: bool = False) -> ExperimentResult:
    """Run the (call count x background load) grid; cells are independent."""
    result = ExperimentResult()
    for calls in calls_grid:
        for bg in bg_grid:
            cell_scn = _with_cell(scenario, calls, bg)
            reports = [run_scenario(cell_scn, seed) for seed in seeds]
            result.cells[(calls, bg)] = _aggregate_cell(reports)
            if keep_flow_details:
                for rep in reports:
                    for row in rep.flow_rows():
                        row = dict(row, cell_calls=calls, cell_bg_load=bg,
                                   seed=rep.seed)
                        result.flow_details.append(row)
    return result


def single_run_result(scenario: Scenario, seeds) -> ExperimentResult:
    """Wrap plain runs of one scenario as a one-cell experiment."""
    result = ExperimentResult()
    cell = (scenario.calls.count, scenario.calls.background)
    reports = [run_scenario(scenario, seed) for seed in seeds]
    result.cells[cell] = _aggregate_cell(reports)
    for rep in reports:
        for row in rep.flow_rows():
            row = dict(row, cell_calls=cell[0], cell_bg_load=cell[1],
                       seed=rep.seed)
            result.flow_details.append(row)
    return result


def count_trend_violations(result: ExperimentResult, calls: int, bg_grid,
                           metric: str = "pdr") -> int:
    """Inversions of the expected non-increasing trend along one sweep row.

    An increase only counts as a violation when the two cells' confidence
    intervals do not overlap.
    """
    violations = 0
    prev = None
    for bg in bg_grid:
        mean, half, _n = result.cells[(calls, bg)][metric]
        if prev is not None:
            pmean, phalf = prev
            if mean > pmean and (mean - half) > (pmean + phalf):
                violations += 1
        prev = (mean, half)
    return violations


_SUMMARY_COLUMNS = ["cell_calls", "cell_bg_load", "metric", "mean",
                    "ci95_half", "n_seeds"]
_FLOW_COLUMNS = ["flow_id", "kind", "src", "dst", "sent", "delivered", "pdr",
                 "mean_delay_s", "jitter_s"]


def _fmt(x):
    if isinstance(x, float):
        return repr(x)
    return str(x)


def export(result: ExperimentResult, fmt: str, path) -> list[str]:
    """Write the experiment result; returns the file paths written."""
    path = str(path)
    try:
        if fmt == "csv":
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(_SUMMARY_COLUMNS)
                for (calls, bg) in sorted(result.cells):
                    for metric in ("pdr", "plr", "delay", "jitter"):
                        mean, half, n = result.cells[(calls, bg)][metric]
                        w.writerow([calls, bg, metric, _fmt(mean), _fmt(half), n])
            flows_path = path + ".flows.csv" if not path.endswith(".csv") \
                else path[:-4] + ".flows.csv"
            with open(flows_path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(_FLOW_COLUMNS)
                for row in result.flow_details:
                    w.writerow([_fmt(row[c]) for c in _FLOW_COLUMNS])
            return [path, flows_path]
        if fmt == "json":
            doc = {
                "cells": {f"{c},{b}": result.cells[(c, b)]
                          for (c, b) in sorted(result.cells)},
                "flows": result.flow_details,
            }
            with open(path, "w") as fh:
                json.dump(doc, fh, sort_keys=True, indent=1, allow_nan=True)
                fh.write("\n")
            return [path]
    except OSError as e:
        raise IoError(f"{path}: {e}")
    raise ValueError(f"unknown export format {fmt!r}")
