"""Acceptance gate: calibrated trend reproduction and property suites.

Each test prints one `[acceptance] criterion N ... PASS|FAIL` line. The
indoor/outdoor sweeps are computed once per session and shared.
"""

import itertools
import math
import time

import pytest

from meshsim import load_preset
from meshsim.engine import Engine, Medium, rng_stream
from meshsim.harness import (Simulation, count_trend_violations, export,
                             run_scenario, single_run_result, sweep)
from meshsim.qos import Admit, AdmissionLedger, FlowSpec
from meshsim.routing import compute_routes
from meshsim.scenario import Scenario
from meshsim.topology import build_topology

from conftest import make_nodes
from test_routing import brute_force_costs, random_graph
from test_services import ACK_LOST, DATA_LOST, OK, run_leg_pattern

CALLS_GRID = [1, 2, 10, 20]
BG_GRID = [2, 10, 20]
SEEDS = list(range(1, 11))


def _report(num, name, ok, detail=""):
    verdict = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {num} ({name}): {verdict} {detail}".rstrip())
    assert ok, f"criterion {num} ({name}): {detail}"


def _sweep_preset(name):
    t0 = time.time()
    result = sweep(load_preset(name), CALLS_GRID, BG_GRID, SEEDS)
    result.elapsed = time.time() - t0
    return result


@pytest.fixture(scope="module")
def indoor_sweep():
    return _sweep_preset("indoor22")


@pytest.fixture(scope="module")
def outdoor_sweep():
    return _sweep_preset("outdoor7")


def test_criterion_1_indoor_pdr_trend(indoor_sweep):
    worst = min(indoor_sweep.cells[c]["pdr"][0] for c in indoor_sweep.cells)
    ok = worst >= 0.90 and indoor_sweep.elapsed <= 300.0
    _report(1, "indoor PDR", ok,
            f"worst cell PDR {worst:.4f}, sweep {indoor_sweep.elapsed:.0f}s")


def test_criterion_2_indoor_delay(indoor_sweep):
    worst = max(indoor_sweep.cells[c]["delay"][0] for c in indoor_sweep.cells)
    at_2 = [indoor_sweep.cells[(2, bg)]["delay"][0] for bg in BG_GRID]
    at_20 = [indoor_sweep.cells[(20, bg)]["delay"][0] for bg in BG_GRID]
    mean_2 = sum(at_2) / len(at_2)
    mean_20 = sum(at_20) / len(at_20)
    ok = worst < 0.100 and mean_20 > mean_2
    _report(2, "indoor delay", ok,
            f"worst {worst * 1000:.2f} ms, "
            f"20 calls {mean_20 * 1000:.2f} ms vs 2 calls {mean_2 * 1000:.2f} ms")


def test_criterion_3_outdoor_degradation(indoor_sweep, outdoor_sweep):
    cells = list(indoor_sweep.cells)
    worse = 0
    for c in cells:
        ipdr = indoor_sweep.cells[c]["pdr"][0]
        opdr = outdoor_sweep.cells[c]["pdr"][0]
        idelay = indoor_sweep.cells[c]["delay"][0]
        odelay = outdoor_sweep.cells[c]["delay"][0]
        if opdr < ipdr and odelay > idelay:
            worse += 1
    trend_bad = sum(count_trend_violations(outdoor_sweep, calls, BG_GRID, "pdr")
                    for calls in CALLS_GRID)
    frac = worse / len(cells)
    ok = frac >= 0.80 and trend_bad == 0
    _report(3, "outdoor degradation", ok,
            f"strictly worse in {worse}/{len(cells)} cells, "
            f"{trend_bad} trend violations")


def test_criterion_4_retry_law():
    t0 = time.time()
    n = 100_000
    details = []
    ok = True
    for p in (0.3, 0.5, 0.8):
        nodes = make_nodes([(0, 0), (10, 0)])
        topo = build_topology(nodes, overrides={(0, 1): p})
        eng = Engine(int(p * 100))
        med = Medium(topo, eng)
        counts = {"delivered": 0, "notified": 0}
        med.on_tx_failure = (
            lambda src, dst, li, t: counts.__setitem__(
                "notified", counts["notified"] + 1))
        done = lambda t: counts.__setitem__("delivered", counts["delivered"] + 1)
        for i in range(n):
            eng.schedule(i * 0.1, lambda: med.send_frame(0, True, 100,
                                                         on_delivered=done))
        eng.run_until(n * 0.1 + 1.0)
        q = 1.0 - (1.0 - p) ** 8
        sigma = math.sqrt(q * (1 - q) / n)
        got = counts["delivered"] / n
        ok = ok and abs(got - q) <= 3 * sigma
        fail_rate = counts["notified"] / n
        fail_sigma = math.sqrt((1 - q) * q / n)
        ok = ok and abs(fail_rate - (1 - q)) <= 3 * fail_sigma
        details.append(f"p={p}: {got:.5f} vs {q:.5f}")
    elapsed = time.time() - t0
    ok = ok and elapsed <= 10.0
    _report(4, "retry law", ok, "; ".join(details) + f"; {elapsed:.1f}s")


def test_criterion_5_routing_oracle():
    t0 = time.time()
    rng = rng_stream(2024, "acceptance-routing")
    checked = 0
    ok = True
    for _ in range(200):
        n = rng.randint(2, 8)
        graph = random_graph(rng, n)
        tables = {src: compute_routes(graph, src) for src in graph}
        for src in graph:
            expected = brute_force_costs(graph, src)
            if set(tables[src]) != set(expected):
                ok = False
            for dest, route in tables[src].items():
                checked += 1
                if abs(route.path_cost - expected[dest]) > 1e-9:
                    ok = False
                node, hops = src, 0
                while node != dest and hops <= n:   # loop-freedom
                    node = tables[node][dest].next_hop
                    hops += 1
                if node != dest:
                    ok = False
    elapsed = time.time() - t0
    ok = ok and elapsed <= 30.0
    _report(5, "routing oracle", ok,
            f"{checked} routes on 200 graphs, {elapsed:.1f}s")


def _shortcut_scenario(metric):
    # lossy half-rate 1-hop shortcut vs clean full-rate 2-hop path; a single
    # MAC attempt per frame so route choice maps directly onto loss
    return Scenario.from_dict({
        "topology": {
            "nodes": [
                {"id": 0, "position": [0.0, 0.0], "is_server": True,
                 "radios": [
                     {"channel": 1, "nominal_rate": 6e6, "tx_range": 40.0,
                      "cs_range": 80.0},
                     {"channel": 2, "nominal_rate": 12e6, "tx_range": 40.0,
                      "cs_range": 80.0}]},
                {"id": 1, "position": [10.0, 0.0],
                 "radios": [{"channel": 2, "nominal_rate": 12e6,
                             "tx_range": 40.0, "cs_range": 80.0}]},
                {"id": 2, "position": [20.0, 0.0],
                 "radios": [
                     {"channel": 1, "nominal_rate": 6e6, "tx_range": 40.0,
                      "cs_range": 80.0},
                     {"channel": 2, "nominal_rate": 12e6, "tx_range": 40.0,
                      "cs_range": 80.0}]},
            ],
            "link_overrides": [{"a": 0, "b": 2, "channel": 1, "p": 0.5}],
            "link_deletions": [[0, 2, 2]],
        },
        "protocol": {
            "metric": metric,
            "engine": {"retry_limit": 1},
            "routing": {"long_term_threshold": 0.0, "suppress_duration": 0.0,
                        "max_suppressions": 10 ** 6, "strike_window": 1e9},
            "services": {"presence_timeout": 1000.0},
        },
        "workload": {
            "clients": [{"id": "cA", "attach": 0}, {"id": "cB", "attach": 2}],
            "calls": {"count": 1, "duration": 20.0},
        },
        "run": {"duration": 45.0, "warmup": 15.0, "seeds": SEEDS},
    }, name=f"shortcut-{metric}")


def _mean_pdr(scenario):
    vals = []
    for seed in SEEDS:
        agg = run_scenario(scenario, seed).aggregate()
        if not math.isnan(agg["pdr"]):
            vals.append(agg["pdr"])
    return sum(vals) / len(vals)


def test_criterion_6_elp_beats_hop_count():
    elp = _mean_pdr(_shortcut_scenario("elp"))
    hop = _mean_pdr(_shortcut_scenario("hop_count"))
    gap = elp - hop
    # analytic expectation: ~0.96 over the clean 2-hop path vs ~0.5 on the
    # single-attempt shortcut, diluted by occasional neighbor expiry
    _report(6, "ELP vs hop count", gap >= 0.10,
            f"ELP {elp:.3f}, hop count {hop:.3f}, gap {gap * 100:.1f} pp")


def _maintenance_scenario(maintenance):
    routing = {"maintenance": maintenance}
    return Scenario.from_dict({
        "topology": {
            "nodes": [
                {"id": 0, "position": [0.0, 0.0], "is_server": True,
                 "radios": [
                     {"channel": 1, "nominal_rate": 12e6, "tx_range": 40.0,
                      "cs_range": 80.0},
                     {"channel": 2, "nominal_rate": 6e6, "tx_range": 40.0,
                      "cs_range": 80.0}]},
                {"id": 1, "position": [15.0, 0.0],
                 "radios": [{"channel": 1, "nominal_rate": 12e6,
                             "tx_range": 40.0, "cs_range": 80.0}]},
                {"id": 2, "position": [15.0, 20.0],
                 "radios": [{"channel": 2, "nominal_rate": 6e6,
                             "tx_range": 40.0, "cs_range": 80.0}]},
                {"id": 3, "position": [30.0, 0.0],
                 "radios": [
                     {"channel": 1, "nominal_rate": 12e6, "tx_range": 40.0,
                      "cs_range": 80.0},
                     {"channel": 2, "nominal_rate": 6e6, "tx_range": 40.0,
                      "cs_range": 80.0}]},
            ],
            "link_deletions": [[0, 3]],
        },
        "protocol": {"routing": routing,
                     "services": {"presence_timeout": 1000.0}},
        "workload": {
            "clients": [{"id": "cA", "attach": 0}, {"id": "cB", "attach": 3}],
            "calls": {"count": 1, "duration": 25.0, "start": 16.0},
            "actions": [{"at": 25.0, "kind": "outage", "a": 0, "b": 1,
                         "duration": 5.0}],
        },
        "run": {"duration": 60.0, "warmup": 15.0, "seeds": [1]},
    }, name=f"maintenance-{maintenance}")


def _outage_floods(sim, t_lo=25.0, t_hi=33.0):
    floods = []
    for nid, router in sim.routers.items():
        for (t, kind, info) in router.events:
            if kind == "tc_flood" and t_lo <= t <= t_hi and info != "periodic":
                floods.append((nid, t, info))
    return floods


def test_criterion_7_maintenance_resilience():
    sim_on = Simulation(_maintenance_scenario(True), seed=1)
    sim_on.engine.run_until(24.0)
    assert sim_on.routers[0].route_to(3).path == (0, 1, 3)
    sim_on.run()
    floods_on = _outage_floods(sim_on)
    suppressed = [e for (t, k, e) in sim_on.routers[0].events
                  if k == "suppress" and 25.0 <= t <= 31.0]
    final_path = sim_on.routers[0].route_to(3).path
    ok_on = not floods_on and suppressed and final_path == (0, 1, 3)

    sim_off = Simulation(_maintenance_scenario(False), seed=1)
    report_off = sim_off.run()
    floods_off = _outage_floods(sim_off)
    switches = [e for (t, k, e) in sim_off.routers[0].events
                if k == "route_switch" and 25.0 <= t <= 33.0]
    ok_off = bool(floods_off) and bool(switches)

    _report(7, "maintenance resilience", bool(ok_on) and ok_off,
            f"on: {len(floods_on)} outage floods, final path {final_path}; "
            f"off: {len(floods_off)} floods, {len(switches)} switches")


def test_criterion_8_service_properties():
    ok = True
    # exhaustive stop-and-wait walk: every loss pattern over 4 transmissions
    walked = 0
    for pattern in itertools.product((OK, DATA_LOST, ACK_LOST), repeat=4):
        net, received, outcome = run_leg_pattern(pattern)
        first_ok = next((i for i, p in enumerate(pattern) if p == OK), None)
        expect_tx = (first_ok + 1) if first_ok is not None else 4
        ok = ok and outcome == [first_ok is not None]
        ok = ok and net.count(1, 2) == expect_tx <= 4
        walked += 1
    # ledger conservation over 10^4 random admit/release operations
    nodes = make_nodes([(i * 10, 0) for i in range(4)],
                       tx_range=15.0, cs_range=1000.0)
    topo = build_topology(nodes, overrides={(i, i + 1): 1.0 for i in range(3)})
    ledger = AdmissionLedger(topo)
    rng = rng_stream(77, "acceptance-ledger")
    live = []
    for i in range(10_000):
        if live and rng.random() < 0.45:
            ledger.release(live.pop(rng.randrange(len(live))))
        else:
            spec = FlowSpec(f"f{i}", 0, 3, rng.uniform(1e4, 3e5), 1280.0)
            links = topo.links[:rng.randint(1, 3)]
            if isinstance(ledger.admit(spec, links), Admit):
                live.append(spec.id)
        total = {}
        for inc in ledger.flows.values():
            for anchor, share in inc.items():
                total[anchor] = total.get(anchor, 0.0) + share
        ok = ok and ledger.committed == total
    for fid in live:
        ledger.release(fid)
    ok = ok and ledger.committed == {}
    _report(8, "service properties", ok,
            f"{walked} loss patterns, 10^4 ledger ops conserved")


def test_criterion_9_deterministic_exports(tmp_path):
    scn = load_preset("outdoor7")
    paths = {}
    for tag in ("a", "b"):
        result = single_run_result(scn, seeds=[3])
        paths[tag] = {
            "csv": export(result, "csv", tmp_path / f"{tag}.csv"),
            "json": export(result, "json", tmp_path / f"{tag}.json"),
        }
    same = all(
        open(pa, "rb").read() == open(pb, "rb").read()
        for fmt in ("csv", "json")
        for pa, pb in zip(paths["a"][fmt], paths["b"][fmt]))
    _report(9, "determinism", same, "byte-identical csv and json exports")
