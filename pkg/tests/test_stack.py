"""Call, broadcast, and video behavior of the service stack."""

import pytest

from meshsim.errors import CalleeOffline, DurationExceeded, SenderOffline
from meshsim.harness import Simulation
from meshsim.qos import Reject
from meshsim.scenario import Scenario
from meshsim.services import Client, Server, ServiceParams, ServiceStack

from conftest import FakeNet


def make_stack(n_clients=2, attach=0):
    net = FakeNet()
    params = ServiceParams()
    server = Server(net, 0, params)
    stack = ServiceStack(net, server, None, None, params)
    clients = []
    for i in range(n_clients):
        c = Client(f"c{i}", attach, net, server, params)
        c.register()
        clients.append(c)
    return net, server, stack, clients


def line_scenario(rate=12e6, count=0):
    return Scenario.from_dict({
        "topology": {"nodes": [
            {"id": i, "position": [i * 10.0, 0.0], "is_server": i == 0,
             "radios": [{"channel": 1, "nominal_rate": rate,
                         "tx_range": 40.0, "cs_range": 80.0}]}
            for i in range(3)],
            "link_overrides": [{"a": a, "b": b, "p": 1.0}
                               for a, b in ((0, 1), (1, 2), (0, 2))]},
        "workload": {
            "clients": [{"id": "c1", "attach": 1}, {"id": "c2", "attach": 2}],
            "calls": {"count": count, "duration": 5.0},
        },
        "run": {"duration": 20.0, "warmup": 10.0, "seeds": [1]},
    }, name="line3")


# -- calls ------------------------------------------------------------------

def test_call_admitted_on_idle_network_and_packets_flow():
    sim = Simulation(line_scenario(count=1), seed=1)
    report = sim.run()
    voice = [f for f in report.flows if f.kind == "voice"]
    assert len(voice) == 2                      # one record per direction
    for f in voice:
        assert f.sent > 100
        assert f.pdr > 0.9
    admits = [fid for (k, fid, _x) in report.admission_log if k == "admit"]
    assert set(admits) == {"call1/fwd", "call1/rev"}
    # reservations were torn down when the call ended
    assert sim.ledger.flows == {}


def test_call_rejected_when_domain_saturates():
    # 150 kb/s links: each voice direction wants 0.53 airtime of the one
    # domain, so the second direction cannot fit under the 0.85 ceiling
    sim = Simulation(line_scenario(rate=150e3), seed=1)
    sim.engine.run_until(12.0)
    decision = sim.stack.start_call("c1", "c2", 5.0)
    assert isinstance(decision, Reject)
    assert decision.needed > decision.residual
    assert sim.ledger.flows == {}               # partial reservation rolled back
    rejected = [f for f in sim.stack.flows if not f.admitted]
    assert len(rejected) == 1


def test_call_requires_online_endpoints():
    net, server, stack, clients = make_stack()
    server.sessions["c1"].status = "offline"
    with pytest.raises(CalleeOffline):
        stack.start_call("c0", "c1", 5.0)
    server.sessions["c0"].status = "offline"
    with pytest.raises(SenderOffline):
        stack.start_call("c0", "c1", 5.0)


def test_background_calls_bypass_admission():
    net, _server, stack, _clients = make_stack()
    handle = stack.start_call("c0", "c1", 2.0, background=True)
    net.run(5.0)
    assert handle.reserved == []
    assert all(f.kind == "background" for f in stack.flows)
    assert all(f.sent > 0 and f.delivered == f.sent for f in stack.flows)


# -- broadcast audio --------------------------------------------------------

def test_broadcast_no_online_clients_is_empty():
    net, server, stack, clients = make_stack(n_clients=2)
    for s in server.sessions.values():
        s.status = "offline"
    assert stack.broadcast_audio(10.0) == []


def test_broadcast_duration_cap():
    _net, _server, stack, _clients = make_stack()
    with pytest.raises(DurationExceeded):
        stack.broadcast_audio(121.0)
    stack.broadcast_audio(120.0)                # at the cap is fine


def test_broadcast_one_flow_per_online_client():
    net, server, stack, clients = make_stack(n_clients=3)
    server.sessions["c2"].status = "offline"
    records = stack.broadcast_audio(5.0)
    assert sorted(r.dst for r in records) == ["c0", "c1"]
    net.run(10.0)
    for r in records:
        assert r.sent > 0 and r.delivered == r.sent


# -- video requests ---------------------------------------------------------

def test_video_accept_starts_stream():
    net, _server, stack, clients = make_stack()
    req = stack.request_video("c0", "c1", duration=3.0)
    net.run(20.0)
    assert req.result == "accepted"
    vids = [f for f in stack.flows if f.kind == "video"]
    assert len(vids) == 1
    assert vids[0].sent > 0 and vids[0].delivered == vids[0].sent


def test_video_decline_creates_no_flow():
    net, _server, stack, clients = make_stack()
    clients[1].video_answer = "decline"
    req = stack.request_video("c0", "c1")
    net.run(20.0)
    assert req.result == "declined"
    assert [f for f in stack.flows if f.kind == "video"] == []


def test_video_no_answer_times_out():
    net, _server, stack, clients = make_stack()
    clients[1].video_answer = "none"
    req = stack.request_video("c0", "c1")
    net.run(9.9)
    assert req.result is None
    net.run(10.1)
    assert req.result == "timeout"
    assert [f for f in stack.flows if f.kind == "video"] == []
