"""Disaster-communication application layer over the simulated mesh.

Server-relayed messaging (SMS and chunked file transfer) with bounded
ACK/retry, store-and-forward queues for offline recipients, presence with
expiry, admission-controlled calls, broadcast audio, and a confirm-first
video request handshake. All state machines are driven by a transport
object exposing now()/schedule()/send(); production uses MeshTransport,
tests can substitute a scripted fake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import (AuthError, CalleeOffline, DurationExceeded, NoRoute,
                     ReceiverUnknown, SenderOffline, UnknownSession)
from .qos import Admit, FlowSpec, Reject


@dataclass
class ServiceParams:
    ack_timeout: float = 2.0
    presence_timeout: float = 15.0
    beacon_interval: float = 5.0
    max_transmissions: int = 4        # 1 send + 3 resends per message leg
    sms_bits: int = 1600              # 200-byte text payload
    ack_bits: int = 512
    beacon_bits: int = 512
    control_bits: int = 512
    voice_rate: float = 64000.0       # bits/s per direction
    voice_packet_bits: int = 1280     # 160-byte payload at 50 pkt/s
    video_rate: float = 500000.0
    video_packet_bits: int = 8000
    video_answer_timeout: float = 10.0
    video_answer_delay: float = 0.5
    broadcast_limit: float = 120.0    # seconds of recorded audio
    broadcast_rate: float = 24000.0   # AMR-ish audio stream
    broadcast_packet_bits: int = 960


@dataclass
class ClientSession:
    client_id: str
    attach_node: int
    auth_mode: str = "open"           # open | secure | emergency
    last_seen: float = 0.0
    status: str = "online"            # online | offline
    position: tuple[float, float] = (0.0, 0.0)


@dataclass
class Message:
    msg_id: str
    kind: str                         # sms | file_chunk | beacon | control
    src: str
    final_dst: str
    relay: int                        # server node id
    payload_size: float
    attempt: int = 0


@dataclass
class DeliveryState:
    phase: str = "pending"            # pending | awaiting_ack | queued_offline
    retries_used: int = 0             #   | delivered | failed
    timer_expiry: float = 0.0
    history: list[str] = field(default_factory=list)

    def move(self, phase):
        self.phase = phase
        self.history.append(phase)


def dedupe(receiver_log: set, msg_id) -> str:
    """Exactly-once filter above the transport; duplicates are still ACKed."""
    if msg_id in receiver_log:
        return "duplicate"
    receiver_log.add(msg_id)
    return "fresh"


class AckRetrySender:
    """One stop-and-wait leg: data out, ACK back, bounded retransmissions."""

    def __init__(self, net, src_node, dst_node, bits, params: ServiceParams,
                 on_receive, on_success=None, on_fail=None):
        self.net = net
        self.src_node = src_node
        self.dst_node = dst_node
        self.bits = bits
        self.params = params
        self.on_receive = on_receive
        self.on_success = on_success
        self.on_fail = on_fail
        self.transmissions = 0
        self.done = False

    def start(self):
        self._attempt()
        return self

    def _attempt(self):
        self.transmissions += 1
        epoch = self.transmissions
        self.net.send(self.src_node, self.dst_node, self.bits, self._data_arrived)
        self.net.schedule(self.net.now() + self.params.ack_timeout,
                          lambda: self._timeout(epoch))

    def _data_arrived(self, t):
        self.on_receive(t)
        self.net.send(self.dst_node, self.src_node, self.params.ack_bits,
                      self._ack_arrived)

    def _ack_arrived(self, t):
        if self.done:
            return
        self.done = True
        if self.on_success is not None:
            self.on_success(t)

    def _timeout(self, epoch):
        if self.done or epoch != self.transmissions:
            return
        if self.transmissions >= self.params.max_transmissions:
            self.done = True
            if self.on_fail is not None:
                self.on_fail(self.net.now())
        else:
            self._attempt()


class MeshTransport:
    """Datagram forwarding over routing tables, one MAC frame per hop."""

    TTL = 32

    def __init__(self, engine, topo, medium, routers, header_bits: int = 320):
        self.engine = engine
        self.topo = topo
        self.medium = medium
        self.routers = routers
        self.header_bits = header_bits
        self.no_route_drops = 0

    def now(self):
        return self.engine.now

    def schedule(self, t, fn):
        self.engine.schedule(t, fn)

    def send(self, src_node, dst_node, bits, deliver=None):
        if src_node == dst_node:
            if deliver is not None:
                now = self.engine.now
                self.engine.schedule(now, lambda: deliver(now))
            return
        self._forward(src_node, dst_node, bits + self.header_bits,
                      deliver, self.TTL)

    def _forward(self, node, dst_node, frame_bits, deliver, ttl):
        if ttl <= 0:
            self.no_route_drops += 1
            return
        route = self.routers[node].route_to(dst_node)
        if route is None or route.link_idx < 0:
            self.no_route_drops += 1
            return
        if route.next_hop == dst_node and deliver is not None:
            self.medium.send_frame(route.link_idx, route.forward, frame_bits,
                                   on_delivered=deliver)
        else:
            self.medium.send_frame(
                route.link_idx, route.forward, frame_bits,
                on_delivered=lambda t, nh=route.next_hop: self._forward(
                    nh, dst_node, frame_bits, deliver, ttl - 1))


@dataclass
class FlowRecord:
    """Per-flow delivery accounting; packets before measure_from are ignored."""

    flow_id: str
    kind: str
    src: str
    dst: str
    sent: int = 0
    delivered: int = 0
    delay_sum: float = 0.0
    jitter: float = 0.0
    measure_from: float = 0.0
    _last_transit: float | None = None
    admitted: bool = True

    def on_send(self, t):
        if t >= self.measure_from:
            self.sent += 1

    def on_recv(self, t_sent, t_arrived):
        if t_sent < self.measure_from:
            return
        self.delivered += 1
        transit = t_arrived - t_sent
        self.delay_sum += transit
        if self._last_transit is not None:
            d = abs(transit - self._last_transit)
            self.jitter += (d - self.jitter) / 16.0
        self._last_transit = transit

    @property
    def pdr(self):
        return self.delivered / self.sent if self.sent else float("nan")

    @property
    def plr(self):
        return 1.0 - self.pdr if self.sent else float("nan")

    @property
    def mean_delay(self):
        return self.delay_sum / self.delivered if self.delivered else float("nan")


class FlowRunner:
    """CBR packet generator for one unidirectional flow."""

    def __init__(self, net, src_node, dst_node, packet_bits, interval,
                 t_end, record: FlowRecord):
        self.net = net
        self.src_node = src_node
        self.dst_node = dst_node
        self.packet_bits = packet_bits
        self.interval = interval
        self.t_end = t_end
        self.record = record
        self.stopped = False

    def start(self):
        self._tick()
        return self

    def stop(self):
        self.stopped = True

    def _tick(self):
        now = self.net.now()
        if self.stopped or now >= self.t_end:
            return
        self.record.on_send(now)
        self.net.send(self.src_node, self.dst_node, self.packet_bits,
                      lambda t, t0=now: self.record.on_recv(t0, t))
        self.net.schedule(now + self.interval, self._tick)


class Server:
    """Relay, registry, and store-and-forward core at the server node."""

    def __init__(self, net, node_id, params: ServiceParams,
                 users: dict[str, str] | None = None, ledger=None):
        self.net = net
        self.node_id = node_id
        self.params = params
        self.users = users or {}
        self.ledger = ledger
        self.sessions: dict[str, ClientSession] = {}
        self.clients: dict[str, "Client"] = {}
        self.offline_queue: dict[str, list[Message]] = {}
        self.deliveries: dict[str, DeliveryState] = {}
        self.uplink_log: set = set()

    # -- registration / presence -----------------------------------------

    def register(self, client_id, credentials, mode, attach_node, t,
                 position=(0.0, 0.0)) -> ClientSession:
        if mode == "secure":
            if self.users.get(client_id) != credentials:
                raise AuthError(f"bad credentials for {client_id!r}")
        elif mode not in ("open", "emergency"):
            raise ValueError(f"unknown auth mode {mode!r}")
        session = ClientSession(client_id, attach_node, mode, t, "online", position)
        self.sessions[client_id] = session
        self._flush_queue(client_id)
        return session

    def presence_update(self, client_id, position, t):
        session = self.sessions.get(client_id)
        if session is None:
            raise UnknownSession(client_id)
        was_offline = session.status == "offline"
        session.last_seen = t
        session.position = position
        session.status = "online"
        if was_offline:
            self._flush_queue(client_id)

    def expire_stale(self, t) -> list[str]:
        gone = []
        for cid, session in self.sessions.items():
            if (session.status == "online"
                    and t - session.last_seen > self.params.presence_timeout):
                session.status = "offline"
                gone.append(cid)
        return gone

    def is_online(self, client_id) -> bool:
        s = self.sessions.get(client_id)
        return s is not None and s.status == "online"

    def start_presence_timer(self, interval=1.0):
        def tick():
            self.expire_stale(self.net.now())
            self.net.schedule(self.net.now() + interval, tick)
        self.net.schedule(self.net.now() + interval, tick)

    # -- relayed messaging -------------------------------------------------

    def accept_uplink(self, msg: Message, t):
        """Called when a client message reaches the server (post-dedupe)."""
        if dedupe(self.uplink_log, msg.msg_id) == "duplicate":
            return
        self._dispatch(msg)

    def _dispatch(self, msg: Message):
        state = self.deliveries.setdefault(msg.msg_id, DeliveryState())
        if self.is_online(msg.final_dst):
            self._relay(msg, state)
        else:
            state.move("queued_offline")
            self.offline_queue.setdefault(msg.final_dst, []).append(msg)

    def _relay(self, msg: Message, state: DeliveryState):
        state.move("awaiting_ack")
        session = self.sessions[msg.final_dst]
        dst_client = self.clients.get(msg.final_dst)

        def on_receive(t):
            if dst_client is not None:
                dst_client.receive_message(msg, t)

        def on_success(t):
            state.retries_used = sender.transmissions - 1
            state.move("delivered")
            self._notify_sender(msg, "delivered")

        def on_fail(t):
            state.retries_used = sender.transmissions - 1
            if not self.is_online(msg.final_dst):
                state.move("queued_offline")
                self.offline_queue.setdefault(msg.final_dst, []).append(msg)
            else:
                state.move("failed")
                self._notify_sender(msg, "failed")

        state.timer_expiry = self.net.now() + self.params.ack_timeout
        sender = AckRetrySender(self.net, self.node_id, session.attach_node,
                                msg.payload_size, self.params,
                                on_receive, on_success, on_fail).start()

    def _notify_sender(self, msg: Message, outcome: str):
        src_client = self.clients.get(msg.src)
        if src_client is None:
            return
        session = self.sessions.get(msg.src)
        if session is None:
            return
        self.net.send(self.node_id, session.attach_node, self.params.control_bits,
                      lambda t: src_client.notify(msg.msg_id, outcome, t))

    def _flush_queue(self, client_id):
        queued = self.offline_queue.pop(client_id, [])
        for msg in queued:
            self._dispatch(msg)


class Client:
    """Client-side state machine bound to an access node."""

    def __init__(self, client_id, attach_node, net, server: Server,
                 params: ServiceParams, position=(0.0, 0.0),
                 video_answer: str = "accept"):
        self.client_id = client_id
        self.attach_node = attach_node
        self.net = net
        self.server = server
        self.params = params
        self.position = position
        self.video_answer = video_answer   # accept | decline | none
        self.inbox: list[Message] = []
        self.receiver_log: set = set()
        self.notifications: list[tuple[str, str, float]] = []
        self._msg_counter = 0
        server.clients[client_id] = self

    # -- session -----------------------------------------------------------

    def register(self, mode="open", credentials=None, t=None) -> ClientSession:
        t = self.net.now() if t is None else t
        return self.server.register(self.client_id, credentials, mode,
                                    self.attach_node, t, self.position)

    def start_beacons(self):
        def tick():
            if self.server.sessions.get(self.client_id) is not None:
                self.net.send(self.attach_node, self.server.node_id,
                              self.params.beacon_bits,
                              lambda t: self._beacon_arrived(t))
            self.net.schedule(self.net.now() + self.params.beacon_interval, tick)
        tick()

    def _beacon_arrived(self, t):
        try:
            self.server.presence_update(self.client_id, self.position, t)
        except UnknownSession:
            pass

    def attach(self, node_id):
        self.attach_node = node_id
        session = self.server.sessions.get(self.client_id)
        if session is not None:
            session.attach_node = node_id

    def _require_online(self):
        if not self.server.is_online(self.client_id):
            raise SenderOffline(self.client_id)

    def _next_id(self, kind):
        self._msg_counter += 1
        return f"{self.client_id}/{kind}/{self._msg_counter}"

    # -- messaging ----------------------------------------------------------

    def send_sms(self, dst_id, payload_bits=None, on_done=None) -> Message:
        self._require_online()
        msg = Message(self._next_id("sms"), "sms", self.client_id, dst_id,
                      self.server.node_id,
                      payload_bits or self.params.sms_bits)
        self._uplink(msg, on_done)
        return msg

    def _uplink(self, msg: Message, on_done=None):
        server = self.server

        def on_receive(t):
            server.accept_uplink(msg, t)

        def on_fail(t):
            state = server.deliveries.setdefault(msg.msg_id, DeliveryState())
            state.move("failed")
            if on_done is not None:
                on_done(False, t)

        def on_success(t):
            if on_done is not None:
                on_done(True, t)

        AckRetrySender(self.net, self.attach_node, server.node_id,
                       msg.payload_size, self.params,
                       on_receive, on_success, on_fail).start()

    def receive_message(self, msg: Message, t):
        if dedupe(self.receiver_log, msg.msg_id) == "fresh":
            self.inbox.append(msg)

    def notify(self, msg_id, outcome, t):
        self.notifications.append((msg_id, outcome, t))

    # -- file transfer -------------------------------------------------------

    def send_file(self, dst_id, size_bits, chunk_bits, on_done=None) -> "FileTransfer":
        self._require_online()
        if dst_id not in self.server.sessions:
            raise ReceiverUnknown(dst_id)
        if size_bits <= 0:
            raise ValueError("size must be > 0")
        return FileTransfer(self, dst_id, size_bits, chunk_bits, on_done).start()


class FileTransfer:
    """Stop-and-wait chunked transfer; one outstanding chunk, abort on loss."""

    def __init__(self, client: Client, dst_id, size_bits, chunk_bits, on_done=None):
        self.client = client
        self.dst_id = dst_id
        self.chunk_bits = chunk_bits
        self.n_chunks = math.ceil(size_bits / chunk_bits)
        self.next_chunk = 0
        self.delivered_chunks = 0
        self.status = "running"       # running | delivered | failed
        self.on_done = on_done
        self._transfer_id = client._next_id("file")

    def start(self):
        self._send_next()
        return self

    def _send_next(self):
        if self.next_chunk >= self.n_chunks:
            self.status = "delivered"
            if self.on_done is not None:
                self.on_done(True, self.client.net.now())
            return
        i = self.next_chunk
        self.next_chunk += 1
        server = self.client.server
        msg = Message(f"{self._transfer_id}/chunk{i}", "file_chunk",
                      self.client.client_id, self.dst_id, server.node_id,
                      self.chunk_bits)

        def watch(msg_id=msg.msg_id):
            state = server.deliveries.get(msg_id)
            if state is None:
                return
            if state.phase == "delivered":
                self.delivered_chunks += 1
                self._send_next()
            elif state.phase == "failed":
                self._fail()
            else:
                self.client.net.schedule(self.client.net.now() + 0.25, watch)

        def on_uplink(ok, t):
            if not ok:
                self._fail()
            else:
                watch()

        self.client._uplink(msg, on_uplink)

    def _fail(self):
        if self.status == "failed":
            return
        self.status = "failed"
        if self.on_done is not None:
            self.on_done(False, self.client.net.now())


class ServiceStack:
    """Coordinates calls, broadcasts, and video handshakes over the mesh."""

    def __init__(self, net, server: Server, topo, ledger, params: ServiceParams,
                 medium=None, warmup: float = 0.0):
        self.net = net
        self.server = server
        self.topo = topo
        self.ledger = ledger
        self.params = params
        self.medium = medium
        self.warmup = warmup
        self.flows: list[FlowRecord] = []
        self._call_counter = 0

    def _measured_busy(self, anchor_idx):
        if self.medium is None:
            return 0.0
        return self.medium.busy_fraction(anchor_idx)

    def _path_links(self, src_node, dst_node):
        if src_node == dst_node:
            return []
        routers = getattr(self.net, "routers", None)
        if routers is None:
            return []
        route = routers[src_node].route_to(dst_node)
        if route is None:
            raise NoRoute(f"{src_node}->{dst_node}")
        return [self.topo.link_between(a, b)
                for a, b in zip(route.path, route.path[1:])]

    def _flow_pair(self, call_id, src_node, dst_node, rate, packet_bits, kind):
        return (FlowSpec(f"{call_id}/fwd", src_node, dst_node, rate,
                         packet_bits, kind),
                FlowSpec(f"{call_id}/rev", dst_node, src_node, rate,
                         packet_bits, kind))

    def start_call(self, src_id, dst_id, duration, codec_rate=None,
                   background=False, t_start=None):
        """Bidirectional CBR call; admission-checked unless background."""
        p = self.params
        rate = codec_rate or p.voice_rate
        server = self.server
        if not server.is_online(src_id):
            raise SenderOffline(src_id)
        if not server.is_online(dst_id):
            raise CalleeOffline(dst_id)
        src_node = server.sessions[src_id].attach_node
        dst_node = server.sessions[dst_id].attach_node
        self._call_counter += 1
        call_id = f"call{self._call_counter}"
        kind = "background" if background else "voice"
        fwd, rev = self._flow_pair(call_id, src_node, dst_node, rate,
                                   p.voice_packet_bits, kind)
        reserved = []
        if not background and src_node != dst_node:
            for spec in (fwd, rev):
                path = self._path_links(spec.src, spec.dst)
                decision = self.ledger.admit(spec, path, self._measured_busy)
                if isinstance(decision, Reject):
                    for fid in reserved:
                        self.ledger.release(fid)
                    rec = FlowRecord(spec.id, kind, src_id, dst_id, admitted=False)
                    self.flows.append(rec)
                    return decision
                reserved.append(spec.id)
        return self._launch_pair(call_id, kind, src_id, dst_id, src_node,
                                 dst_node, rate, p.voice_packet_bits,
                                 duration, reserved, t_start)

    def _launch_pair(self, call_id, kind, src_id, dst_id, src_node, dst_node,
                     rate, packet_bits, duration, reserved, t_start=None):
        now = self.net.now() if t_start is None else t_start
        interval = packet_bits / rate
        t_end = now + duration
        runners = []
        for tag, a, b, ca, cb in (("fwd", src_node, dst_node, src_id, dst_id),
                                  ("rev", dst_node, src_node, dst_id, src_id)):
            rec = FlowRecord(f"{call_id}/{tag}", kind, ca, cb,
                             measure_from=self.warmup)
            self.flows.append(rec)
            runners.append(FlowRunner(self.net, a, b, packet_bits, interval,
                                      t_end, rec))
        handle = CallHandle(call_id, runners, self.ledger, reserved)
        self.net.schedule(now, handle.begin)
        self.net.schedule(t_end, handle.finish)
        return handle

    def broadcast_audio(self, duration, rate=None) -> list[FlowRecord]:
        """Unicast stream to every online client; exempt from admission."""
        p = self.params
        if duration > p.broadcast_limit:
            raise DurationExceeded(f"{duration}s > {p.broadcast_limit}s")
        rate = rate or p.broadcast_rate
        now = self.net.now()
        records = []
        for cid in sorted(self.server.sessions):
            if not self.server.is_online(cid):
                continue
            session = self.server.sessions[cid]
            rec = FlowRecord(f"bcast/{cid}", "broadcast", "server", cid,
                             measure_from=self.warmup)
            self.flows.append(rec)
            records.append(rec)
            FlowRunner(self.net, self.server.node_id, session.attach_node,
                       p.broadcast_packet_bits,
                       p.broadcast_packet_bits / rate,
                       now + duration, rec).start()
        return records

    def request_video(self, src_id, dst_id, duration=30.0) -> "VideoRequest":
        """Confirm-first video: stream only starts on the receiver's accept."""
        server = self.server
        if not server.is_online(src_id):
            raise SenderOffline(src_id)
        if not server.is_online(dst_id):
            raise CalleeOffline(dst_id)
        return VideoRequest(self, src_id, dst_id, duration).start()


class CallHandle:
    def __init__(self, call_id, runners, ledger, reserved):
        self.call_id = call_id
        self.runners = runners
        self.ledger = ledger
        self.reserved = reserved
        self.records = [r.record for r in runners]

    def begin(self):
        for r in self.runners:
            r.start()

    def finish(self):
        for r in self.runners:
            r.stop()
        for fid in self.reserved:
            if fid in self.ledger.flows:
                self.ledger.release(fid)
        self.reserved = []


class VideoRequest:
    def __init__(self, stack: ServiceStack, src_id, dst_id, duration):
        self.stack = stack
        self.src_id = src_id
        self.dst_id = dst_id
        self.duration = duration
        self.result = None            # accepted | declined | timeout
        self.handle = None

    def start(self):
        stack = self.stack
        net = stack.net
        p = stack.params
        server = stack.server
        src_node = server.sessions[self.src_id].attach_node
        dst_node = server.sessions[self.dst_id].attach_node
        dst_client = server.clients.get(self.dst_id)

        def answer(t):
            policy = dst_client.video_answer if dst_client else "none"
            if policy == "none":
                return
            net.schedule(t + p.video_answer_delay, lambda: net.send(
                dst_node, src_node, p.control_bits,
                lambda tt, pol=policy: self._answered(pol, tt)))

        net.send(src_node, dst_node, p.control_bits, answer)
        net.schedule(net.now() + p.video_answer_timeout, self._timeout)
        return self

    def _answered(self, policy, t):
        if self.result is not None:
            return
        if policy == "decline":
            self.result = "declined"
            return
        self.result = "accepted"
        stack = self.stack
        p = stack.params
        server = stack.server
        src_node = server.sessions[self.src_id].attach_node
        dst_node = server.sessions[self.dst_id].attach_node
        spec = FlowSpec(f"video/{self.src_id}/{self.dst_id}", src_node,
                        dst_node, p.video_rate, p.video_packet_bits, "video")
        reserved = []
        if src_node != dst_node:
            path = stack._path_links(src_node, dst_node)
            decision = stack.ledger.admit(spec, path, stack._measured_busy)
            if isinstance(decision, Reject):
                self.result = "rejected"
                return
            reserved.append(spec.id)
        rec = FlowRecord(spec.id, "video", self.src_id, self.dst_id,
                         measure_from=stack.warmup)
        stack.flows.append(rec)
        runner = FlowRunner(stack.net, src_node, dst_node, p.video_packet_bits,
                            p.video_packet_bits / p.video_rate,
                            stack.net.now() + self.duration, rec).start()
        self.handle = CallHandle(spec.id, [runner], stack.ledger, reserved)
        stack.net.schedule(stack.net.now() + self.duration, self.handle.finish)

    def _timeout(self):
        if self.result is None:
            self.result = "timeout"
