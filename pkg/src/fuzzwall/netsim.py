"""Discrete-event simulation of the protected hybrid-cloud boundary.

Topology::

    clients --access link--> firewall --web link--> web server (public)
                                     \\--db link---> db server  (private)

Every link is a pair of independent store-and-forward FIFO directions.
Servers are single FIFO byte-rate queues. A job's service covers both the
request and the response it produces, so junk that gets through steals
server time from legitimate clients.
"""

from __future__ import annotations

import heapq
import math
import os
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

from fuzzwall.config import SimConfig, build_policy, node_ids
from fuzzwall.firewall import (
    FirewallPolicy,
    FlowStats,
    FuzzyFirewall,
    Kind,
    PacketRecord,
    Zone,
    decide,
)
from fuzzwall.metrics import SCENARIOS, AppRun, ComparisonReport, RunOutput, ScenarioResult, compare, summarize

__all__ = [
    "SimulationError",
    "Arrival",
    "EventQueue",
    "SimClock",
    "Link",
    "ServerState",
    "service_time",
    "stream",
    "generate_workload",
    "iter_generator",
    "run",
    "run_named",
    "run_comparison",
    "ROLE_CODES",
]

# Substream roles; (role, index) is the spawn key under the master seed.
ROLE_CODES = {"http": 1, "db": 2, "junk-web": 3, "junk-db": 4}

WEB_SERVER = "web-server"
DB_SERVER = "db-server"

# Event kinds, in no particular order
GENERATE, LINK_DELIVER, FIREWALL_INSPECT, SERVICE_COMPLETE, TICK = range(5)
EVENT_NAMES = ("GenerateRequest", "LinkDeliver", "FirewallInspect", "ServiceComplete", "MeasurementTick")

# Hops for LinkDeliver
FW_IN, FW_OUT, SERVER, CLIENT = range(4)


class SimulationError(RuntimeError):
    """A run-time invariant broke; the message names the offending event."""


def stream(seed: int, role: str, index: int) -> np.random.Generator:
    """Independent PCG64 substream for one traffic generator."""
    ss = np.random.SeedSequence(seed, spawn_key=(ROLE_CODES[role], index))
    return np.random.Generator(np.random.PCG64(ss))


@dataclass(frozen=True, slots=True)
class Arrival:
    time: float
    src: str
    zone: Zone
    kind: Kind
    size: int
    response_size: int  # 0 for junk


def _exponentials(rng: np.random.Generator, mean: float, block: int = 256) -> Iterator[float]:
    while True:
        yield from rng.exponential(mean, block).tolist()


def iter_generator(config: SimConfig, role: str, index: int, horizon: float | None = None) -> Iterator[Arrival]:
    """Arrivals of one generator in time order, up to ``horizon`` (default: duration)."""
    horizon = config.duration if horizon is None else horizon
    ids = node_ids(config)
    rng = stream(config.seed, role, index)
    if role in ("http", "db"):
        wl = config.http if role == "http" else config.db
        zone = Zone.PUBLIC_WEB if role == "http" else Zone.PRIVATE_DB
        kind = Kind.HTTP_REQUEST if role == "http" else Kind.DB_QUERY
        src = ids[role][index]
        gaps = _exponentials(rng, wl.mean_interarrival)
        extra_mean = wl.response_size - wl.response_min
        t = 0.0
        n = 0
        while wl.max_requests is None or n < wl.max_requests:
            t += next(gaps)
            if t >= horizon:
                return
            if wl.response_dist == "fixed" or extra_mean <= 0:
                rsize = int(round(wl.response_size))
            else:
                rsize = wl.response_min + int(round(rng.exponential(extra_mean)))
            n += 1
            yield Arrival(t, src, zone, kind, wl.request_size, max(1, rsize))
    else:
        rate = config.junk.web_rate if role == "junk-web" else config.junk.db_rate
        if rate <= 0:
            return
        zone = Zone.PUBLIC_WEB if role == "junk-web" else Zone.PRIVATE_DB
        src = ids["rogue"][index]
        t = 0.0
        for gap in _exponentials(rng, 1.0 / rate):
            t += gap
            if t >= horizon:
                return
            yield Arrival(t, src, zone, Kind.JUNK, config.junk.size, 0)


def _generators(config: SimConfig) -> list[tuple[str, int]]:
    gens = [("http", i) for i in range(config.http_clients)]
    gens += [("db", i) for i in range(config.db_clients)]
    for i in range(config.unauthorized_clients):
        gens += [("junk-web", i), ("junk-db", i)]
    return gens


def generate_workload(config: SimConfig, horizon: float | None = None) -> list[Arrival]:
    """Every arrival of every generator, merged in time order."""
    its = [iter_generator(config, role, i, horizon) for role, i in _generators(config)]
    return list(heapq.merge(*its, key=lambda a: a.time))


class SimClock:
    def __init__(self) -> None:
        self.now = 0.0

    def advance(self, t: float, what: str = "") -> None:
        if t < self.now:
            raise SimulationError(f"time went backwards at {what}: {t} < {self.now}")
        self.now = t


class EventQueue:
    """Min-heap of (time, sequence, kind, payload); ties break by insertion order."""

    def __init__(self) -> None:
        self._heap: list = []
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, time: float, kind: int, payload=None) -> None:
        heapq.heappush(self._heap, (time, self._seq, kind, payload))
        self._seq += 1

    def pop(self):
        return heapq.heappop(self._heap)

    def peek_time(self) -> float:
        return self._heap[0][0] if self._heap else math.inf


class Link:
    """One direction of a store-and-forward link."""

    __slots__ = ("capacity", "delay", "busy_until", "bytes")

    def __init__(self, capacity: float, delay: float) -> None:
        self.capacity = capacity
        self.delay = delay
        self.busy_until = 0.0
        self.bytes = 0

    def transmit(self, now: float, size: int) -> float:
        """Queue ``size`` bytes at ``now``; returns the arrival time at the far end."""
        start = now if now > self.busy_until else self.busy_until
        self.busy_until = start + size / self.capacity
        self.bytes += size
        return self.busy_until + self.delay


class ServerState:
    __slots__ = ("name", "rate", "queue", "busy", "busy_until", "busy_time")

    def __init__(self, name: str, rate: float) -> None:
        self.name = name
        self.rate = rate
        self.queue: deque = deque()
        self.busy = False
        self.busy_until = 0.0
        self.busy_time = 0.0


def service_time(rate: float, pkt: PacketRecord) -> float:
    if not rate > 0:
        raise ValueError(f"service rate must be positive, got {rate}")
    return pkt.size / rate


class _Request:
    __slots__ = ("app", "created", "response_size", "at_server", "served", "done")

    def __init__(self, app: str, created: float, response_size: int) -> None:
        self.app = app
        self.created = created
        self.response_size = response_size
        self.at_server = 0.0
        self.served = 0.0
        self.done = False


class _Packet:
    __slots__ = ("rec", "req", "allowed", "reason")

    def __init__(self, rec: PacketRecord, req: _Request | None) -> None:
        self.rec = rec
        self.req = req
        self.allowed = True
        self.reason = ""


class _Sim:
    def __init__(self, config: SimConfig, policy: FirewallPolicy) -> None:
        self.cfg = config
        self.policy = policy
        self.fuzzy = isinstance(policy, FuzzyFirewall)
        self.queue = EventQueue()
        self.clock = SimClock()
        self.nbins = max(1, math.ceil(config.duration / config.tick - 1e-12))
        self.bin = 0
        self.apps = {"http": AppRun.empty(self.nbins), "db": AppRun.empty(self.nbins)}
        self.access_up = Link(config.access.capacity, config.access.delay)
        self.access_down = Link(config.access.capacity, config.access.delay)
        self.up = {
            Zone.PUBLIC_WEB: Link(config.web_link.capacity, config.web_link.delay),
            Zone.PRIVATE_DB: Link(config.db_link.capacity, config.db_link.delay),
        }
        self.down = {
            Zone.PUBLIC_WEB: Link(config.web_link.capacity, config.web_link.delay),
            Zone.PRIVATE_DB: Link(config.db_link.capacity, config.db_link.delay),
        }
        self.servers = {
            Zone.PUBLIC_WEB: ServerState(WEB_SERVER, config.web_rate),
            Zone.PRIVATE_DB: ServerState(DB_SERVER, config.db_rate),
        }
        self.flows = FlowStats(config.firewall.half_life)
        self.inbound_seen: dict[tuple[str, str], int] = {}
        self.live: set[int] = set()
        self.next_id = 0
        self.generated = 0
        self.delivered = 0
        self.dropped = 0
        self.events = 0

    # --- helpers -------------------------------------------------------

    def _app(self, zone: Zone) -> AppRun:
        return self.apps["http" if zone is Zone.PUBLIC_WEB else "db"]

    def _new_packet(self, src, dst, zone, kind, size, req) -> _Packet:
        rec = PacketRecord(self.next_id, src, dst, zone, kind, size, self.clock.now)
        self.next_id += 1
        self.generated += 1
        self.live.add(rec.id)
        return _Packet(rec, req)

    def _retire(self, pkt: _Packet, dropped: bool) -> None:
        try:
            self.live.remove(pkt.rec.id)
        except KeyError:
            raise SimulationError(f"packet {pkt.rec.id} retired twice") from None
        if dropped:
            self.dropped += 1
        else:
            self.delivered += 1

    # --- event handlers ------------------------------------------------

    def on_generate(self, payload) -> None:
        gen, arrival = payload
        now = self.clock.now
        app = self._app(arrival.zone)
        dst = WEB_SERVER if arrival.zone is Zone.PUBLIC_WEB else DB_SERVER
        if arrival.kind is Kind.JUNK:
            req = None
            app.junk_sent += 1
        else:
            req = _Request("http" if arrival.zone is Zone.PUBLIC_WEB else "db", now, arrival.response_size)
            app.requests += 1
        pkt = self._new_packet(arrival.src, dst, arrival.zone, arrival.kind, arrival.size, req)
        self.queue.push(self.access_up.transmit(now, arrival.size), LINK_DELIVER, (FW_IN, pkt))
        nxt = next(gen, None)
        if nxt is not None:
            self.queue.push(nxt.time, GENERATE, (gen, nxt))

    def on_link_deliver(self, payload) -> None:
        hop, pkt = payload
        now = self.clock.now
        rec = pkt.rec
        if hop == FW_IN or hop == FW_OUT:
            features = (0.0, 0.0)
            probe = False
            if self.fuzzy:
                self.flows.observe(rec, now)
                if hop == FW_IN:
                    # The first packets of a conversation pass unscored so
                    # that a flow can show its reply rate at all.
                    conv = rec.conversation
                    seen = self.inbound_seen.get(conv, 0)
                    self.inbound_seen[conv] = seen + 1
                    probe = seen < self.cfg.firewall.probe_packets
                features = self.flows.extract_features(rec, self.cfg.firewall.rate_capacity)
            if probe:
                pkt.allowed = True
                latency = self.policy.latency
            else:
                d = decide(self.policy, features, rec)
                pkt.allowed = d.allowed
                pkt.reason = d.reason
                latency = d.added_latency
            self.queue.push(now + latency, FIREWALL_INSPECT, (hop, pkt))
        elif hop == SERVER:
            server = self.servers[rec.zone]
            app = self._app(rec.zone)
            app.series_recv[self.bin] += rec.size
            if pkt.req is not None:
                pkt.req.at_server = now
            server.queue.append(pkt)
            if not server.busy:
                self._start(server, now)
        elif hop == CLIENT:
            req = pkt.req
            app = self.apps[req.app]
            rt = now - req.created
            app.series_completions[self.bin] += 1
            app.series_response[self.bin] += rt
            app.send_time += req.at_server - req.created
            app.service_time += req.served - req.at_server
            app.receive_time += now - req.served
            req.done = True
            self._retire(pkt, dropped=False)
        else:
            raise SimulationError(f"LinkDeliver with unknown hop {hop}")

    def on_firewall(self, payload) -> None:
        hop, pkt = payload
        now = self.clock.now
        rec = pkt.rec
        app = self._app(rec.zone)
        if not pkt.allowed:
            reason = pkt.reason if rec.kind is not Kind.JUNK else f"junk-{pkt.reason}"
            app.drops[reason] = app.drops.get(reason, 0) + 1
            if pkt.req is not None:
                pkt.req.done = True
            self._retire(pkt, dropped=True)
            return
        app.firewall_bytes += rec.size
        if rec.kind is Kind.JUNK:
            app.junk_admitted += 1
        else:
            app.authorized_bytes += rec.size
        if hop == FW_IN:
            self.queue.push(self.up[rec.zone].transmit(now, rec.size), LINK_DELIVER, (SERVER, pkt))
        else:
            self.queue.push(self.access_down.transmit(now, rec.size), LINK_DELIVER, (CLIENT, pkt))

    def _start(self, server: ServerState, now: float) -> None:
        if not server.queue:
            server.busy = False
            return
        pkt = server.queue[0]
        size = pkt.rec.size + (pkt.req.response_size if pkt.req is not None else 0)
        end = now + size / server.rate
        horizon = self.cfg.duration
        server.busy_time += min(end, horizon) - min(now, horizon)
        server.busy = True
        server.busy_until = end
        self.queue.push(end, SERVICE_COMPLETE, server)

    def on_service(self, server: ServerState) -> None:
        now = self.clock.now
        pkt = server.queue.popleft()
        rec = pkt.rec
        self._retire(pkt, dropped=False)
        if pkt.req is not None:
            req = pkt.req
            req.served = now
            kind = Kind.HTTP_RESPONSE if rec.kind is Kind.HTTP_REQUEST else Kind.DB_RESPONSE
            resp = self._new_packet(rec.dst, rec.src, rec.zone, kind, req.response_size, req)
            self._app(rec.zone).series_sent[self.bin] += resp.rec.size
            self.queue.push(self.down[rec.zone].transmit(now, resp.rec.size), LINK_DELIVER, (FW_OUT, resp))
        self._start(server, now)
        if server.queue and server.busy_until < now:
            raise SimulationError(f"ServiceComplete at {now}: {server.name} queue non-empty but idle")

    def on_tick(self, _payload) -> None:
        self.bin += 1

    # --- main loop -----------------------------------------------------

    def run(self) -> RunOutput:
        cfg = self.cfg
        for role, i in _generators(cfg):
            gen = iter_generator(cfg, role, i)
            first = next(gen, None)
            if first is not None:
                self.queue.push(first.time, GENERATE, (gen, first))
        for k in range(1, self.nbins):
            self.queue.push(k * cfg.tick, TICK)

        handlers: tuple[Callable, ...] = (
            self.on_generate,
            self.on_link_deliver,
            self.on_firewall,
            self.on_service,
            self.on_tick,
        )
        horizon = cfg.duration
        q = self.queue
        while q and q.peek_time() < horizon:
            t, seq, kind, payload = q.pop()
            self.clock.advance(t, f"{EVENT_NAMES[kind]}#{seq}")
            try:
                handlers[kind](payload)
            except SimulationError as exc:
                raise SimulationError(f"{EVENT_NAMES[kind]}#{seq} at t={t}: {exc}") from None
            self.events += 1

        if len(self.live) != self.generated - self.delivered - self.dropped:
            raise SimulationError(
                f"conservation broken: generated={self.generated} delivered={self.delivered} "
                f"dropped={self.dropped} live={len(self.live)}"
            )

        for zone, server in self.servers.items():
            self._app(zone).busy_time = server.busy_time
        outstanding = {"http": 0, "db": 0}
        seen = set()
        for entry in q._heap:
            payload = entry[3]
            pkt = payload[1] if isinstance(payload, tuple) and len(payload) == 2 and isinstance(payload[1], _Packet) else None
            if pkt is not None and pkt.req is not None and id(pkt.req) not in seen:
                seen.add(id(pkt.req))
                outstanding[pkt.req.app] += 1
        for server in self.servers.values():
            for pkt in server.queue:
                if pkt.req is not None and id(pkt.req) not in seen:
                    seen.add(id(pkt.req))
                    outstanding[pkt.req.app] += 1
        for name, n in outstanding.items():
            self.apps[name].in_flight = n
        for name, app in self.apps.items():
            done = sum(app.series_completions) + sum(v for k, v in app.drops.items() if not k.startswith("junk-"))
            if done + app.in_flight != app.requests:
                raise SimulationError(
                    f"{name}: requests={app.requests} but completed+dropped={done} in_flight={app.in_flight}"
                )

        return RunOutput(
            policy=self.policy.name,
            config_key=cfg.fingerprint(),
            seed=cfg.seed,
            duration=cfg.duration,
            tick=cfg.tick,
            apps=self.apps,
            generated=self.generated,
            delivered=self.delivered,
            dropped=self.dropped,
            in_flight=len(self.live),
            events=self.events,
        )


def run(config: SimConfig, policy: FirewallPolicy | None = None) -> ScenarioResult:
    """Simulate ``config`` under ``policy`` (default: the config's own selection)."""
    if policy is None:
        policy = build_policy(config)
    if isinstance(policy, FuzzyFirewall):
        # Fresh memo per run keeps runs free of shared mutable state.
        policy = FuzzyFirewall(policy.rules, policy.thresholds, policy.latency, policy.inputs)
    return summarize(_Sim(config, policy).run())


def run_named(config: SimConfig, policy_name: str, seed: int | None = None) -> ScenarioResult:
    """Convenience for process pools: build the policy by name and run."""
    if seed is not None:
        config = config.with_seed(seed)
    return run(config.with_policy(policy_name), build_policy(config, policy_name))



def run_comparison(config: SimConfig, seeds: Sequence[int], jobs: int | None = None) -> ComparisonReport:
    """All three policies for every seed, then :func:`compare`.

    Runs share nothing, so they may go to a process pool; results are
    assembled by (policy, seed) and do not depend on completion order.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("at least one seed is required")
    tasks = [(p, s) for s in seeds for p in SCENARIOS]
    jobs = min(jobs or os.cpu_count() or 1, len(tasks))
    if jobs <= 1:
        results = {t: run_named(config, *t) for t in tasks}
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = {t: pool.submit(run_named, config, *t) for t in tasks}
            results = {t: f.result() for t, f in futures.items()}
    return compare(*[[results[(p, s)] for s in seeds] for p in SCENARIOS])
