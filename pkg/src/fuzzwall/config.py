"""Scenario configuration: schema, validation and policy construction.

Config files are JSON. Unknown keys are rejected so typos surface early;
every error names the offending key path.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from fuzzwall.firewall import (
    ConventionalFirewall,
    FirewallPolicy,
    FuzzyFirewall,
    NoFirewall,
    Zone,
    default_acl,
    default_thresholds,
)
from fuzzwall.rules import default_rules_path, load_rules

__all__ = [
    "ConfigError",
    "LinkSpec",
    "ClientWorkload",
    "JunkWorkload",
    "FirewallSpec",
    "SimConfig",
    "MAX_END_NODES",
    "RNG_NAME",
    "load_config",
    "default_config_path",
    "build_policy",
    "node_ids",
]

MAX_END_NODES = 150
RNG_NAME = "numpy-pcg64-seedsequence"
POLICIES = ("none", "conventional", "fuzzy")


class ConfigError(ValueError):
    pass


def _positive(path: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigError(f"{path}: expected a positive number, got {v!r}")
    return float(v)


def _non_negative(path: str, v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v < 0:
        raise ConfigError(f"{path}: expected a non-negative number, got {v!r}")
    return float(v)


def _count(path: str, v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ConfigError(f"{path}: expected a non-negative integer, got {v!r}")
    return v


def _size(path: str, v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v <= 0:
        raise ConfigError(f"{path}: expected a positive integer byte count, got {v!r}")
    return v


@dataclass(frozen=True)
class LinkSpec:
    capacity: float  # bytes/s
    delay: float  # propagation, s

    def __post_init__(self) -> None:
        _positive("capacity", self.capacity)
        _non_negative("delay", self.delay)


@dataclass(frozen=True)
class ClientWorkload:
    mean_interarrival: float
    request_size: int
    response_size: float  # mean bytes
    response_min: int = 1
    response_dist: str = "exponential"  # or "fixed"
    max_requests: int | None = None

    def __post_init__(self) -> None:
        _positive("mean_interarrival", self.mean_interarrival)
        _size("request_size", self.request_size)
        _positive("response_size", self.response_size)
        _size("response_min", self.response_min)
        if self.response_min > self.response_size:
            raise ConfigError("response_min must not exceed response_size")
        if self.response_dist not in ("exponential", "fixed"):
            raise ConfigError(f"response_dist: expected 'exponential' or 'fixed', got {self.response_dist!r}")
        if self.max_requests is not None:
            _count("max_requests", self.max_requests)


@dataclass(frozen=True)
class JunkWorkload:
    web_rate: float = 0.0  # packets/s per unauthorized client
    db_rate: float = 0.0
    size: int = 1000

    def __post_init__(self) -> None:
        _non_negative("web_rate", self.web_rate)
        _non_negative("db_rate", self.db_rate)
        _size("size", self.size)


@dataclass(frozen=True)
class FirewallSpec:
    policy: str = "fuzzy"
    rules: str | None = None  # path; None selects the bundled rule file
    thresholds: dict[str, float] = field(default_factory=lambda: {str(z): t for z, t in default_thresholds().items()})
    conventional_latency: float = 0.0005
    fuzzy_latency: float = 0.0006
    half_life: float = 1.0
    rate_capacity: float = 250.0
    probe_packets: int = 1
    unlisted_attackers: int = 0
    unlisted_db_clients: int = 0

    def __post_init__(self) -> None:
        if self.policy not in POLICIES:
            raise ConfigError(f"firewall.policy: expected one of {POLICIES}, got {self.policy!r}")
        for zone, t in self.thresholds.items():
            try:
                Zone(zone)
            except ValueError:
                raise ConfigError(f"firewall.thresholds: unknown zone {zone!r}") from None
            if isinstance(t, bool) or not isinstance(t, (int, float)) or not 0 <= t <= 1:
                raise ConfigError(f"firewall.thresholds.{zone}: expected a number in [0, 1], got {t!r}")
        _non_negative("firewall.conventional_latency", self.conventional_latency)
        _non_negative("firewall.fuzzy_latency", self.fuzzy_latency)
        _positive("firewall.half_life", self.half_life)
        _positive("firewall.rate_capacity", self.rate_capacity)
        _count("firewall.probe_packets", self.probe_packets)
        _count("firewall.unlisted_attackers", self.unlisted_attackers)
        _count("firewall.unlisted_db_clients", self.unlisted_db_clients)


@dataclass(frozen=True)
class SimConfig:
    duration: float
    seed: int
    http_clients: int
    db_clients: int
    unauthorized_clients: int
    access: LinkSpec
    web_link: LinkSpec
    db_link: LinkSpec
    web_rate: float  # server service rate, bytes/s
    db_rate: float
    http: ClientWorkload
    db: ClientWorkload
    junk: JunkWorkload = JunkWorkload()
    firewall: FirewallSpec = FirewallSpec()
    tick: float = 1.0
    rng: str = RNG_NAME
    seeds: tuple[int, ...] = ()  # declared seeds for multi-seed comparisons

    def __post_init__(self) -> None:
        _positive("duration", self.duration)
        _positive("tick", self.tick)
        object.__setattr__(self, "seeds", tuple(self.seeds))
        for path, s in [("seed", self.seed)] + [(f"seeds[{i}]", s) for i, s in enumerate(self.seeds)]:
            if isinstance(s, bool) or not isinstance(s, int) or not 0 <= s < 2**64:
                raise ConfigError(f"{path}: expected an integer in [0, 2^64), got {s!r}")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds: duplicate entries")
        for name in ("http_clients", "db_clients", "unauthorized_clients"):
            _count(f"nodes.{name}", getattr(self, name))
        total = self.http_clients + self.db_clients + self.unauthorized_clients
        if total > MAX_END_NODES:
            raise ConfigError(f"nodes: {total} end nodes exceeds the limit of {MAX_END_NODES}")
        _positive("servers.web_rate", self.web_rate)
        _positive("servers.db_rate", self.db_rate)
        if self.rng != RNG_NAME:
            raise ConfigError(f"rng: only {RNG_NAME!r} is supported, got {self.rng!r}")
        if self.firewall.unlisted_attackers > self.unauthorized_clients:
            raise ConfigError("firewall.unlisted_attackers exceeds nodes.unauthorized_clients")
        if self.firewall.unlisted_db_clients > self.db_clients:
            raise ConfigError("firewall.unlisted_db_clients exceeds nodes.db_clients")

    @property
    def end_nodes(self) -> int:
        return self.http_clients + self.db_clients + self.unauthorized_clients

    def with_policy(self, policy: str) -> "SimConfig":
        return dataclasses.replace(self, firewall=dataclasses.replace(self.firewall, policy=policy))

    def with_seed(self, seed: int) -> "SimConfig":
        return dataclasses.replace(self, seed=seed)

    def to_dict(self) -> dict:
        fw = dataclasses.asdict(self.firewall)
        return {
            "rng": self.rng,
            "duration": self.duration,
            "tick": self.tick,
            "seed": self.seed,
            "seeds": list(self.seeds),
            "nodes": {
                "http_clients": self.http_clients,
                "db_clients": self.db_clients,
                "unauthorized_clients": self.unauthorized_clients,
            },
            "links": {
                "access": dataclasses.asdict(self.access),
                "web": dataclasses.asdict(self.web_link),
                "db": dataclasses.asdict(self.db_link),
            },
            "servers": {"web_rate": self.web_rate, "db_rate": self.db_rate},
            "workload": {
                "http": dataclasses.asdict(self.http),
                "db": dataclasses.asdict(self.db),
                "junk": dataclasses.asdict(self.junk),
            },
            "firewall": fw,
        }

    def fingerprint(self) -> str:
        """Digest of everything except the seed and the policy selection."""
        d = self.to_dict()
        d.pop("seed")
        d.pop("seeds")
        d["firewall"].pop("policy")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path | None = None) -> "SimConfig":
        try:
            return _from_dict(data, Path(base_dir) if base_dir else None)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None


def _take(d: Any, path: str, allowed: set[str], required: set[str] = frozenset()) -> dict:
    if not isinstance(d, dict):
        raise ConfigError(f"{path or 'config'}: expected an object")
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(d)
    if missing:
        raise ConfigError(f"{path or 'config'}: missing key(s) {sorted(missing)}")
    return d


def _build(kind, d: Any, path: str, required: set[str] = frozenset()):
    names = {f.name for f in dataclasses.fields(kind)}
    d = _take(d, path, names, required)
    try:
        return kind(**d)
    except ConfigError as exc:
        raise ConfigError(f"{path}.{exc}" if not str(exc).startswith(path) else str(exc)) from None


def _seed_list(v: Any) -> tuple:
    if not isinstance(v, list):
        raise ConfigError("seeds: expected a list of integers")
    return tuple(v)


def _from_dict(data: dict, base_dir: Path | None) -> SimConfig:
    top = _take(
        data,
        "",
        {"rng", "duration", "tick", "seed", "seeds", "nodes", "links", "servers", "workload", "firewall", "comment"},
        {"duration", "seed", "nodes", "links", "servers", "workload"},
    )
    nodes = _take(top["nodes"], "nodes", {"http_clients", "db_clients", "unauthorized_clients"})
    links = _take(top["links"], "links", {"access", "web", "db"}, {"access", "web", "db"})
    servers = _take(top["servers"], "servers", {"web_rate", "db_rate"}, {"web_rate", "db_rate"})
    work = _take(top["workload"], "workload", {"http", "db", "junk"}, {"http", "db"})
    fw_raw = dict(top.get("firewall", {}))
    fw = _build(FirewallSpec, fw_raw, "firewall")
    if fw.rules is not None:
        rules_path = Path(fw.rules)
        if not rules_path.is_absolute() and base_dir is not None and (base_dir / rules_path).exists():
            rules_path = base_dir / rules_path
        elif not rules_path.exists() and rules_path.name == default_rules_path().name:
            rules_path = default_rules_path()
        fw = dataclasses.replace(fw, rules=str(rules_path))
    return SimConfig(
        duration=top["duration"],
        seed=top["seed"],
        seeds=_seed_list(top.get("seeds", [])),
        tick=top.get("tick", 1.0),
        rng=top.get("rng", RNG_NAME),
        http_clients=nodes.get("http_clients", 0),
        db_clients=nodes.get("db_clients", 0),
        unauthorized_clients=nodes.get("unauthorized_clients", 0),
        access=_build(LinkSpec, links["access"], "links.access", {"capacity", "delay"}),
        web_link=_build(LinkSpec, links["web"], "links.web", {"capacity", "delay"}),
        db_link=_build(LinkSpec, links["db"], "links.db", {"capacity", "delay"}),
        web_rate=servers["web_rate"],
        db_rate=servers["db_rate"],
        http=_build(ClientWorkload, work["http"], "workload.http", {"mean_interarrival", "request_size", "response_size"}),
        db=_build(ClientWorkload, work["db"], "workload.db", {"mean_interarrival", "request_size", "response_size"}),
        junk=_build(JunkWorkload, work.get("junk", {}), "workload.junk"),
        firewall=fw,
    )


def load_config(path: str | Path) -> SimConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return SimConfig.from_dict(data, base_dir=path.parent)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def default_config_path() -> Path:
    return Path(__file__).with_name("data") / "default_scenario.json"


def node_ids(config: SimConfig) -> dict[str, list[str]]:
    return {
        "http": [f"http-{i:03d}" for i in range(config.http_clients)],
        "db": [f"db-{i:03d}" for i in range(config.db_clients)],
        "rogue": [f"rogue-{i:03d}" for i in range(config.unauthorized_clients)],
    }


def build_policy(config: SimConfig, name: str | None = None) -> FirewallPolicy:
    """Policy object for ``name`` (default: the config's own selection).

    The conventional ACL is built from what an administrator would have
    listed: all attackers except the last ``unlisted_attackers``, and all
    database clients except the last ``unlisted_db_clients``.
    """
    fw = config.firewall
    name = name or fw.policy
    if name == "none":
        return NoFirewall()
    if name == "conventional":
        ids = node_ids(config)
        rogues = ids["rogue"][: len(ids["rogue"]) - fw.unlisted_attackers]
        db = ids["db"][: len(ids["db"]) - fw.unlisted_db_clients]
        return ConventionalFirewall(default_acl(rogues, db), latency=fw.conventional_latency)
    if name == "fuzzy":
        rb = load_rules(fw.rules or default_rules_path())
        thresholds = {Zone(z): t for z, t in fw.thresholds.items()}
        return FuzzyFirewall(rb, thresholds, latency=fw.fuzzy_latency)
    raise ConfigError(f"unknown policy {name!r}")
