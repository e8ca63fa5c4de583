"""Per-packet admission at the protected-domain boundary.

Three policies share one entry point, :func:`decide`:

* :class:`NoFirewall` passes everything at no cost.
* :class:`ConventionalFirewall` walks a first-match ACL with an implicit
  final deny.
* :class:`FuzzyFirewall` scores the packet's conversation with the fuzzy
  controller and admits it when the security level reaches the threshold
  of the packet's zone.

The fuzzy inputs come from :class:`FlowStats`, which keeps two EWMA byte
rates per conversation: what the initiator sends, and what comes back from
the responder.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import ClassVar, Iterable, Mapping, Union

from fuzzwall.fuzzy import RuleBase, SecurityBand, infer

__all__ = [
    "Zone",
    "Kind",
    "PacketRecord",
    "FlowRates",
    "FlowStats",
    "FlowOrderError",
    "FirewallConfigError",
    "AclAction",
    "AclRule",
    "Verdict",
    "Decision",
    "NoFirewall",
    "ConventionalFirewall",
    "FuzzyFirewall",
    "FirewallPolicy",
    "decide",
    "default_acl",
    "default_thresholds",
]


class Zone(str, enum.Enum):
    PUBLIC_WEB = "public-web"
    PRIVATE_DB = "private-db"

    def __str__(self) -> str:
        return self.value


class Kind(str, enum.Enum):
    HTTP_REQUEST = "HttpRequest"
    HTTP_RESPONSE = "HttpResponse"
    DB_QUERY = "DbQuery"
    DB_RESPONSE = "DbResponse"
    JUNK = "Junk"

    @property
    def is_response(self) -> bool:
        return self in (Kind.HTTP_RESPONSE, Kind.DB_RESPONSE)

    def __str__(self) -> str:
        return self.value


class FirewallConfigError(ValueError):
    pass


class FlowOrderError(RuntimeError):
    """Observations arrived out of time order; the caller's clock is broken."""


@dataclass(frozen=True, slots=True)
class PacketRecord:
    id: int
    src: str
    dst: str
    zone: Zone
    kind: Kind
    size: int
    created_at: float

    def __post_init__(self) -> None:
        if self.size <= 0:
            raise ValueError(f"packet {self.id}: size must be positive, got {self.size}")
        if self.src == self.dst:
            raise ValueError(f"packet {self.id}: src and dst are both {self.src!r}")

    @property
    def conversation(self) -> tuple[str, str]:
        """(initiator, responder); responses travel responder -> initiator."""
        if self.kind.is_response:
            return (self.dst, self.src)
        return (self.src, self.dst)


@dataclass
class FlowRates:
    send_rate: float = 0.0  # initiator -> responder, bytes/s
    recv_rate: float = 0.0  # responder -> initiator, bytes/s
    send_at: float | None = None
    recv_at: float | None = None
    packets: int = 0


class FlowStats:
    """EWMA byte rates per conversation.

    Each direction decays lazily, only when that direction sees a packet:
    ``rate <- rate * 2**(-dt/H) + size/H``. A rate therefore describes the
    flow as of its last packet in that direction.
    """

    def __init__(self, half_life: float = 1.0) -> None:
        if not (half_life > 0 and math.isfinite(half_life)):
            raise FirewallConfigError(f"half-life must be positive, got {half_life}")
        self.half_life = half_life
        self._flows: dict[tuple[str, str], FlowRates] = {}

    def __len__(self) -> int:
        return len(self._flows)

    def get(self, pkt: PacketRecord) -> FlowRates | None:
        return self._flows.get(pkt.conversation)

    def observe(self, pkt: PacketRecord, now: float) -> FlowRates:
        key = pkt.conversation
        flow = self._flows.get(key)
        if flow is None:
            flow = self._flows[key] = FlowRates()
        h = self.half_life
        if pkt.kind.is_response:
            last = flow.recv_at
            if last is not None and now < last:
                raise FlowOrderError(f"packet {pkt.id} observed at {now} before {last} on {key}")
            decay = 0.0 if last is None else 2.0 ** (-(now - last) / h)
            flow.recv_rate = flow.recv_rate * decay + pkt.size / h
            flow.recv_at = now
        else:
            last = flow.send_at
            if last is not None and now < last:
                raise FlowOrderError(f"packet {pkt.id} observed at {now} before {last} on {key}")
            decay = 0.0 if last is None else 2.0 ** (-(now - last) / h)
            flow.send_rate = flow.send_rate * decay + pkt.size / h
            flow.send_at = now
        flow.packets += 1
        return flow

    def extract_features(self, pkt: PacketRecord, capacity: float) -> tuple[float, float]:
        """(source, destination) rates of ``pkt``'s conversation, each as min(1, rate/capacity)."""
        if not (capacity > 0 and math.isfinite(capacity)):
            raise FirewallConfigError(f"capacity must be positive, got {capacity}")
        flow = self._flows.get(pkt.conversation)
        if flow is None:
            return (0.0, 0.0)
        return (min(1.0, flow.send_rate / capacity), min(1.0, flow.recv_rate / capacity))


class AclAction(str, enum.Enum):
    ALLOW = "allow"
    DENY = "deny"


@dataclass(frozen=True)
class AclRule:
    """One ACL line; ``None`` fields match anything."""

    action: AclAction
    src: frozenset[str] | None = None
    zone: Zone | None = None
    kind: Kind | None = None

    def matches(self, pkt: PacketRecord) -> bool:
        return (
            (self.src is None or pkt.src in self.src)
            and (self.zone is None or pkt.zone == self.zone)
            and (self.kind is None or pkt.kind == self.kind)
        )


class Verdict(str, enum.Enum):
    ALLOW = "allow"
    DROP = "drop"


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    added_latency: float
    security_level: float | None = None
    band: SecurityBand | None = None
    reason: str = ""

    @property
    def allowed(self) -> bool:
        return self.verdict is Verdict.ALLOW


@dataclass(frozen=True)
class NoFirewall:
    name: ClassVar[str] = "none"
    latency: ClassVar[float] = 0.0


@dataclass(frozen=True)
class ConventionalFirewall:
    acl: tuple[AclRule, ...]
    latency: float = 0.0005
    name: ClassVar[str] = "conventional"

    def __post_init__(self) -> None:
        object.__setattr__(self, "acl", tuple(self.acl))
        if not (self.latency >= 0 and math.isfinite(self.latency)):
            raise FirewallConfigError(f"latency must be >= 0, got {self.latency}")


@dataclass(frozen=True)
class FuzzyFirewall:
    rules: RuleBase
    thresholds: Mapping[Zone, float]
    latency: float = 0.0006
    inputs: tuple[str, str] = ("source", "destination")
    name: ClassVar[str] = "fuzzy"
    # Memo of (source, destination) -> InferenceResult; infer is pure.
    _memo: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "thresholds", {Zone(z): float(t) for z, t in self.thresholds.items()})
        if not (self.latency >= 0 and math.isfinite(self.latency)):
            raise FirewallConfigError(f"latency must be >= 0, got {self.latency}")
        for zone, t in self.thresholds.items():
            if not 0.0 <= t <= 1.0:
                raise FirewallConfigError(f"threshold for {zone} must lie in [0, 1], got {t}")
        missing = set(self.inputs) - set(self.rules.input_names())
        if missing:
            raise FirewallConfigError(f"rule base lacks input variables {sorted(missing)}")

    def score(self, source: float, destination: float):
        key = (source, destination)
        hit = self._memo.get(key)
        if hit is None:
            if len(self._memo) > 200_000:
                self._memo.clear()
            hit = self._memo[key] = infer(
                self.rules, {self.inputs[0]: source, self.inputs[1]: destination}
            )
        return hit


FirewallPolicy = Union[NoFirewall, ConventionalFirewall, FuzzyFirewall]


def decide(policy: FirewallPolicy, features: tuple[float, float], pkt: PacketRecord) -> Decision:
    source, destination = features
    if not (0.0 <= source <= 1.0 and 0.0 <= destination <= 1.0):
        raise FirewallConfigError(f"features must lie in [0, 1]^2, got {features}")

    if isinstance(policy, NoFirewall):
        return Decision(Verdict.ALLOW, 0.0)

    if isinstance(policy, ConventionalFirewall):
        for rule in policy.acl:
            if rule.matches(pkt):
                if rule.action is AclAction.ALLOW:
                    return Decision(Verdict.ALLOW, policy.latency)
                return Decision(Verdict.DROP, policy.latency, reason="acl")
        return Decision(Verdict.DROP, policy.latency, reason="acl")

    if isinstance(policy, FuzzyFirewall):
        try:
            threshold = policy.thresholds[pkt.zone]
        except KeyError:
            raise FirewallConfigError(f"no security threshold for zone {pkt.zone}") from None
        result = policy.score(source, destination)
        verdict = Verdict.ALLOW if result.crisp >= threshold else Verdict.DROP
        return Decision(
            verdict,
            policy.latency,
            security_level=result.crisp,
            band=result.band,
            reason="" if verdict is Verdict.ALLOW else "fuzzy",
        )

    raise FirewallConfigError(f"unknown policy {policy!r}")


def default_thresholds() -> dict[Zone, float]:
    return {
        Zone.PRIVATE_DB: SecurityBand.HIGH_SECURED.lo,
        Zone.PUBLIC_WEB: SecurityBand.LOW_SECURED.lo,
    }


def default_acl(blocked_sources: Iterable[str], db_clients: Iterable[str]) -> tuple[AclRule, ...]:
    """Static rules a conventional firewall is configured with.

    Junk from listed attackers is denied, database queries are accepted only
    from the registered client list, everything else passes.
    """
    return (
        AclRule(AclAction.DENY, src=frozenset(blocked_sources), kind=Kind.JUNK),
        AclRule(AclAction.ALLOW, src=frozenset(db_clients), zone=Zone.PRIVATE_DB, kind=Kind.DB_QUERY),
        AclRule(AclAction.DENY, zone=Zone.PRIVATE_DB, kind=Kind.DB_QUERY),
        AclRule(AclAction.ALLOW),
    )
