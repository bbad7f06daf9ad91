"""Cross-vantage A-record auditing and triage of unresolvable domains.

Only A records are compared. Divergence between an in-scope vantage and a
reference vantage, where the in-scope answers land in a known block-server
set, is classified as tampering.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import FrozenSet, Iterable, Mapping, Protocol


class Rcode(Enum):
    NOERROR = "NoError"
    NXDOMAIN = "NxDomain"
    SERVFAIL = "ServFail"
    TIMEOUT = "Timeout"


@dataclass(frozen=True)
class DnsAnswer:
    """Raw resolver answer: a response code plus any A records."""

    rcode: Rcode
    addresses: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "addresses", frozenset(self.addresses))
        if self.addresses and self.rcode != Rcode.NOERROR:
            raise ValueError("answers are only carried on NoError responses")


class DnsPort(Protocol):
    """Abstract A-record query interface (live resolver or simulator)."""

    def resolve(self, domain: str) -> DnsAnswer:
        ...


class AvailabilityLookupError(Exception):
    """A registrar availability lookup failed outright (no verdict possible)."""


class AvailabilityPort(Protocol):
    """Abstract registrar bulk-availability check."""

    def is_available(self, domain: str) -> bool:
        ...


@dataclass(frozen=True)
class DnsObservation:
    """One vantage point's view of a domain's A records."""

    domain: str
    vantage: str
    resolver: str
    answers: FrozenSet[str]
    rcode: Rcode

    def __post_init__(self) -> None:
        object.__setattr__(self, "answers", frozenset(self.answers))
        if self.answers and self.rcode != Rcode.NOERROR:
            raise ValueError("non-empty answers require rcode NoError")


class VerdictKind(Enum):
    CONSISTENT = "Consistent"
    TAMPERED = "Tampered"
    DIVERGENT_UNKNOWN = "DivergentUnknown"
    UNRESOLVABLE_EVERYWHERE = "UnresolvableEverywhere"


@dataclass(frozen=True)
class DnsVerdict:
    """Classification of a cross-vantage comparison."""

    kind: VerdictKind
    injected: FrozenSet[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "injected", frozenset(self.injected))
        if self.kind == VerdictKind.TAMPERED and not self.injected:
            raise ValueError("a tampering verdict must carry the injected addresses")
        if self.kind != VerdictKind.TAMPERED and self.injected:
            raise ValueError("only tampering verdicts carry injected addresses")


class TriageStatus(Enum):
    PURCHASABLE = "PurchasableDomain"
    NO_A_RECORD = "NoARecord"
    RESOLVABLE = "Resolvable"


_HOSTNAME_RE = re.compile(
    r"^(?=.{1,253}$)[a-z0-9_]([a-z0-9_-]{0,62})?(\.[a-z0-9_]([a-z0-9_-]{0,62})?)*\.?$",
    re.IGNORECASE,
)


def _require_hostname(domain: str) -> str:
    if not _HOSTNAME_RE.match(domain or ""):
        raise ValueError(f"not a valid hostname: {domain!r}")
    return domain.lower().rstrip(".")


def resolve_a(domain: str, vantage: str, resolver: str, dns_port: DnsPort) -> DnsObservation:
    """Query one vantage for a domain's A records.

    NXDOMAIN, SERVFAIL and timeouts are encoded in the observation's rcode,
    never raised; only a malformed hostname raises.
    """
    domain = _require_hostname(domain)
    answer = dns_port.resolve(domain)
    return DnsObservation(
        domain=domain,
        vantage=vantage,
        resolver=resolver,
        answers=answer.addresses,
        rcode=answer.rcode,
    )


def compare_vantages(
    in_scope: DnsObservation, reference: DnsObservation, block_ips: Iterable[str]
) -> DnsVerdict:
    """Classify the divergence between an in-scope and a reference observation.

    Equal non-empty answers are consistent; in-scope answers landing in the
    block-server set while differing from the reference are tampering; failure
    on both sides is unresolvable; everything else is divergent-unknown.
    """
    if in_scope.domain != reference.domain:
        raise ValueError(
            f"observations are for different domains: {in_scope.domain!r} vs {reference.domain!r}"
        )
    block_set = frozenset(block_ips)
    if in_scope.answers and in_scope.answers == reference.answers:
        return DnsVerdict(kind=VerdictKind.CONSISTENT)
    if in_scope.rcode != Rcode.NOERROR and reference.rcode != Rcode.NOERROR:
        return DnsVerdict(kind=VerdictKind.UNRESOLVABLE_EVERYWHERE)
    injected = in_scope.answers & block_set
    if injected and in_scope.answers != reference.answers:
        return DnsVerdict(kind=VerdictKind.TAMPERED, injected=injected)
    return DnsVerdict(kind=VerdictKind.DIVERGENT_UNKNOWN)


def triage_blank(
    domain: str, availability_port: AvailabilityPort, dns_port: DnsPort
) -> TriageStatus:
    """Sort an unresolvable domain into purchasable / registered-without-A / resolvable."""
    domain = _require_hostname(domain)
    if availability_port.is_available(domain):
        return TriageStatus.PURCHASABLE
    answer = dns_port.resolve(domain)
    if answer.addresses:
        return TriageStatus.RESOLVABLE
    return TriageStatus.NO_A_RECORD


def triage_counts(statuses: Iterable[TriageStatus]) -> dict[TriageStatus, int]:
    """Tally triage statuses; every enum member is present in the result."""
    tally = Counter(statuses)
    return {status: tally.get(status, 0) for status in TriageStatus}


class FixtureMap:
    """Scripted availability/DNS data backing both ports in offline runs.

    Loads a JSON map ``{domain: {"available": bool, "a_records": [ip, ...]}}``;
    top-level keys starting with an underscore are ignored so fixtures can
    carry notes.
    """

    def __init__(self, entries: Mapping[str, Mapping[str, object]]):
        self._entries = {
            domain.lower(): {
                "available": bool(entry.get("available", False)),
                "a_records": frozenset(entry.get("a_records", ())),  # type: ignore[arg-type]
            }
            for domain, entry in entries.items()
            if not domain.startswith("_")
        }

    @classmethod
    def load(cls, path: str | Path) -> "FixtureMap":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def domains(self) -> list[str]:
        return sorted(self._entries)

    def availability_port(self) -> AvailabilityPort:
        return _FixtureAvailability(self._entries)

    def dns_port(self) -> DnsPort:
        return _FixtureDns(self._entries)


class _FixtureAvailability:
    def __init__(self, entries):
        self._entries = entries

    def is_available(self, domain: str) -> bool:
        entry = self._entries.get(domain.lower())
        if entry is None:
            raise AvailabilityLookupError(f"no availability data for {domain!r}")
        return entry["available"]


class _FixtureDns:
    def __init__(self, entries):
        self._entries = entries

    def resolve(self, domain: str) -> DnsAnswer:
        entry = self._entries.get(domain.lower())
        if entry is None or entry["available"]:
            return DnsAnswer(rcode=Rcode.NXDOMAIN)
        records = entry["a_records"]
        if records:
            return DnsAnswer(rcode=Rcode.NOERROR, addresses=records)
        # Registered domains without A records still answer NoError.
        return DnsAnswer(rcode=Rcode.NOERROR)
