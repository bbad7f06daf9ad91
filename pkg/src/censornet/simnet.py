"""In-process simulation of a DNS-interception blocking deployment.

The simulated world has four parts: a blocklist, an interceptor sitting in
front of the upstream DNS zone, a block-page webserver, and scripted upstream
HTTP behaviour. Paths (vantage labels) decide whether the interceptor sees a
query; a circumvention path simply has interception switched off. Everything
is deterministic: scripted latencies drive a virtual clock, so timings are
exact, and every step appends to a totally ordered event log.
"""

from __future__ import annotations

import json
import sys
import threading
import time
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Mapping, Optional
from urllib.parse import urlsplit

from .dns_audit import DnsAnswer, Rcode
from .model import PageOutcome
from .prober import FailureKind, ProbePolicy, TransportReply

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised only on 3.10
    import tomli as tomllib

DEFAULT_BLOCK_PAGE = (
    "<html><head><title>Web Page Blocked!</title></head><body>"
    "Web Page Blocked! The page you have requested has been blocked, "
    "because the URL is banned as per the Government Rules.</body></html>"
)

#: How a blocked query is tampered with: answered with the block server's
#: address, or silently dropped (the client sees a timeout).
TAMPER_BOGUS_IP = "bogus_ip"
TAMPER_DROP = "drop"


@dataclass(frozen=True)
class ScriptedHttp:
    """Upstream webserver behaviour scripted for one domain."""

    status: int = 200
    latency: float = 0.0
    body: str = ""
    location: Optional[str] = None

    def __post_init__(self) -> None:
        if self.latency < 0:
            raise ValueError("scripted latency must be non-negative")
        if not 100 <= self.status <= 599:
            raise ValueError(f"scripted status out of range: {self.status}")


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one simulated blocking deployment."""

    blocklist: frozenset[str] = frozenset()
    upstream_zone: Mapping[str, frozenset[str]] = field(default_factory=dict)
    block_server_ip: str = "198.51.100.99"
    block_page_body: str = DEFAULT_BLOCK_PAGE
    block_page_status: int = 200
    scripted_http: Mapping[str, ScriptedHttp] = field(default_factory=dict)
    intercept_enabled: Mapping[str, bool] = field(default_factory=dict)
    tamper_mode: str = TAMPER_BOGUS_IP

    def __post_init__(self) -> None:
        object.__setattr__(self, "blocklist", frozenset(d.lower() for d in self.blocklist))
        object.__setattr__(
            self,
            "upstream_zone",
            {d.lower(): frozenset(ips) for d, ips in dict(self.upstream_zone).items()},
        )
        object.__setattr__(self, "scripted_http", dict(self.scripted_http))
        object.__setattr__(self, "intercept_enabled", dict(self.intercept_enabled))
        for domain, ips in self.upstream_zone.items():
            if self.block_server_ip in ips:
                raise ValueError(
                    f"block server address {self.block_server_ip} must not appear "
                    f"in the upstream zone (domain {domain})"
                )
        if self.tamper_mode not in (TAMPER_BOGUS_IP, TAMPER_DROP):
            raise ValueError(f"unknown tamper mode: {self.tamper_mode!r}")
        if not 100 <= self.block_page_status <= 599:
            raise ValueError(f"block page status out of range: {self.block_page_status}")

    def intercepts(self, path: str) -> bool:
        """Whether the interceptor sees queries on this path (default: yes)."""
        return self.intercept_enabled.get(path, self.intercept_enabled.get("default", True))

    # -- serialization ------------------------------------------------------

    @classmethod
    def from_dict(cls, doc: Mapping[str, object]) -> "SimConfig":
        scripted = {
            domain: ScriptedHttp(
                status=int(entry.get("status", 200)),
                latency=float(entry.get("latency", 0.0)),
                body=str(entry.get("body", "")),
                location=entry.get("location"),  # type: ignore[arg-type]
            )
            for domain, entry in dict(doc.get("scripted_http", {})).items()  # type: ignore[union-attr]
        }
        kwargs = dict(
            blocklist=frozenset(doc.get("blocklist", ())),  # type: ignore[arg-type]
            upstream_zone={
                d: frozenset(ips) for d, ips in dict(doc.get("upstream_zone", {})).items()  # type: ignore[union-attr]
            },
            scripted_http=scripted,
            intercept_enabled=dict(doc.get("intercept_enabled", {})),  # type: ignore[arg-type]
            tamper_mode=str(doc.get("tamper_mode", TAMPER_BOGUS_IP)),
        )
        for key in ("block_server_ip", "block_page_body"):
            if key in doc:
                kwargs[key] = str(doc[key])
        if "block_page_status" in doc:
            kwargs["block_page_status"] = int(doc["block_page_status"])  # type: ignore[arg-type]
        return cls(**kwargs)  # type: ignore[arg-type]

    def to_dict(self) -> dict:
        return {
            "blocklist": sorted(self.blocklist),
            "upstream_zone": {d: sorted(ips) for d, ips in sorted(self.upstream_zone.items())},
            "block_server_ip": self.block_server_ip,
            "block_page_body": self.block_page_body,
            "block_page_status": self.block_page_status,
            "scripted_http": {
                d: {
                    "status": s.status,
                    "latency": s.latency,
                    "body": s.body,
                    "location": s.location,
                }
                for d, s in sorted(self.scripted_http.items())
            },
            "intercept_enabled": dict(sorted(self.intercept_enabled.items())),
            "tamper_mode": self.tamper_mode,
        }

    @classmethod
    def from_file(cls, path: str | Path) -> "SimConfig":
        """Load a config from a .json or .toml document."""
        path = Path(path)
        if path.suffix == ".toml":
            with path.open("rb") as fh:
                return cls.from_dict(tomllib.load(fh))
        return cls.from_dict(json.loads(path.read_text(encoding="utf-8")))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class EventKind(Enum):
    DNS_QUERY = "DnsQuery"
    DNS_INTERCEPTED = "DnsIntercepted"
    DNS_FORWARDED = "DnsForwarded"
    HTTP_REQUEST = "HttpRequest"
    BLOCK_PAGE_SERVED = "BlockPageServed"
    CONTENT_SERVED = "ContentServed"


@dataclass(frozen=True)
class SimEvent:
    """One step of a simulated flow; ``seq`` is unique and increasing per run."""

    seq: int
    kind: EventKind
    domain: str
    detail: str = ""


class ConnectionRefused(Exception):
    """Raised when HTTP is attempted against an address nothing listens on."""


class Simulation:
    """One simulated deployment instance: immutable config plus an event log.

    Safe for concurrent callers; event sequence numbers are issued under a
    lock, so the combined log is totally ordered even when flows interleave.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self._lock = threading.Lock()
        self._events: list[SimEvent] = []
        self._clock = 0.0

    # -- observability ------------------------------------------------------

    @property
    def clock(self) -> float:
        """Virtual time: the sum of all scripted latencies spent so far."""
        return self._clock

    def events(self) -> list[SimEvent]:
        with self._lock:
            return list(self._events)

    def export_events(self, path: str | Path) -> None:
        """Write the event log as JSON lines."""
        with Path(path).open("w", encoding="utf-8") as fh:
            for event in self.events():
                fh.write(
                    json.dumps(
                        {
                            "seq": event.seq,
                            "kind": event.kind.value,
                            "domain": event.domain,
                            "detail": event.detail,
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )

    def _log(self, kind: EventKind, domain: str, detail: str = "") -> SimEvent:
        with self._lock:
            event = SimEvent(seq=len(self._events) + 1, kind=kind, domain=domain, detail=detail)
            self._events.append(event)
            return event

    def _advance(self, latency: float) -> None:
        with self._lock:
            self._clock += latency

    # -- the blocking mechanism itself --------------------------------------

    def intercept_query(self, domain: str, path: str = "default") -> DnsAnswer:
        """Resolve a domain as seen from ``path``.

        Blocklisted domains on an intercepting path get the block server's
        address (or a dropped query, per the tamper mode); everything else is
        forwarded to the upstream zone, which answers or says NXDOMAIN.
        """
        answer, _ = self._intercept(domain.lower(), path)
        return answer

    def _intercept(self, domain: str, path: str) -> tuple[DnsAnswer, list[SimEvent]]:
        events = [self._log(EventKind.DNS_QUERY, domain, f"path={path}")]
        if domain in self.config.blocklist and self.config.intercepts(path):
            if self.config.tamper_mode == TAMPER_DROP:
                events.append(self._log(EventKind.DNS_INTERCEPTED, domain, "query dropped"))
                return DnsAnswer(rcode=Rcode.TIMEOUT), events
            events.append(
                self._log(EventKind.DNS_INTERCEPTED, domain, f"answered {self.config.block_server_ip}")
            )
            answer = DnsAnswer(
                rcode=Rcode.NOERROR, addresses=frozenset({self.config.block_server_ip})
            )
            return answer, events
        zone = self.config.upstream_zone.get(domain)
        if zone is None:
            events.append(self._log(EventKind.DNS_FORWARDED, domain, "upstream answered NXDOMAIN"))
            return DnsAnswer(rcode=Rcode.NXDOMAIN), events
        events.append(
            self._log(EventKind.DNS_FORWARDED, domain, "upstream answered " + ",".join(sorted(zone)))
        )
        return DnsAnswer(rcode=Rcode.NOERROR, addresses=zone), events

    def serve_http(self, ip: str, domain: str) -> tuple[int, str]:
        """Serve the HTTP layer for a resolved address.

        The block server returns the block page; the domain's own zone address
        returns its scripted response (or synthetic content); any other address
        refuses the connection.
        """
        reply, _ = self._serve(ip, domain.lower())
        return reply

    def _serve(self, ip: str, domain: str) -> tuple[tuple[int, str], list[SimEvent]]:
        if ip == self.config.block_server_ip:
            events = [
                self._log(EventKind.HTTP_REQUEST, domain, f"GET http://{domain}/ via {ip}"),
                self._log(EventKind.BLOCK_PAGE_SERVED, domain, f"status={self.config.block_page_status}"),
            ]
            return (self.config.block_page_status, self.config.block_page_body), events
        if ip not in self.config.upstream_zone.get(domain, frozenset()):
            self._log(EventKind.HTTP_REQUEST, domain, f"via {ip}: connection refused")
            raise ConnectionRefused(f"nothing listens on {ip}")
        events = [self._log(EventKind.HTTP_REQUEST, domain, f"GET http://{domain}/ via {ip}")]
        scripted = self.config.scripted_http.get(domain, ScriptedHttp())
        if scripted.body:
            body = scripted.body
        elif scripted.status in (301, 302, 303, 307, 308):
            body = ""
        else:
            body = (
                f"<html><head><title>{domain}</title></head>"
                f"<body>welcome to {domain}</body></html>"
            )
        events.append(self._log(EventKind.CONTENT_SERVED, domain, f"status={scripted.status}"))
        return (scripted.status, body), events

    def end_to_end(self, domain: str, path: str = "default") -> tuple[PageOutcome, list[SimEvent]]:
        """Run one full user flow: DNS query, then exactly one HTTP fetch.

        Returns the page outcome together with this flow's own events (the
        shared log keeps accumulating across calls).
        """
        domain = domain.lower()
        answer, events = self._intercept(domain, path)
        scripted = self.config.scripted_http.get(domain)
        if scripted is not None:
            self._advance(scripted.latency)
        if answer.rcode != Rcode.NOERROR or not answer.addresses:
            return PageOutcome.UNREACHABLE, events
        ip = min(answer.addresses)
        try:
            (_status, _body), http_events = self._serve(ip, domain)
        except ConnectionRefused:
            return PageOutcome.UNREACHABLE, events
        events.extend(http_events)
        if ip == self.config.block_server_ip:
            return PageOutcome.BLOCK_PAGE, events
        return PageOutcome.CONTENT, events

    # -- ports for the rest of the pipeline ----------------------------------

    def transport(self, path: str = "default", real_delay: float = 0.0) -> "SimTransport":
        return SimTransport(self, path=path, real_delay=real_delay)

    def dns_port(self, path: str = "default") -> "SimDnsPort":
        return SimDnsPort(self, path=path)


class SimTransport:
    """TransportPort implementation backed by a Simulation.

    Also a measuring instrument: tracks how many requests were ever in flight
    at once (``max_in_flight``), which the concurrency tests assert against.
    ``real_delay`` makes each request hold a real thread for that long so
    overlap is observable; virtual latency is unaffected.
    """

    def __init__(self, sim: Simulation, path: str = "default", real_delay: float = 0.0):
        self._sim = sim
        self._path = path
        self._real_delay = real_delay
        self._gauge_lock = threading.Lock()
        self._in_flight = 0
        self.max_in_flight = 0

    def request(self, url: str, method: str, policy: ProbePolicy) -> TransportReply:
        with self._gauge_lock:
            self._in_flight += 1
            self.max_in_flight = max(self.max_in_flight, self._in_flight)
        try:
            if self._real_delay:
                time.sleep(self._real_delay)
            domain = (urlsplit(url).hostname or "").lower()
            if not domain:
                return TransportReply(failure=FailureKind.PROTOCOL, note=f"bad url {url!r}")
            scripted = self._sim.config.scripted_http.get(domain, ScriptedHttp())
            latency = scripted.latency
            answer = self._sim.intercept_query(domain, self._path)
            self._sim._advance(latency)
            if answer.rcode == Rcode.TIMEOUT:
                return TransportReply(
                    failure=FailureKind.TIMEOUT,
                    note="dns query dropped",
                    elapsed=policy.total_timeout,
                )
            if answer.rcode != Rcode.NOERROR or not answer.addresses:
                return TransportReply(
                    failure=FailureKind.DNS, note=answer.rcode.value, elapsed=latency
                )
            if latency > policy.total_timeout:
                return TransportReply(
                    failure=FailureKind.TIMEOUT,
                    note="response exceeded total timeout",
                    elapsed=policy.total_timeout,
                )
            ip = min(answer.addresses)
            try:
                status, body = self._sim.serve_http(ip, domain)
            except ConnectionRefused as exc:
                return TransportReply(failure=FailureKind.REFUSED, note=str(exc), elapsed=latency)
            location = None
            if ip != self._sim.config.block_server_ip:
                location = scripted.location
            return TransportReply(
                status=status,
                body=b"" if method == "HEAD" else body.encode("utf-8"),
                elapsed=latency,
                location=location,
            )
        finally:
            with self._gauge_lock:
                self._in_flight -= 1


class SimDnsPort:
    """DnsPort implementation backed by a Simulation path."""

    def __init__(self, sim: Simulation, path: str = "default"):
        self._sim = sim
        self._path = path

    def resolve(self, domain: str) -> DnsAnswer:
        return self._sim.intercept_query(domain, self._path)
