"""Bulk HTTP status census over a URL list, plus block-page fingerprint detection.

Probes go through a ``TransportPort`` so the same code runs against the live
network or the in-process blocking simulator. Redirects are not followed by
default: 301/302 are the classes being counted, and following would hide them.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Protocol, Sequence
from urllib.parse import urljoin

from .model import BLANK0, CensusTable, ProbeResult, UrlRecord, build_census, classify_status

#: Statuses that denote a redirect when redirect-following is enabled.
REDIRECT_STATUSES = frozenset({301, 302, 303, 307, 308})

#: HEAD responses that trigger one retry with the next method in the chain.
_RETRYABLE_STATUSES = frozenset({405, 501})

_MAX_REDIRECT_HOPS = 5


class FailureKind(Enum):
    """Why a transport produced no HTTP status."""

    DNS = "dns"
    TIMEOUT = "timeout"
    REFUSED = "refused"
    TLS = "tls"
    PROTOCOL = "protocol"


@dataclass(frozen=True)
class TransportReply:
    """What one request attempt returned: a status with body/timing, or a failure."""

    status: Optional[int] = None
    body: bytes = b""
    elapsed: float = 0.0
    location: Optional[str] = None
    failure: Optional[FailureKind] = None
    note: str = ""

    def __post_init__(self) -> None:
        if (self.status is None) == (self.failure is None):
            raise ValueError("a reply carries exactly one of: status, failure")


class TransportPort(Protocol):
    """Abstract request interface; implemented by the live client and the simulator."""

    def request(self, url: str, method: str, policy: "ProbePolicy") -> TransportReply:
        ...


@dataclass(frozen=True)
class ProbePolicy:
    """Knobs for one census run."""

    connect_timeout: float = 10.0
    total_timeout: float = 30.0
    max_parallel: int = 8
    follow_redirects: bool = False
    method_chain: tuple[str, ...] = ("HEAD", "GET")
    user_agent: str = "censornet/0.1"

    def __post_init__(self) -> None:
        if self.connect_timeout > self.total_timeout:
            raise ValueError("connect_timeout must not exceed total_timeout")
        if self.max_parallel < 1:
            raise ValueError("max_parallel must be at least 1")
        if not self.method_chain:
            raise ValueError("method_chain must not be empty")


@dataclass(frozen=True)
class FingerprintSet:
    """Case-insensitive substrings that identify a block page."""

    patterns: tuple[str, ...]
    match_scope: str = "body"

    def __post_init__(self) -> None:
        object.__setattr__(self, "patterns", tuple(self.patterns))
        if not self.patterns:
            raise ValueError("at least one fingerprint pattern is required")
        if self.match_scope not in ("body", "title", "both"):
            raise ValueError(f"unknown match scope: {self.match_scope!r}")


def load_fingerprints(path: str | Path, match_scope: str = "body") -> FingerprintSet:
    """Read fingerprint patterns from a text file: one per line, '#' comments."""
    patterns = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            patterns.append(line)
    return FingerprintSet(patterns=tuple(patterns), match_scope=match_scope)


_TITLE_RE = re.compile(rb"<title[^>]*>(.*?)</title>", re.IGNORECASE | re.DOTALL)


def detect_block_page(body: bytes, fp: FingerprintSet) -> bool:
    """True iff any fingerprint occurs case-insensitively within the configured scope."""
    scopes = []
    if fp.match_scope in ("body", "both"):
        scopes.append(body)
    if fp.match_scope in ("title", "both"):
        m = _TITLE_RE.search(body)
        scopes.append(m.group(1) if m else b"")
    for raw in scopes:
        text = raw.decode("utf-8", errors="replace").casefold()
        if any(pattern.casefold() in text for pattern in fp.patterns):
            return True
    return False


def probe_url(record: UrlRecord, policy: ProbePolicy, transport: TransportPort) -> ProbeResult:
    """Probe one URL along the policy's method chain and classify the outcome.

    The first obtained status wins; HEAD answers of 405/501 (or outright
    failures) fall through to the next method. Without redirect-following the
    reported class is the pre-redirect status. When every attempt fails, the
    result is the blank class with the failure preserved in ``error_note``.
    """
    elapsed = 0.0
    reply: Optional[TransportReply] = None
    for method in policy.method_chain:
        reply = transport.request(record.url, method, policy)
        elapsed += reply.elapsed
        if reply.failure is None and reply.status not in _RETRYABLE_STATUSES:
            break
    assert reply is not None  # method_chain is non-empty

    url = record.url
    hops = 0
    while (
        policy.follow_redirects
        and reply.failure is None
        and reply.status in REDIRECT_STATUSES
        and reply.location
        and hops < _MAX_REDIRECT_HOPS
    ):
        url = urljoin(url, reply.location)
        reply = transport.request(url, "GET", policy)
        elapsed += reply.elapsed
        hops += 1

    if reply.failure is not None:
        note = f"{reply.failure.value}: {reply.note}" if reply.note else reply.failure.value
        return ProbeResult(
            record=record,
            status=BLANK0,
            raw_status=None,
            response_time=elapsed,
            error_note=note,
        )
    return ProbeResult(
        record=record,
        status=classify_status(reply.status),
        raw_status=reply.status,
        response_time=elapsed,
        body_excerpt=reply.body or None,
    )


def run_census(
    records: Sequence[UrlRecord], policy: ProbePolicy, transport: TransportPort
) -> tuple[list[ProbeResult], CensusTable]:
    """Probe every record with at most ``max_parallel`` requests in flight.

    Results come back in input order regardless of completion order; individual
    failures become blank rows, never exceptions.
    """
    if not records:
        raise ValueError("records must not be empty")
    with ThreadPoolExecutor(max_workers=policy.max_parallel) as pool:
        results = list(pool.map(lambda r: probe_url(r, policy, transport), records))
    return results, build_census(results)
