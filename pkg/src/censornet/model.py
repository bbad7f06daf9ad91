"""Shared vocabulary of the audit pipeline: URLs, status classes, probe results, strata.

Everything here is an immutable value object; instances can be shared freely
between threads.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional
from urllib.parse import urlsplit

#: Largest response-body excerpt kept on a probe result. Fingerprint matching
#: never needs more, and this bounds memory during bulk runs.
BODY_EXCERPT_CAP = 64 * 1024

ALLOWED_SCHEMES = ("http", "https")


class PageOutcome(Enum):
    """What a page fetch ultimately produced, regardless of transport."""

    BLOCK_PAGE = "block_page"
    CONTENT = "content"
    UNREACHABLE = "unreachable"


@dataclass(frozen=True)
class UrlRecord:
    """One audited URL. ``domain`` is always the lowercased hostname of ``url``."""

    url: str
    domain: str
    scheme: str

    def __post_init__(self) -> None:
        parts = urlsplit(self.url)
        host = parts.hostname or ""
        if parts.scheme not in ALLOWED_SCHEMES or not host:
            raise ValueError(f"not an absolute http(s) URL: {self.url!r}")
        if self.domain != host.lower():
            raise ValueError(f"domain {self.domain!r} does not match URL host {host!r}")
        if self.scheme != parts.scheme:
            raise ValueError(f"scheme {self.scheme!r} does not match URL {self.url!r}")

    @classmethod
    def from_url(cls, url: str) -> "UrlRecord":
        """Parse an absolute http(s) URL; raises ValueError on anything else."""
        parts = urlsplit(url.strip())
        if parts.scheme not in ALLOWED_SCHEMES:
            raise ValueError(f"unsupported or missing scheme: {url!r}")
        if not parts.hostname:
            raise ValueError(f"URL has no hostname: {url!r}")
        return cls(url=url.strip(), domain=parts.hostname.lower(), scheme=parts.scheme)


@dataclass(frozen=True)
class StatusClass:
    """One cell of the status taxonomy: an HTTP status code, or blank.

    ``code`` is None when no HTTP status was obtained at all (DNS failure,
    refused connection, timeout) -- the survey's "0 (blank)" bucket.
    """

    code: Optional[int] = None

    def __post_init__(self) -> None:
        if self.code is not None and not 100 <= self.code <= 599:
            raise ValueError(f"HTTP status out of range: {self.code}")

    @property
    def label(self) -> str:
        """Column label: the code as text, or "0" for the blank bucket."""
        return "0" if self.code is None else str(self.code)

    @property
    def description(self) -> str:
        return _DESCRIPTIONS.get(self.code, f"Other ({self.code})")

    def __repr__(self) -> str:  # keeps census dumps readable
        return f"StatusClass({self.label})"


OK200 = StatusClass(200)
MOVED301 = StatusClass(301)
FOUND302 = StatusClass(302)
BLANK0 = StatusClass(None)

_DESCRIPTIONS = {
    200: "OK",
    301: "Moved Permanently",
    302: "Found",
    None: "Name Not Resolved",
}


def classify_status(raw_status: Optional[int]) -> StatusClass:
    """Map a raw HTTP status (or its absence) onto the status taxonomy.

    Total over None plus [100, 599]; anything else raises ValueError.
    """
    if raw_status is None:
        return BLANK0
    if not 100 <= raw_status <= 599:
        raise ValueError(f"HTTP status out of range: {raw_status}")
    return StatusClass(raw_status)


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of probing one URL: its status class, timing and forensic notes."""

    record: UrlRecord
    status: StatusClass
    raw_status: Optional[int] = None
    response_time: float = 0.0
    body_excerpt: Optional[bytes] = None
    error_note: Optional[str] = None

    def __post_init__(self) -> None:
        if (self.raw_status is None) != (self.status == BLANK0):
            raise ValueError("blank status class must coincide with an absent raw status")
        if self.raw_status is not None and self.status != classify_status(self.raw_status):
            raise ValueError(f"status {self.status} inconsistent with raw code {self.raw_status}")
        if self.response_time < 0:
            raise ValueError("response_time must be non-negative")
        if self.body_excerpt is not None and len(self.body_excerpt) > BODY_EXCERPT_CAP:
            object.__setattr__(self, "body_excerpt", self.body_excerpt[:BODY_EXCERPT_CAP])


@dataclass(frozen=True)
class CensusTable:
    """Per-class counts over a probed URL population."""

    counts: Mapping[StatusClass, int]
    total: int

    def __post_init__(self) -> None:
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("census counts must be non-negative")
        if sum(self.counts.values()) != self.total:
            raise ValueError("census total must equal the sum of its counts")
        # canonical form: zero counts are not stored
        object.__setattr__(self, "counts", {c: n for c, n in self.counts.items() if n})

    def count(self, status: StatusClass) -> int:
        return self.counts.get(status, 0)


def build_census(results: Iterable[ProbeResult]) -> CensusTable:
    """Tally probe results into a census table; total equals the input length."""
    tally: Counter[StatusClass] = Counter()
    n = 0
    for result in results:
        tally[result.status] += 1
        n += 1
    return CensusTable(counts=dict(tally), total=n)


@dataclass(frozen=True)
class StratumPlan:
    """One stratum of a sampling plan: its population and the drawn sample."""

    label: StatusClass
    population_size: int
    allocation: int
    members: tuple[UrlRecord, ...] = ()
    sample: tuple[UrlRecord, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", tuple(self.members))
        object.__setattr__(self, "sample", tuple(self.sample))
        if self.population_size < 1:
            raise ValueError("population_size must be positive")
        if not 0 <= self.allocation <= self.population_size:
            raise ValueError("allocation must lie in [0, population_size]")
        if self.members and len(self.members) != self.population_size:
            raise ValueError("members, when given, must match population_size")
        if len(self.sample) != self.allocation:
            raise ValueError("sample length must equal the allocation")
        # Duplicate URLs are legitimate population rows, so containment is
        # checked as a multiset: the sample may hold a value at most as many
        # times as the member list does.
        overdrawn = Counter(self.sample) - Counter(self.members)
        if self.members and overdrawn:
            raise ValueError(f"sample is not drawn from members: {overdrawn}")
