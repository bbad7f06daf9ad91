"""Dual-path fetches (direct vs. alternate transport) and per-stratum success rates.

A fetch models a browser: GET with redirects followed. Success means the
alternate path delivered real content, whatever happened on the direct path.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass
from typing import Mapping, Sequence

from .model import PageOutcome, StatusClass, UrlRecord
from .prober import FingerprintSet, ProbePolicy, TransportPort, detect_block_page, probe_url
from .sampling import round_half_up

#: Browser-like fetch: GET only, follow redirects to the final page.
BROWSE_POLICY = ProbePolicy(follow_redirects=True, method_chain=("GET",))


@dataclass(frozen=True)
class CircumventionResult:
    """Outcome of fetching one URL over both paths."""

    record: UrlRecord
    direct_outcome: PageOutcome
    alt_outcome: PageOutcome
    success: bool

    def __post_init__(self) -> None:
        if self.success != (self.alt_outcome == PageOutcome.CONTENT):
            raise ValueError("success must mean: the alternate path delivered content")


@dataclass(frozen=True)
class SuccessRow:
    stratum: StatusClass
    path_label: str
    success_pct: int
    numerator: int
    denominator: int

    def __post_init__(self) -> None:
        if not 0 <= self.numerator <= self.denominator:
            raise ValueError("numerator must lie in [0, denominator]")
        if self.success_pct != round_half_up(100 * self.numerator / self.denominator):
            raise ValueError("success_pct must be the half-up rounded percentage")


@dataclass(frozen=True)
class SuccessTable:
    """Per-stratum success percentages for one fetch path."""

    rows: tuple[SuccessRow, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "rows", tuple(self.rows))


def fetch_outcome(
    record: UrlRecord,
    transport: TransportPort,
    fp: FingerprintSet,
    policy: ProbePolicy = BROWSE_POLICY,
) -> PageOutcome:
    """Fetch one URL and decide what came back.

    A 2xx body without a fingerprint hit is content; a fingerprint hit is the
    block page; everything else (failures, non-2xx finals) is unreachable.
    """
    result = probe_url(record, policy, transport)
    body = result.body_excerpt or b""
    if detect_block_page(body, fp):
        return PageOutcome.BLOCK_PAGE
    if result.raw_status is not None and 200 <= result.raw_status <= 299:
        return PageOutcome.CONTENT
    return PageOutcome.UNREACHABLE


def dual_path_fetch(
    record: UrlRecord,
    direct_transport: TransportPort,
    alt_transport: TransportPort,
    fp: FingerprintSet,
    policy: ProbePolicy = BROWSE_POLICY,
) -> CircumventionResult:
    """Fetch over the direct and alternate paths and judge circumvention success."""
    direct = fetch_outcome(record, direct_transport, fp, policy)
    alt = fetch_outcome(record, alt_transport, fp, policy)
    return CircumventionResult(
        record=record,
        direct_outcome=direct,
        alt_outcome=alt,
        success=alt == PageOutcome.CONTENT,
    )


def success_by_stratum(
    results: Sequence[CircumventionResult],
    strata: Mapping[UrlRecord, StatusClass],
    path_label: str,
) -> SuccessTable:
    """Aggregate results into one success row per stratum, in first-seen order."""
    buckets: "OrderedDict[StatusClass, list[bool]]" = OrderedDict()
    for result in results:
        stratum = strata.get(result.record)
        if stratum is None:
            raise ValueError(f"no stratum known for {result.record.url!r}")
        buckets.setdefault(stratum, []).append(result.success)
    rows = []
    for stratum, outcomes in buckets.items():
        numerator = sum(outcomes)
        denominator = len(outcomes)
        rows.append(
            SuccessRow(
                stratum=stratum,
                path_label=path_label,
                success_pct=round_half_up(100 * numerator / denominator),
                numerator=numerator,
                denominator=denominator,
            )
        )
    return SuccessTable(rows=tuple(rows))
