"""Shared builders for the test suite: scripted configs and brute-force oracles."""

from __future__ import annotations

from collections import Counter
from pathlib import Path

from censornet.model import BLANK0, FOUND302, MOVED301, OK200, StatusClass, UrlRecord
from censornet.report import parse_url_list
from censornet.sampling import round_half_up
from censornet.simnet import ScriptedHttp, SimConfig

DATA_DIR = Path(__file__).parent / "data"

#: Target per-class record counts of the full-population census fixture.
CENSUS_TARGETS = {OK200: 449, MOVED301: 186, FOUND302: 43, BLANK0: 137}

_HINT_FILES = {
    "sample_200_ok.txt": OK200,
    "sample_301_moved.txt": MOVED301,
    "sample_302_found.txt": FOUND302,
    "sample_0_blank.txt": BLANK0,
}


def load_curated_records() -> list[UrlRecord]:
    parsed = parse_url_list((DATA_DIR / "banned_urls_curated.txt").read_text(encoding="utf-8"))
    assert not parsed.rejects
    return list(parsed.records)


def load_status_hints() -> dict[str, StatusClass]:
    """Domain -> status class, from the per-stratum sample lists."""
    hints: dict[str, StatusClass] = {}
    for filename, cls in _HINT_FILES.items():
        parsed = parse_url_list((DATA_DIR / filename).read_text(encoding="utf-8"))
        for record in parsed.records:
            hints.setdefault(record.domain, cls)
    return hints


def _ip_pool():
    for a in range(256):
        for b in range(1, 255):
            yield f"198.18.{a}.{b}"


def build_census_config(records: list[UrlRecord]) -> SimConfig:
    """Scripted config whose probe outcomes tally to CENSUS_TARGETS exactly.

    Statuses are assigned per domain (duplicated URLs share one): domains named
    in a stratum sample list keep that stratum's status where the budget
    allows, everything else fills the remaining budgets in list order. Domains
    assigned the blank class are simply absent from the upstream zone.
    """
    hints = load_status_hints()
    multiplicity = Counter(r.domain for r in records)
    order: list[str] = []
    seen: set[str] = set()
    for record in records:
        if record.domain not in seen:
            seen.add(record.domain)
            order.append(record.domain)

    remaining = dict(CENSUS_TARGETS)
    assigned: dict[str, StatusClass] = {}
    for domain in order:
        hint = hints.get(domain)
        if hint is not None and remaining[hint] >= multiplicity[domain]:
            assigned[domain] = hint
            remaining[hint] -= multiplicity[domain]
    for domain in order:
        if domain in assigned:
            continue
        for cls in (OK200, MOVED301, FOUND302, BLANK0):
            if remaining[cls] >= multiplicity[domain]:
                assigned[domain] = cls
                remaining[cls] -= multiplicity[domain]
                break
    assert all(v == 0 for v in remaining.values()), remaining

    ips = _ip_pool()
    zone: dict[str, frozenset[str]] = {}
    scripted: dict[str, ScriptedHttp] = {}
    for domain in order:
        cls = assigned[domain]
        if cls == BLANK0:
            continue
        zone[domain] = frozenset({next(ips)})
        if cls != OK200:
            scripted[domain] = ScriptedHttp(status=cls.code)
    return SimConfig(
        blocklist=frozenset(),
        upstream_zone=zone,
        scripted_http=scripted,
        intercept_enabled={"default": True},
    )


def two_path_config(**overrides) -> SimConfig:
    """Small world with one blocked and one allowed domain and a clean path."""
    base = dict(
        blocklist=frozenset({"blockedsite.example"}),
        upstream_zone={
            "blockedsite.example": frozenset({"203.0.113.9"}),
            "allowedsite.example": frozenset({"203.0.113.7"}),
        },
        intercept_enabled={"default": True, "clean": False},
    )
    base.update(overrides)
    return SimConfig(**base)


def smallest_numerator(denominator: int, target_pct: int) -> int | None:
    """Least k with round_half_up(100*k/denominator) == target_pct, if any."""
    for k in range(denominator + 1):
        if round_half_up(100 * k / denominator) == target_pct:
            return k
    return None
