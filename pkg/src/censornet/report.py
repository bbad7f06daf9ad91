"""URL-list ingestion, table emission (text/CSV/JSON) and run-archive persistence.

Text tables mirror the survey's printed layout; JSON output is lossless and
uses stable key order so deterministic runs are byte-identical. Archives are
one directory per run: a payload document plus a checksummed manifest,
written atomically (write-then-rename, last write wins per run id).
"""

from __future__ import annotations

import base64
import csv
import hashlib
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .circumvention import SuccessRow, SuccessTable
from .dns_audit import TriageStatus
from .model import (
    BLANK0,
    FOUND302,
    MOVED301,
    OK200,
    CensusTable,
    ProbeResult,
    StatusClass,
    StratumPlan,
    UrlRecord,
    classify_status,
)

ARCHIVE_SCHEMA_VERSION = 1

#: Row order of the printed census table (by description), and its column order.
CENSUS_ROW_ORDER = (FOUND302, MOVED301, BLANK0, OK200)
CENSUS_COLUMN_ORDER = (OK200, MOVED301, FOUND302, BLANK0)

#: Row order of the printed success tables.
SUCCESS_ROW_ORDER = (FOUND302, MOVED301, OK200, BLANK0)

_TRIAGE_LABELS = {
    TriageStatus.PURCHASABLE: "Domain Name Available for Purchase",
    TriageStatus.NO_A_RECORD: "A Records Not Found",
    TriageStatus.RESOLVABLE: "Resolvable",
}


class ArchiveNotFoundError(Exception):
    """No archive exists under the requested run id."""


class ArchiveIntegrityError(Exception):
    """The stored archive does not match its manifest checksum."""


# --------------------------------------------------------------------------
# URL-list ingestion


@dataclass(frozen=True)
class RejectedLine:
    line_no: int
    text: str
    reason: str


@dataclass(frozen=True)
class UrlListResult:
    records: tuple[UrlRecord, ...]
    rejects: tuple[RejectedLine, ...]


def _is_number(token: str) -> bool:
    try:
        float(token)
    except ValueError:
        return False
    return True


def parse_url_list(text: str) -> UrlListResult:
    """Extract URL records from a list file, never dropping anything silently.

    Accepts one-URL-per-line lists as well as numbered multi-column layouts;
    numeric tokens (row indices, recorded response times) are stripped. Lines
    starting with '#' are comments. A line containing any token that is
    neither numeric nor a parseable URL yields one entry in the rejects list,
    while its parseable URLs are still kept.
    """
    records: list[UrlRecord] = []
    rejects: list[RejectedLine] = []
    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        bad_tokens = []
        for token in line.split():
            if _is_number(token):
                continue
            try:
                records.append(UrlRecord.from_url(token))
            except ValueError:
                bad_tokens.append(token)
        if bad_tokens:
            rejects.append(
                RejectedLine(
                    line_no=line_no,
                    text=raw_line,
                    reason="unparseable fragment(s): " + ", ".join(repr(t) for t in bad_tokens),
                )
            )
    return UrlListResult(records=tuple(records), rejects=tuple(rejects))


def emit_url_list(records: Iterable[UrlRecord]) -> str:
    """One URL per line; parse_url_list() is its inverse on well-formed lists."""
    return "\n".join(record.url for record in records) + "\n"


# --------------------------------------------------------------------------
# Census table


def _census_rows(census: CensusTable) -> list[StatusClass]:
    extras = sorted(
        (c for c in census.counts if c not in CENSUS_ROW_ORDER and census.counts[c]),
        key=lambda c: c.code or 0,
    )
    return [*CENSUS_ROW_ORDER, *extras]


def emit_census(census: CensusTable, fmt: str = "text") -> str:
    """Render a census table; text mode mirrors the printed survey layout."""
    rows = _census_rows(census)
    columns = [*CENSUS_COLUMN_ORDER, *(c for c in rows if c not in CENSUS_ROW_ORDER)]
    if fmt == "json":
        doc = {c.label: census.count(c) for c in columns}
        doc["total"] = census.total
        return json.dumps(doc, sort_keys=True) + "\n"
    header = ["Description : Error Code", *(c.label for c in columns), "Grand Total"]
    table = [header]
    for row in rows:
        cells = [str(census.count(row)) if row == col else "" for col in columns]
        table.append([row.description, *cells, str(census.count(row))])
    table.append(
        ["Grand Total", *(str(census.count(c)) for c in columns), str(census.total)]
    )
    if fmt == "csv":
        return _to_csv(table)
    if fmt == "text":
        return _to_text(table)
    raise ValueError(f"unknown format: {fmt!r}")


def parse_census_json(text: str) -> CensusTable:
    doc = json.loads(text)
    total = doc.pop("total")
    counts = {_class_from_label(label): count for label, count in doc.items()}
    return CensusTable(counts=counts, total=total)


def _class_from_label(label: str) -> StatusClass:
    return BLANK0 if label == "0" else classify_status(int(label))


# --------------------------------------------------------------------------
# Sample plan table


def calculation_string(n: int, population: int, total: int, allocation: int) -> str:
    return f"{n} x {population} / {total} = {n * population / total:.2f} = {allocation}"


def emit_sample_plan(plans: Sequence[StratumPlan], sample_size: int, fmt: str = "text") -> str:
    """Render an allocation plan in the survey's strata/population/sample shape."""
    total_population = sum(plan.population_size for plan in plans)
    if fmt == "json":
        doc = {
            "sample_size": sample_size,
            "strata": [
                {
                    "stratum": plan.label.label,
                    "population": plan.population_size,
                    "allocation": plan.allocation,
                    "members": [r.url for r in plan.members],
                    "sample": [r.url for r in plan.sample],
                }
                for plan in plans
            ],
        }
        return json.dumps(doc, sort_keys=True) + "\n"
    table = [["Strata", "Known Population", "Calculations", "Sample"]]
    for plan in plans:
        table.append(
            [
                plan.label.label,
                str(plan.population_size),
                calculation_string(sample_size, plan.population_size, total_population, plan.allocation),
                str(plan.allocation),
            ]
        )
    table.append(["", "", "", str(sum(plan.allocation for plan in plans))])
    if fmt == "csv":
        return _to_csv(table)
    if fmt == "text":
        return _to_text(table)
    raise ValueError(f"unknown format: {fmt!r}")


def parse_sample_plan_json(text: str) -> tuple[list[StratumPlan], int]:
    doc = json.loads(text)
    plans = []
    for entry in doc["strata"]:
        members = tuple(UrlRecord.from_url(u) for u in entry["members"])
        sample = tuple(UrlRecord.from_url(u) for u in entry["sample"])
        plans.append(
            StratumPlan(
                label=_class_from_label(entry["stratum"]),
                population_size=entry["population"],
                allocation=entry["allocation"],
                members=members,
                sample=sample,
            )
        )
    return plans, doc["sample_size"]


# --------------------------------------------------------------------------
# Success tables


def _success_order(rows: Iterable[SuccessRow]) -> list[SuccessRow]:
    def key(row: SuccessRow):
        try:
            return (0, SUCCESS_ROW_ORDER.index(row.stratum))
        except ValueError:
            return (1, row.stratum.code or 0)

    return sorted(rows, key=key)


def emit_success(table: SuccessTable, fmt: str = "text") -> str:
    if fmt == "json":
        doc = [
            {
                "stratum": row.stratum.label,
                "path": row.path_label,
                "success_pct": row.success_pct,
                "numerator": row.numerator,
                "denominator": row.denominator,
            }
            for row in table.rows
        ]
        return json.dumps(doc, sort_keys=True) + "\n"
    rows = _success_order(table.rows)
    label = rows[0].path_label if rows else ""
    grid = [["Error Code", "Description", f"{label} Success %"]]
    for row in rows:
        grid.append([row.stratum.label, row.stratum.description, str(row.success_pct)])
    if fmt == "csv":
        return _to_csv(grid)
    if fmt == "text":
        return _to_text(grid)
    raise ValueError(f"unknown format: {fmt!r}")


def emit_success_comparison(tables: Sequence[SuccessTable], fmt: str = "text") -> str:
    """Juxtapose several paths' success tables into one row-per-stratum grid."""
    if fmt == "json":
        doc = [json.loads(emit_success(t, "json")) for t in tables]
        return json.dumps(doc, sort_keys=True) + "\n"
    strata: list[StatusClass] = []
    for table in tables:
        for row in _success_order(table.rows):
            if row.stratum not in strata:
                strata.append(row.stratum)
    labels = [table.rows[0].path_label if table.rows else "" for table in tables]
    grid = [["Error Code", "Description", *(f"{label} Success %" for label in labels)]]
    by_stratum = [
        {row.stratum: row for row in table.rows} for table in tables
    ]
    for stratum in strata:
        cells = []
        for mapping in by_stratum:
            row = mapping.get(stratum)
            cells.append(str(row.success_pct) if row else "")
        grid.append([stratum.label, stratum.description, *cells])
    if fmt == "csv":
        return _to_csv(grid)
    if fmt == "text":
        return _to_text(grid)
    raise ValueError(f"unknown format: {fmt!r}")


def parse_success_json(text: str) -> SuccessTable:
    doc = json.loads(text)
    rows = tuple(
        SuccessRow(
            stratum=_class_from_label(entry["stratum"]),
            path_label=entry["path"],
            success_pct=entry["success_pct"],
            numerator=entry["numerator"],
            denominator=entry["denominator"],
        )
        for entry in doc
    )
    return SuccessTable(rows=rows)


# --------------------------------------------------------------------------
# Triage table


def emit_triage(counts: Mapping[TriageStatus, int], fmt: str = "text") -> str:
    total = sum(counts.values())
    if fmt == "json":
        doc = {status.value: counts.get(status, 0) for status in TriageStatus}
        doc["total"] = total
        return json.dumps(doc, sort_keys=True) + "\n"
    grid = [["Status of websites with blank error codes", "No. of Domains"]]
    for status in (TriageStatus.PURCHASABLE, TriageStatus.NO_A_RECORD):
        grid.append([_TRIAGE_LABELS[status], str(counts.get(status, 0))])
    if counts.get(TriageStatus.RESOLVABLE):
        grid.append([_TRIAGE_LABELS[TriageStatus.RESOLVABLE], str(counts[TriageStatus.RESOLVABLE])])
    grid.append(["Total No of Websites", str(total)])
    if fmt == "csv":
        return _to_csv(grid)
    if fmt == "text":
        return _to_text(grid)
    raise ValueError(f"unknown format: {fmt!r}")


def parse_triage_json(text: str) -> dict[TriageStatus, int]:
    doc = json.loads(text)
    return {status: doc.get(status.value, 0) for status in TriageStatus}


# --------------------------------------------------------------------------
# Rendering helpers


def _to_csv(rows: Sequence[Sequence[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _to_text(rows: Sequence[Sequence[str]]) -> str:
    widths = [0] * max(len(r) for r in rows)
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = []
    for row in rows:
        padded = [cell.ljust(widths[i]) for i, cell in enumerate(row)]
        lines.append("  ".join(padded).rstrip())
    return "\n".join(lines) + "\n"


# --------------------------------------------------------------------------
# Run archives


@dataclass(frozen=True)
class RunArchive:
    """Everything one pipeline run produced, in a persistable bundle."""

    run_id: str
    created_at: str
    census: Optional[CensusTable] = None
    plans: tuple[StratumPlan, ...] = ()
    success_tables: tuple[SuccessTable, ...] = ()
    triage_counts: Mapping[TriageStatus, int] = field(default_factory=dict)
    config_snapshot: Mapping[str, object] = field(default_factory=dict)
    results: tuple[ProbeResult, ...] = ()
    sample_size: int = 0

    def __post_init__(self) -> None:
        if not self.run_id:
            raise ValueError("run_id must not be empty")
        object.__setattr__(self, "plans", tuple(self.plans))
        object.__setattr__(self, "success_tables", tuple(self.success_tables))
        object.__setattr__(self, "triage_counts", dict(self.triage_counts))
        object.__setattr__(self, "config_snapshot", dict(self.config_snapshot))
        object.__setattr__(self, "results", tuple(self.results))

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "schema_version": ARCHIVE_SCHEMA_VERSION,
            "run_id": self.run_id,
            "created_at": self.created_at,
            "census": None if self.census is None else json.loads(emit_census(self.census, "json")),
            "plans": None
            if not self.plans
            else json.loads(emit_sample_plan(self.plans, self.sample_size, "json")),
            "success_tables": [json.loads(emit_success(t, "json")) for t in self.success_tables],
            "triage_counts": {s.value: c for s, c in self.triage_counts.items()},
            "config_snapshot": dict(self.config_snapshot),
            "results": [_result_to_dict(r) for r in self.results],
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, object]) -> "RunArchive":
        version = doc.get("schema_version")
        if version != ARCHIVE_SCHEMA_VERSION:
            raise ArchiveIntegrityError(f"unsupported archive schema version: {version!r}")
        census = None
        if doc.get("census") is not None:
            census = parse_census_json(json.dumps(doc["census"]))
        plans: tuple[StratumPlan, ...] = ()
        sample_size = 0
        if doc.get("plans") is not None:
            parsed, sample_size = parse_sample_plan_json(json.dumps(doc["plans"]))
            plans = tuple(parsed)
        success_tables = tuple(
            parse_success_json(json.dumps(entry)) for entry in doc.get("success_tables", ())
        )
        triage = {
            status: doc.get("triage_counts", {}).get(status.value, 0)  # type: ignore[union-attr]
            for status in TriageStatus
            if status.value in doc.get("triage_counts", {})  # type: ignore[operator]
        }
        results = tuple(_result_from_dict(entry) for entry in doc.get("results", ()))
        return cls(
            run_id=str(doc["run_id"]),
            created_at=str(doc["created_at"]),
            census=census,
            plans=plans,
            success_tables=success_tables,
            triage_counts=triage,
            config_snapshot=dict(doc.get("config_snapshot", {})),  # type: ignore[arg-type]
            results=results,
            sample_size=sample_size,
        )


def _result_to_dict(result: ProbeResult) -> dict:
    return {
        "url": result.record.url,
        "status": result.raw_status,
        "response_time": result.response_time,
        "error_note": result.error_note,
        "body_excerpt": None
        if result.body_excerpt is None
        else base64.b64encode(result.body_excerpt).decode("ascii"),
    }


def _result_from_dict(doc: Mapping[str, object]) -> ProbeResult:
    raw_status = doc.get("status")
    excerpt = doc.get("body_excerpt")
    return ProbeResult(
        record=UrlRecord.from_url(str(doc["url"])),
        status=classify_status(raw_status),  # type: ignore[arg-type]
        raw_status=raw_status,  # type: ignore[arg-type]
        response_time=float(doc.get("response_time", 0.0)),  # type: ignore[arg-type]
        body_excerpt=None if excerpt is None else base64.b64decode(str(excerpt)),
        error_note=doc.get("error_note"),  # type: ignore[arg-type]
    )


def _payload_bytes(archive: RunArchive) -> bytes:
    return (json.dumps(archive.to_dict(), sort_keys=True, indent=2) + "\n").encode("utf-8")


def persist_run(archive: RunArchive, store_path: str | Path) -> Path:
    """Write an archive under ``store_path/<run_id>/`` atomically; returns the directory."""
    run_dir = Path(store_path) / archive.run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    payload = _payload_bytes(archive)
    manifest = {
        "schema_version": ARCHIVE_SCHEMA_VERSION,
        "run_id": archive.run_id,
        "created_at": archive.created_at,
        "sha256": hashlib.sha256(payload).hexdigest(),
    }
    _atomic_write(run_dir / "payload.json", payload)
    _atomic_write(
        run_dir / "manifest.json",
        (json.dumps(manifest, sort_keys=True, indent=2) + "\n").encode("utf-8"),
    )
    return run_dir


def load_run(run_id: str, store_path: str | Path) -> RunArchive:
    """Load and checksum-verify an archive; raises if missing or corrupt."""
    run_dir = Path(store_path) / run_id
    manifest_path = run_dir / "manifest.json"
    payload_path = run_dir / "payload.json"
    if not manifest_path.is_file() or not payload_path.is_file():
        raise ArchiveNotFoundError(f"no archive for run id {run_id!r} under {store_path}")
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    payload = payload_path.read_bytes()
    digest = hashlib.sha256(payload).hexdigest()
    if digest != manifest.get("sha256"):
        raise ArchiveIntegrityError(
            f"archive {run_id!r} is corrupt: checksum {digest} != manifest {manifest.get('sha256')}"
        )
    archive = RunArchive.from_dict(json.loads(payload.decode("utf-8")))
    if archive.run_id != run_id:
        raise ArchiveIntegrityError(
            f"archive payload claims run id {archive.run_id!r}, expected {run_id!r}"
        )
    return archive


def _atomic_write(path: Path, data: bytes) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
