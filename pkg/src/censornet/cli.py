"""Command-line front end for the audit pipeline.

Subcommands: census, sample, audit-dns, circumvent, triage, simulate, report.
Every command runs against the simulator (--sim CONFIG) or, when explicitly
confirmed, the live network (--live --confirm-live). Option values resolve
with precedence defaults < config file < CENSORNET_* environment < flags.

Exit codes: 0 success, 1 live-mode audit found anomalies, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

from . import dns_audit, live, report, sampling, simnet
from .circumvention import dual_path_fetch, success_by_stratum
from .dns_audit import VerdictKind, compare_vantages, resolve_a, triage_blank, triage_counts
from .model import StatusClass, UrlRecord
from .prober import FingerprintSet, ProbePolicy, load_fingerprints, run_census
from .report import RunArchive, load_run, parse_url_list, persist_run

ENV_PREFIX = "CENSORNET_"

DEFAULT_FINGERPRINTS = FingerprintSet(
    patterns=("Web Page Blocked!", "The page you have requested has been blocked"),
)

_DEFAULTS = {
    "format": "text",
    "seed": 0,
    "timeout": 30.0,
    "parallel": 8,
    "out": None,
    "deterministic": False,
}


class CliError(Exception):
    """Anything that should abort with exit code 2 and a message."""


@dataclasses.dataclass(frozen=True)
class Settings:
    """Shared options after defaults/file/env/flags have been merged."""

    format: str
    seed: int
    timeout: float
    parallel: int
    out: Optional[str]
    deterministic: bool


def _load_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"config file not found: {path}")
    try:
        if p.suffix == ".toml":
            if sys.version_info >= (3, 11):
                import tomllib
            else:
                import tomli as tomllib
            with p.open("rb") as fh:
                return dict(tomllib.load(fh))
        return dict(json.loads(p.read_text(encoding="utf-8")))
    except ValueError as exc:
        raise CliError(f"config file {path} is not valid: {exc}")


def _as_bool(value: object) -> bool:
    if isinstance(value, bool):
        return value
    return str(value).strip().lower() in ("1", "true", "yes", "on")


def resolve_settings(args: argparse.Namespace, environ: Optional[dict] = None) -> Settings:
    env = dict(os.environ if environ is None else environ)
    config_path = args.config or env.get(ENV_PREFIX + "CONFIG")
    file_cfg = _load_config_file(config_path) if config_path else {}

    def pick(key: str, cast):
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            return flag_value
        env_value = env.get(ENV_PREFIX + key.upper())
        if env_value is not None:
            try:
                return cast(env_value)
            except ValueError:
                raise CliError(f"bad value for {ENV_PREFIX}{key.upper()}: {env_value!r}")
        if key in file_cfg:
            return cast(file_cfg[key])
        return _DEFAULTS[key]

    fmt = pick("format", str)
    if fmt not in ("text", "csv", "json"):
        raise CliError(f"unknown format: {fmt!r}")
    return Settings(
        format=fmt,
        seed=pick("seed", int),
        timeout=pick("timeout", float),
        parallel=pick("parallel", int),
        out=pick("out", str),
        deterministic=pick("deterministic", _as_bool),
    )


# --------------------------------------------------------------------------
# Shared helpers


def _created_at(settings: Settings) -> str:
    if settings.deterministic:
        return "1970-01-01T00:00:00+00:00"
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _run_id(args: argparse.Namespace, settings: Settings) -> str:
    if getattr(args, "run_id", None):
        return args.run_id
    if settings.deterministic:
        return "run-0"
    return f"run-{int(time.time() * 1000):x}"


def _policy(settings: Settings) -> ProbePolicy:
    return ProbePolicy(
        connect_timeout=min(10.0, settings.timeout),
        total_timeout=settings.timeout,
        max_parallel=settings.parallel,
    )


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}")


def _load_sim(args: argparse.Namespace) -> simnet.Simulation:
    if not getattr(args, "sim", None):
        raise CliError("this command needs --sim CONFIG (or --live with --confirm-live)")
    try:
        config = simnet.SimConfig.from_file(args.sim)
    except (OSError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load simulator config {args.sim}: {exc}")
    return simnet.Simulation(config)


def _live_gate(args: argparse.Namespace) -> None:
    if not getattr(args, "confirm_live", False):
        raise CliError(
            "--live probes real networks; add --confirm-live to state that "
            "you understand and are authorized to do so"
        )


def _records_from_file(path: str) -> tuple[list[UrlRecord], report.UrlListResult]:
    parsed = parse_url_list(_read_text(path))
    for reject in parsed.rejects:
        print(f"warning: {path}:{reject.line_no}: {reject.reason}", file=sys.stderr)
    if not parsed.records:
        raise CliError(f"no usable URLs in {path}")
    return list(parsed.records), parsed


def _domains_from_file(path: str) -> list[str]:
    """Read a domain list: bare hostnames or URLs, one or more per line."""
    domains: list[str] = []
    seen = set()
    for line in _read_text(path).splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        for token in line.split():
            try:
                float(token)
                continue
            except ValueError:
                pass
            if token.lower().startswith(("http://", "https://")):
                try:
                    domain = UrlRecord.from_url(token).domain
                except ValueError:
                    continue
            else:
                domain = token.lower().rstrip(".")
            if domain not in seen:
                seen.add(domain)
                domains.append(domain)
    if not domains:
        raise CliError(f"no usable domains in {path}")
    return domains


def _fingerprints(args: argparse.Namespace) -> FingerprintSet:
    if getattr(args, "fingerprints", None):
        try:
            return load_fingerprints(args.fingerprints)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot load fingerprints {args.fingerprints}: {exc}")
    return DEFAULT_FINGERPRINTS


def _snapshot(args: argparse.Namespace, settings: Settings, **extra) -> dict:
    doc = {
        "command": args.command,
        "format": settings.format,
        "seed": settings.seed,
        "timeout": settings.timeout,
        "parallel": settings.parallel,
        "deterministic": settings.deterministic,
    }
    doc.update(extra)
    return doc


# --------------------------------------------------------------------------
# Subcommands


def cmd_census(args: argparse.Namespace, settings: Settings) -> int:
    records, _parsed = _records_from_file(args.list_file)
    if args.live:
        _live_gate(args)
        transport = live.LiveTransport()
        sim_path = None
    else:
        sim = _load_sim(args)
        transport = sim.transport(path=args.path)
        sim_path = args.sim
    results, census = run_census(records, _policy(settings), transport)
    sys.stdout.write(report.emit_census(census, settings.format))
    if settings.out:
        archive = RunArchive(
            run_id=_run_id(args, settings),
            created_at=_created_at(settings),
            census=census,
            results=tuple(results),
            config_snapshot=_snapshot(args, settings, list_file=args.list_file, sim=sim_path),
        )
        run_dir = persist_run(archive, settings.out)
        print(f"archived run {archive.run_id} -> {run_dir}", file=sys.stderr)
    return 0


def cmd_sample(args: argparse.Namespace, settings: Settings) -> int:
    store = settings.out or args.store
    if not store:
        raise CliError("sample needs an archive store: --store DIR (or --out)")
    try:
        archive = load_run(args.census_run, store)
    except (report.ArchiveNotFoundError, report.ArchiveIntegrityError) as exc:
        raise CliError(str(exc))
    if not archive.results:
        raise CliError(f"archive {args.census_run} holds no probe results to sample from")
    params = sampling.SamplingParams(z=args.z, p=args.p, e=args.e, N=len(archive.results))
    size = sampling.sample_size(params)
    strata: dict[StatusClass, list[UrlRecord]] = {}
    for result in archive.results:
        strata.setdefault(result.status, []).append(result.record)
    ordered = sorted(strata.items(), key=lambda kv: (-len(kv[1]), kv[0].label))
    plans = sampling.plan_strata(size.n, ordered, settings.seed)
    sys.stdout.write(report.emit_sample_plan(plans, size.n, settings.format))
    if settings.format == "text":
        print(
            f"n0 = {size.n0_real:.2f} -> {size.n0}; corrected n = {size.n_real:.2f} -> {size.n}; "
            f"seed = {settings.seed}",
            file=sys.stderr,
        )
    updated = dataclasses.replace(
        archive,
        plans=tuple(plans),
        sample_size=size.n,
        config_snapshot={
            **archive.config_snapshot,
            "sample": {"z": args.z, "p": args.p, "e": args.e, "seed": settings.seed},
        },
    )
    persist_run(updated, store)
    return 0


def cmd_audit_dns(args: argparse.Namespace, settings: Settings) -> int:
    domains = _domains_from_file(args.list_file)
    block_ips = set(args.block_ip or ())
    if args.live:
        _live_gate(args)
        in_port = live.LiveDnsPort(timeout=settings.timeout)
        ref_port = live.LiveDnsPort(timeout=settings.timeout)
        in_label, ref_label = "local", "local-reference"
        resolver = "system"
    else:
        sim = _load_sim(args)
        in_port = sim.dns_port(path=args.in_path)
        ref_port = sim.dns_port(path=args.ref_path)
        in_label, ref_label = args.in_path, args.ref_path
        resolver = "simnet"
        block_ips.add(sim.config.block_server_ip)
    rows = []
    tampered = 0
    for domain in domains:
        in_obs = resolve_a(domain, in_label, resolver, in_port)
        ref_obs = resolve_a(domain, ref_label, resolver, ref_port)
        verdict = compare_vantages(in_obs, ref_obs, block_ips)
        if verdict.kind == VerdictKind.TAMPERED:
            tampered += 1
        rows.append((domain, in_obs, ref_obs, verdict))
    if settings.format == "json":
        doc = [
            {
                "domain": domain,
                "in_scope": sorted(in_obs.answers),
                "in_scope_rcode": in_obs.rcode.value,
                "reference": sorted(ref_obs.answers),
                "reference_rcode": ref_obs.rcode.value,
                "verdict": verdict.kind.value,
                "injected": sorted(verdict.injected),
            }
            for domain, in_obs, ref_obs, verdict in rows
        ]
        sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")
    else:
        for domain, in_obs, ref_obs, verdict in rows:
            detail = f" injected={','.join(sorted(verdict.injected))}" if verdict.injected else ""
            print(
                f"{domain}\t{verdict.kind.value}{detail}\t"
                f"in={in_obs.rcode.value}:{','.join(sorted(in_obs.answers)) or '-'}\t"
                f"ref={ref_obs.rcode.value}:{','.join(sorted(ref_obs.answers)) or '-'}"
            )
    if args.live and tampered:
        return 1
    return 0


def cmd_circumvent(args: argparse.Namespace, settings: Settings) -> int:
    store = settings.out or args.store
    if not store:
        raise CliError("circumvent needs an archive store: --store DIR (or --out)")
    try:
        archive = load_run(args.run, store)
    except (report.ArchiveNotFoundError, report.ArchiveIntegrityError) as exc:
        raise CliError(str(exc))
    if not archive.plans:
        raise CliError(f"archive {args.run} holds no sample plans; run `sample` first")
    sim = _load_sim(args)
    fp = _fingerprints(args)
    direct = sim.transport(path=args.direct_path)
    strata = {
        record: plan.label for plan in archive.plans for record in plan.sample
    }
    sample_records = [record for plan in archive.plans for record in plan.sample]
    tables = []
    for alt_label in args.alt_path:
        alt = sim.transport(path=alt_label)
        results = [dual_path_fetch(r, direct, alt, fp) for r in sample_records]
        tables.append(success_by_stratum(results, strata, alt_label))
    if len(tables) == 1:
        sys.stdout.write(report.emit_success(tables[0], settings.format))
    else:
        sys.stdout.write(report.emit_success_comparison(tables, settings.format))
    updated = dataclasses.replace(archive, success_tables=archive.success_tables + tuple(tables))
    persist_run(updated, store)
    return 0


def cmd_triage(args: argparse.Namespace, settings: Settings) -> int:
    if args.live:
        _live_gate(args)
        availability = live.RdapAvailabilityPort(timeout=settings.timeout)
        dns_port = live.LiveDnsPort(timeout=settings.timeout)
    else:
        if not args.availability:
            raise CliError("triage needs --availability FIXTURE.json (or --live)")
        try:
            fixture = dns_audit.FixtureMap.load(args.availability)
        except (OSError, ValueError) as exc:
            raise CliError(f"cannot load availability fixture: {exc}")
        availability = fixture.availability_port()
        dns_port = fixture.dns_port()
    try:
        domains = _domains_from_file(args.list_file)
    except CliError:
        if Path(args.list_file).is_file() and not _read_text(args.list_file).strip():
            sys.stdout.write(report.emit_triage({}, settings.format))
            return 0
        raise
    statuses = {}
    for domain in domains:
        try:
            statuses[domain] = triage_blank(domain, availability, dns_port)
        except dns_audit.AvailabilityLookupError as exc:
            raise CliError(f"availability lookup failed: {exc}")
    counts = triage_counts(statuses.values())
    sys.stdout.write(report.emit_triage(counts, settings.format))
    if settings.out:
        archive = RunArchive(
            run_id=_run_id(args, settings),
            created_at=_created_at(settings),
            triage_counts=counts,
            config_snapshot=_snapshot(args, settings, list_file=args.list_file),
        )
        persist_run(archive, settings.out)
    return 0


def cmd_simulate(args: argparse.Namespace, settings: Settings) -> int:
    sim = _load_sim(args)
    domains = _domains_from_file(args.list_file)
    flows = []
    for domain in domains:
        outcome, events = sim.end_to_end(domain, path=args.path)
        flows.append((domain, outcome, events))
    if settings.format == "json":
        doc = [
            {
                "domain": domain,
                "outcome": outcome.value,
                "events": [
                    {"seq": e.seq, "kind": e.kind.value, "domain": e.domain, "detail": e.detail}
                    for e in events
                ],
            }
            for domain, outcome, events in flows
        ]
        sys.stdout.write(json.dumps(doc, sort_keys=True) + "\n")
    else:
        for domain, outcome, events in flows:
            print(f"{domain}: {outcome.value}")
            for event in events:
                print(f"  {event.seq:>4}  {event.kind.value:<16} {event.detail}")
    if args.trace:
        sim.export_events(args.trace)
        print(f"event trace written to {args.trace}", file=sys.stderr)
    return 0


def cmd_report(args: argparse.Namespace, settings: Settings) -> int:
    store = settings.out or args.store
    if not store:
        raise CliError("report needs an archive store: --store DIR (or --out)")
    try:
        archive = load_run(args.run, store)
    except (report.ArchiveNotFoundError, report.ArchiveIntegrityError) as exc:
        raise CliError(str(exc))
    table = args.table
    if table == "census":
        if archive.census is None:
            raise CliError("archive holds no census")
        sys.stdout.write(report.emit_census(archive.census, settings.format))
    elif table == "plan":
        if not archive.plans:
            raise CliError("archive holds no sample plan")
        sys.stdout.write(report.emit_sample_plan(archive.plans, archive.sample_size, settings.format))
    elif table == "success":
        if not archive.success_tables:
            raise CliError("archive holds no success tables")
        if len(archive.success_tables) == 1:
            sys.stdout.write(report.emit_success(archive.success_tables[0], settings.format))
        else:
            sys.stdout.write(report.emit_success_comparison(archive.success_tables, settings.format))
    elif table == "triage":
        sys.stdout.write(report.emit_triage(archive.triage_counts, settings.format))
    else:
        raise CliError(f"unknown table: {table!r}")
    return 0


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="censornet",
        description="Audit DNS-based website blocking: census, sampling, DNS audit, "
        "circumvention testing, triage and an offline blocking simulator.",
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (json or toml) for shared options")
    common.add_argument("--sim", help="simulator config file; runs offline against it")
    common.add_argument("--live", action="store_true", help="probe the real network")
    common.add_argument(
        "--confirm-live",
        action="store_true",
        help="required with --live: confirms you understand this probes real networks",
    )
    common.add_argument("--seed", type=int, default=None, help="seed for all random draws")
    common.add_argument("--timeout", type=float, default=None, help="total timeout per request (s)")
    common.add_argument("--parallel", type=int, default=None, help="max requests in flight")
    common.add_argument("--format", choices=("text", "csv", "json"), default=None)
    common.add_argument("--out", default=None, help="archive store directory")
    common.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="fixed timestamps and run ids, for reproducible reports",
    )
    common.add_argument("--run-id", default=None, help="explicit run id for the archive")

    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("census", parents=[common], help="bulk HTTP status census over a URL list")
    p.add_argument("list_file", help="URL list (plain or numbered columns)")
    p.add_argument("--path", default="default", help="simulator path label to probe from")
    p.set_defaults(func=cmd_census)

    p = sub.add_parser("sample", parents=[common], help="sample-size arithmetic and stratified draw")
    p.add_argument("--store", help="archive store holding the census run")
    p.add_argument("--census-run", required=True, help="run id of the census archive")
    p.add_argument("--z", type=float, default=1.96, help="z critical value (default 1.96)")
    p.add_argument("--p", type=float, default=0.5, help="estimated proportion (default 0.5)")
    p.add_argument("--e", type=float, default=0.05, help="margin of error (default 0.05)")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("audit-dns", parents=[common], help="cross-vantage A-record comparison")
    p.add_argument("list_file", help="domain or URL list")
    p.add_argument("--in-path", default="default", help="in-scope simulator path label")
    p.add_argument("--ref-path", default="reference", help="reference simulator path label")
    p.add_argument(
        "--block-ip", action="append", help="known block-server address (repeatable)"
    )
    p.set_defaults(func=cmd_audit_dns)

    p = sub.add_parser("circumvent", parents=[common], help="dual-path fetch success rates")
    p.add_argument("--store", help="archive store holding the sampled run")
    p.add_argument("--run", required=True, help="run id of the archive with sample plans")
    p.add_argument("--direct-path", default="default", help="direct (intercepted) path label")
    p.add_argument(
        "--alt-path",
        action="append",
        required=True,
        help="alternate path label (repeatable for side-by-side tables)",
    )
    p.add_argument("--fingerprints", help="block-page fingerprint file")
    p.set_defaults(func=cmd_circumvent)

    p = sub.add_parser("triage", parents=[common], help="triage unresolvable domains")
    p.add_argument("list_file", help="domain or URL list")
    p.add_argument("--availability", help="scripted availability fixture (json)")
    p.set_defaults(func=cmd_triage)

    p = sub.add_parser(
        "simulate", parents=[common], help="trace end-to-end DNS+HTTP flows through the simulator"
    )
    p.add_argument("list_file", help="domain or URL list")
    p.add_argument("--path", default="default", help="path label to simulate from")
    p.add_argument("--trace", help="write the full event log as JSON lines")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", parents=[common], help="re-emit tables from an archive")
    p.add_argument("--store", help="archive store directory")
    p.add_argument("--run", required=True, help="run id to load")
    p.add_argument("--table", required=True, choices=("census", "plan", "success", "triage"))
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = resolve_settings(args)
        return args.func(args, settings)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
