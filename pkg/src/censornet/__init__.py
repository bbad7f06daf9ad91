"""censornet: audit toolkit for DNS-based website blocking.

Offline-first: the whole pipeline (status census, stratified sampling,
cross-vantage DNS audit, circumvention testing, blank-domain triage) runs
against an embedded, deterministic simulation of a DNS-interception blocking
deployment; live-network adapters sit behind the same ports.
"""

from .circumvention import CircumventionResult, SuccessRow, SuccessTable, dual_path_fetch, success_by_stratum
from .dns_audit import (
    DnsAnswer,
    DnsObservation,
    DnsVerdict,
    FixtureMap,
    Rcode,
    TriageStatus,
    VerdictKind,
    compare_vantages,
    resolve_a,
    triage_blank,
)
from .model import (
    BLANK0,
    FOUND302,
    MOVED301,
    OK200,
    CensusTable,
    PageOutcome,
    ProbeResult,
    StatusClass,
    StratumPlan,
    UrlRecord,
    build_census,
    classify_status,
)
from .prober import (
    FailureKind,
    FingerprintSet,
    ProbePolicy,
    TransportReply,
    detect_block_page,
    load_fingerprints,
    probe_url,
    run_census,
)
from .report import RunArchive, load_run, parse_url_list, persist_run
from .sampling import (
    SampleSizeResult,
    SamplingParams,
    allocate_strata,
    draw_sample,
    fpc_sample_size,
    initial_sample_size,
    round_half_up,
    sample_size,
)
from .simnet import SimConfig, SimEvent, Simulation

__version__ = "0.1.0"
