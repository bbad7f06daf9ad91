from __future__ import annotations

import json
import threading

import pytest

import helpers
from censornet.dns_audit import Rcode
from censornet.model import PageOutcome
from censornet.prober import FailureKind, ProbePolicy
from censornet.simnet import (
    TAMPER_DROP,
    ConnectionRefused,
    EventKind,
    ScriptedHttp,
    SimConfig,
    Simulation,
)

BLOCKED_TRACE = (
    EventKind.DNS_QUERY,
    EventKind.DNS_INTERCEPTED,
    EventKind.HTTP_REQUEST,
    EventKind.BLOCK_PAGE_SERVED,
)
ALLOWED_TRACE = (
    EventKind.DNS_QUERY,
    EventKind.DNS_FORWARDED,
    EventKind.HTTP_REQUEST,
    EventKind.CONTENT_SERVED,
)


def kinds(events):
    return tuple(e.kind for e in events)


class TestConfig:
    def test_block_server_must_stay_out_of_zone(self):
        with pytest.raises(ValueError):
            SimConfig(
                upstream_zone={"a.example": frozenset({"198.51.100.99"})},
                block_server_ip="198.51.100.99",
            )

    def test_scripted_latency_must_be_non_negative(self):
        with pytest.raises(ValueError):
            ScriptedHttp(status=200, latency=-1.0)

    def test_unknown_tamper_mode_rejected(self):
        with pytest.raises(ValueError):
            SimConfig(tamper_mode="mangle")

    def test_json_round_trip(self, tmp_path):
        config = helpers.two_path_config()
        path = tmp_path / "sim.json"
        path.write_text(config.to_json())
        assert SimConfig.from_file(path) == config

    def test_toml_loading(self, tmp_path):
        path = tmp_path / "sim.toml"
        path.write_text(
            'blocklist = ["blocked.example"]\n'
            'block_server_ip = "198.51.100.99"\n'
            "[upstream_zone]\n"
            '"blocked.example" = ["203.0.113.9"]\n'
            "[intercept_enabled]\n"
            "default = true\n"
            "clean = false\n"
        )
        config = SimConfig.from_file(path)
        assert "blocked.example" in config.blocklist
        assert config.intercepts("default")
        assert not config.intercepts("clean")


class TestInterceptQuery:
    def test_blocked_domain_gets_block_server(self, two_path_sim):
        answer = two_path_sim.intercept_query("blockedsite.example")
        assert answer.addresses == frozenset({two_path_sim.config.block_server_ip})

    def test_allowed_domain_gets_zone_answer(self, two_path_sim):
        answer = two_path_sim.intercept_query("allowedsite.example")
        assert answer.addresses == frozenset({"203.0.113.7"})

    def test_unknown_domain_gets_nxdomain(self, two_path_sim):
        answer = two_path_sim.intercept_query("unknown.example")
        assert answer.rcode == Rcode.NXDOMAIN

    def test_non_intercepting_path_sees_upstream_truth(self, two_path_sim):
        answer = two_path_sim.intercept_query("blockedsite.example", path="clean")
        assert answer.addresses == frozenset({"203.0.113.9"})

    def test_drop_mode_times_out(self):
        sim = Simulation(helpers.two_path_config(tamper_mode=TAMPER_DROP))
        answer = sim.intercept_query("blockedsite.example")
        assert answer.rcode == Rcode.TIMEOUT
        assert answer.addresses == frozenset()


class TestServeHttp:
    def test_block_server_serves_the_block_page(self, two_path_sim):
        status, body = two_path_sim.serve_http(
            two_path_sim.config.block_server_ip, "blockedsite.example"
        )
        assert status == 200
        assert "Web Page Blocked!" in body

    def test_zone_address_serves_content_without_fingerprint(self, two_path_sim):
        status, body = two_path_sim.serve_http("203.0.113.7", "allowedsite.example")
        assert status == 200
        assert "Web Page Blocked!" not in body

    def test_scripted_redirect_has_empty_body(self):
        sim = Simulation(
            SimConfig(
                upstream_zone={"moved.example": frozenset({"203.0.113.5"})},
                scripted_http={"moved.example": ScriptedHttp(status=301)},
            )
        )
        assert sim.serve_http("203.0.113.5", "moved.example") == (301, "")

    def test_unknown_address_refuses_connection(self, two_path_sim):
        with pytest.raises(ConnectionRefused):
            two_path_sim.serve_http("192.0.2.200", "allowedsite.example")

    def test_configurable_block_page_status(self):
        sim = Simulation(helpers.two_path_config(block_page_status=403))
        status, _ = sim.serve_http(sim.config.block_server_ip, "blockedsite.example")
        assert status == 403


class TestEndToEnd:
    def test_blocked_flow_and_trace(self, two_path_sim):
        outcome, events = two_path_sim.end_to_end("blockedsite.example")
        assert outcome == PageOutcome.BLOCK_PAGE
        assert kinds(events) == BLOCKED_TRACE

    def test_allowed_flow_and_trace(self, two_path_sim):
        outcome, events = two_path_sim.end_to_end("allowedsite.example")
        assert outcome == PageOutcome.CONTENT
        assert kinds(events) == ALLOWED_TRACE

    def test_blocked_domain_on_clean_path_reaches_content(self, two_path_sim):
        outcome, events = two_path_sim.end_to_end("blockedsite.example", path="clean")
        assert outcome == PageOutcome.CONTENT
        assert kinds(events) == ALLOWED_TRACE

    def test_absent_domain_is_unreachable(self, two_path_sim):
        outcome, events = two_path_sim.end_to_end("nowhere.example")
        assert outcome == PageOutcome.UNREACHABLE
        assert kinds(events) == (EventKind.DNS_QUERY, EventKind.DNS_FORWARDED)

    def test_drop_mode_is_unreachable(self):
        sim = Simulation(helpers.two_path_config(tamper_mode=TAMPER_DROP))
        outcome, events = sim.end_to_end("blockedsite.example")
        assert outcome == PageOutcome.UNREACHABLE
        assert kinds(events) == (EventKind.DNS_QUERY, EventKind.DNS_INTERCEPTED)

    def test_cross_path_outcomes_differ_for_blocked_domain(self, two_path_sim):
        intercepted, _ = two_path_sim.end_to_end("blockedsite.example", path="default")
        clean, _ = two_path_sim.end_to_end("blockedsite.example", path="clean")
        assert intercepted != clean

    def test_determinism_across_fresh_instances(self):
        def run():
            sim = Simulation(helpers.two_path_config())
            out = []
            for domain in ("blockedsite.example", "allowedsite.example", "nowhere.example"):
                outcome, events = sim.end_to_end(domain)
                out.append((domain, outcome, [(e.kind, e.domain, e.detail) for e in events]))
            return out

        assert run() == run()


class TestEventLog:
    def test_sequence_numbers_increase_within_a_run(self, two_path_sim):
        two_path_sim.end_to_end("blockedsite.example")
        two_path_sim.end_to_end("allowedsite.example")
        seqs = [e.seq for e in two_path_sim.events()]
        assert seqs == sorted(seqs)
        assert len(set(seqs)) == len(seqs)

    def test_concurrent_flows_keep_a_totally_ordered_log(self, two_path_sim):
        threads = [
            threading.Thread(target=two_path_sim.end_to_end, args=("blockedsite.example",))
            for _ in range(8)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        seqs = [e.seq for e in two_path_sim.events()]
        assert seqs == list(range(1, len(seqs) + 1))

    def test_event_export_is_json_lines(self, two_path_sim, tmp_path):
        two_path_sim.end_to_end("blockedsite.example")
        out = tmp_path / "trace.jsonl"
        two_path_sim.export_events(out)
        lines = out.read_text().splitlines()
        assert len(lines) == 4
        first = json.loads(lines[0])
        assert first["kind"] == "DnsQuery"
        assert first["domain"] == "blockedsite.example"


class TestVirtualClock:
    def test_transport_elapsed_is_exactly_the_scripted_latency(self):
        sim = Simulation(
            SimConfig(
                upstream_zone={"slow.example": frozenset({"203.0.113.5"})},
                scripted_http={"slow.example": ScriptedHttp(status=200, latency=0.25)},
            )
        )
        reply = sim.transport().request("http://slow.example/", "GET", ProbePolicy())
        assert reply.elapsed == 0.25
        assert sim.clock == 0.25

    def test_latency_beyond_total_timeout_times_out(self):
        sim = Simulation(
            SimConfig(
                upstream_zone={"slow.example": frozenset({"203.0.113.5"})},
                scripted_http={"slow.example": ScriptedHttp(status=200, latency=60.0)},
            )
        )
        reply = sim.transport().request(
            "http://slow.example/", "GET", ProbePolicy(total_timeout=5.0, connect_timeout=5.0)
        )
        assert reply.failure == FailureKind.TIMEOUT
        assert reply.elapsed == 5.0
