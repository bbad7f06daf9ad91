from __future__ import annotations

import json

import pytest
from censornet.dns_audit import (
    AvailabilityLookupError,
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
    triage_counts,
)

BLOCK_IP = "198.51.100.99"
ZONE_IP = "203.0.113.7"


def obs(answers=(), rcode=Rcode.NOERROR, domain="x.example", vantage="v", resolver="r"):
    return DnsObservation(
        domain=domain, vantage=vantage, resolver=resolver, answers=frozenset(answers), rcode=rcode
    )


class TestObservationInvariants:
    def test_answers_require_noerror(self):
        with pytest.raises(ValueError):
            obs(answers={ZONE_IP}, rcode=Rcode.NXDOMAIN)
        with pytest.raises(ValueError):
            DnsAnswer(rcode=Rcode.SERVFAIL, addresses=frozenset({ZONE_IP}))

    def test_verdict_invariants(self):
        with pytest.raises(ValueError):
            DnsVerdict(kind=VerdictKind.TAMPERED)
        with pytest.raises(ValueError):
            DnsVerdict(kind=VerdictKind.CONSISTENT, injected=frozenset({BLOCK_IP}))


class TestResolveA:
    def test_zone_answer_comes_back_exactly(self, two_path_sim):
        observation = resolve_a("allowedsite.example", "in", "sim", two_path_sim.dns_port())
        assert observation.answers == frozenset({"203.0.113.7"})
        assert observation.rcode == Rcode.NOERROR

    def test_absent_domain_is_nxdomain(self, two_path_sim):
        observation = resolve_a("ghost.example", "in", "sim", two_path_sim.dns_port())
        assert observation.rcode == Rcode.NXDOMAIN
        assert observation.answers == frozenset()

    def test_intercepted_domain_returns_block_server(self, two_path_sim):
        observation = resolve_a("blockedsite.example", "in", "sim", two_path_sim.dns_port())
        assert observation.answers == frozenset({two_path_sim.config.block_server_ip})

    @pytest.mark.parametrize("bad", ["", "has space.example", "bad..example", "a" * 300 + ".com"])
    def test_malformed_hostnames_raise(self, bad, two_path_sim):
        with pytest.raises(ValueError):
            resolve_a(bad, "in", "sim", two_path_sim.dns_port())


class TestCompareVantages:
    def test_identical_answers_are_consistent(self):
        assert compare_vantages(obs({ZONE_IP}), obs({ZONE_IP}), {BLOCK_IP}).kind == VerdictKind.CONSISTENT

    def test_block_ip_divergence_is_tampering(self):
        verdict = compare_vantages(obs({"198.51.100.1"}), obs({ZONE_IP}), {"198.51.100.1"})
        assert verdict.kind == VerdictKind.TAMPERED
        assert verdict.injected == frozenset({"198.51.100.1"})

    def test_double_failure_is_unresolvable(self):
        verdict = compare_vantages(
            obs(rcode=Rcode.NXDOMAIN), obs(rcode=Rcode.NXDOMAIN), {BLOCK_IP}
        )
        assert verdict.kind == VerdictKind.UNRESOLVABLE_EVERYWHERE

    def test_servfail_and_timeout_count_as_failures_alike(self):
        verdict = compare_vantages(obs(rcode=Rcode.SERVFAIL), obs(rcode=Rcode.TIMEOUT), {BLOCK_IP})
        assert verdict.kind == VerdictKind.UNRESOLVABLE_EVERYWHERE

    def test_non_block_divergence_is_unknown(self):
        verdict = compare_vantages(obs({"192.0.2.1"}), obs({ZONE_IP}), {BLOCK_IP})
        assert verdict.kind == VerdictKind.DIVERGENT_UNKNOWN

    def test_matching_block_ips_everywhere_is_consistent(self):
        # both vantages seeing the block server is not divergence
        verdict = compare_vantages(obs({BLOCK_IP}), obs({BLOCK_IP}), {BLOCK_IP})
        assert verdict.kind == VerdictKind.CONSISTENT

    def test_domain_mismatch_rejected(self):
        with pytest.raises(ValueError):
            compare_vantages(obs(domain="a.example"), obs(domain="b.example"), set())

    def test_reflexive_on_resolvable_observations(self):
        for answers in ({ZONE_IP}, {ZONE_IP, "203.0.113.8"}, {BLOCK_IP}):
            observation = obs(answers)
            assert (
                compare_vantages(observation, observation, {BLOCK_IP}).kind
                == VerdictKind.CONSISTENT
            )

    def test_every_state_pair_yields_exactly_one_verdict(self):
        states = [
            obs({ZONE_IP}),
            obs({BLOCK_IP}),
            obs(),
            obs(rcode=Rcode.NXDOMAIN),
            obs(rcode=Rcode.SERVFAIL),
            obs(rcode=Rcode.TIMEOUT),
        ]
        for in_scope in states:
            for reference in states:
                verdict = compare_vantages(in_scope, reference, {BLOCK_IP})
                assert isinstance(verdict, DnsVerdict)
                assert verdict.kind in VerdictKind


class TestTriage:
    @pytest.fixture()
    def fixture_map(self, tmp_path):
        doc = {
            "open.example": {"available": True, "a_records": []},
            "parked.example": {"available": False, "a_records": []},
            "alive.example": {"available": False, "a_records": ["203.0.113.10"]},
            "mx-only.example": {"available": False, "a_records": []},
        }
        path = tmp_path / "availability.json"
        path.write_text(json.dumps(doc))
        return FixtureMap.load(path)

    def test_available_domain_is_purchasable(self, fixture_map):
        status = triage_blank("open.example", fixture_map.availability_port(), fixture_map.dns_port())
        assert status == TriageStatus.PURCHASABLE

    def test_registered_without_a_record(self, fixture_map):
        status = triage_blank("parked.example", fixture_map.availability_port(), fixture_map.dns_port())
        assert status == TriageStatus.NO_A_RECORD

    def test_registered_with_only_non_a_records(self, fixture_map):
        status = triage_blank("mx-only.example", fixture_map.availability_port(), fixture_map.dns_port())
        assert status == TriageStatus.NO_A_RECORD

    def test_resolvable_domain(self, fixture_map):
        status = triage_blank("alive.example", fixture_map.availability_port(), fixture_map.dns_port())
        assert status == TriageStatus.RESOLVABLE

    def test_unknown_domain_fails_loudly(self, fixture_map):
        with pytest.raises(AvailabilityLookupError):
            triage_blank("mystery.example", fixture_map.availability_port(), fixture_map.dns_port())

    def test_blank_stratum_fixture_splits_24_21(self, data_dir):
        fixture = FixtureMap.load(data_dir / "blank_availability.json")
        statuses = [
            triage_blank(d, fixture.availability_port(), fixture.dns_port())
            for d in fixture.domains()
        ]
        counts = triage_counts(statuses)
        assert counts[TriageStatus.PURCHASABLE] == 24
        assert counts[TriageStatus.NO_A_RECORD] == 21
        assert counts[TriageStatus.RESOLVABLE] == 0
        assert sum(counts.values()) == 45

    def test_counts_cover_all_statuses(self):
        counts = triage_counts([TriageStatus.PURCHASABLE])
        assert set(counts) == set(TriageStatus)
        assert counts[TriageStatus.NO_A_RECORD] == 0
