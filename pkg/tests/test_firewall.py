import math

import pytest
from hypothesis import given, settings, strategies as st

from fuzzwall.fuzzy import TABLE_I, default_rulebase
from fuzzwall.firewall import (
    AclAction,
    AclRule,
    ConventionalFirewall,
    FirewallConfigError,
    FlowOrderError,
    FlowStats,
    FuzzyFirewall,
    Kind,
    NoFirewall,
    PacketRecord,
    Verdict,
    Zone,
    decide,
    default_acl,
    default_thresholds,
)

CENTERS = {"Low": 0.0, "Medium": 0.5, "High": 1.0, "Medium-High": 0.75, "Low-Medium": 0.25}
_ids = iter(range(10**9))


def pkt(kind=Kind.HTTP_REQUEST, src="c1", dst="web", zone=Zone.PUBLIC_WEB, size=1000):
    return PacketRecord(next(_ids), src, dst, zone, kind, size, 0.0)


def fuzzy(**thr):
    t = default_thresholds()
    t.update({Zone(k.replace("_", "-")): v for k, v in thr.items()})
    return FuzzyFirewall(default_rulebase(), t)


class TestPacket:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            pkt(size=0)

    def test_rejects_loop(self):
        with pytest.raises(ValueError):
            pkt(src="a", dst="a")

    def test_conversation_direction(self):
        assert pkt(src="c", dst="s").conversation == ("c", "s")
        assert pkt(Kind.HTTP_RESPONSE, src="s", dst="c").conversation == ("c", "s")


class TestFlowStats:
    def test_first_packet(self):
        fs = FlowStats(1.0)
        assert fs.observe(pkt(size=1000), 0.0).send_rate == 1000.0

    def test_second_after_half_life(self):
        fs = FlowStats(1.0)
        p = pkt(size=1000)
        fs.observe(p, 0.0)
        assert fs.observe(p, 1.0).send_rate == pytest.approx(1500.0)

    def test_long_gap_forgets(self):
        fs = FlowStats(1.0)
        p = pkt(size=1000)
        fs.observe(p, 0.0)
        assert fs.observe(p, 1e6).send_rate == pytest.approx(1000.0)

    def test_half_life_scaling(self):
        fs = FlowStats(2.0)
        assert fs.observe(pkt(size=1000), 0.0).send_rate == 500.0

    def test_reverse_direction(self):
        fs = FlowStats(1.0)
        fs.observe(pkt(src="c", dst="s", size=400), 0.0)
        flow = fs.observe(pkt(Kind.HTTP_RESPONSE, src="s", dst="c", size=8000), 0.1)
        assert (flow.send_rate, flow.recv_rate) == (400.0, 8000.0)
        assert len(fs) == 1

    def test_out_of_order(self):
        fs = FlowStats(1.0)
        p = pkt()
        fs.observe(p, 5.0)
        with pytest.raises(FlowOrderError):
            fs.observe(p, 4.0)

    @pytest.mark.parametrize("h", [0.0, -1.0, math.inf, math.nan])
    def test_bad_half_life(self, h):
        with pytest.raises(FirewallConfigError):
            FlowStats(h)

    @given(st.lists(st.tuples(st.floats(0, 10), st.integers(1, 10_000)), min_size=1, max_size=30))
    def test_rate_bounded_by_total(self, steps):
        fs = FlowStats(1.0)
        t = 0.0
        total = 0
        p0 = pkt()
        for dt, size in steps:
            t += dt
            total += size
            p = PacketRecord(p0.id, p0.src, p0.dst, p0.zone, p0.kind, size, t)
            rate = fs.observe(p, t).send_rate
            assert size <= rate + 1e-9 and rate <= total + 1e-9


class TestFeatures:
    def test_division(self):
        fs = FlowStats(1.0)
        fs.observe(pkt(src="c", dst="s", size=500), 0.0)
        fs.observe(pkt(Kind.HTTP_RESPONSE, src="s", dst="c", size=500), 0.0)
        assert fs.extract_features(pkt(src="c", dst="s"), 1000.0) == (0.5, 0.5)

    def test_clamped(self):
        fs = FlowStats(1.0)
        p = pkt(size=5000)
        fs.observe(p, 0.0)
        assert fs.extract_features(p, 1000.0) == (1.0, 0.0)

    def test_fresh(self):
        assert FlowStats().extract_features(pkt(), 1000.0) == (0.0, 0.0)

    def test_bad_capacity(self):
        with pytest.raises(FirewallConfigError):
            FlowStats().extract_features(pkt(), 0.0)


class TestDecide:
    def test_none_passes(self):
        d = decide(NoFirewall(), (0.3, 0.9), pkt(Kind.JUNK))
        assert d.verdict is Verdict.ALLOW and d.added_latency == 0.0

    def test_fuzzy_high_high_db(self):
        d = decide(fuzzy(), (1.0, 1.0), pkt(Kind.DB_QUERY, dst="db", zone=Zone.PRIVATE_DB))
        assert d.allowed and d.security_level >= 0.7

    def test_fuzzy_medium_low_db(self):
        d = decide(fuzzy(), (0.5, 0.0), pkt(Kind.DB_QUERY, dst="db", zone=Zone.PRIVATE_DB))
        assert not d.allowed and d.security_level < 0.7 and d.reason == "fuzzy"

    def test_conventional_first_match(self):
        fw = ConventionalFirewall((AclRule(AclAction.DENY, kind=Kind.JUNK), AclRule(AclAction.ALLOW)))
        assert not decide(fw, (0, 0), pkt(Kind.JUNK)).allowed
        assert decide(fw, (0, 0), pkt(Kind.HTTP_REQUEST)).allowed

    def test_implicit_deny(self):
        fw = ConventionalFirewall((AclRule(AclAction.ALLOW, kind=Kind.HTTP_REQUEST),))
        d = decide(fw, (0, 0), pkt(Kind.DB_QUERY, zone=Zone.PRIVATE_DB))
        assert not d.allowed and d.reason == "acl"

    def test_default_acl(self):
        fw = ConventionalFirewall(default_acl(["bad"], ["dbc"]))
        assert not decide(fw, (0, 0), pkt(Kind.JUNK, src="bad")).allowed
        assert decide(fw, (0, 0), pkt(Kind.JUNK, src="unknown")).allowed
        assert decide(fw, (0, 0), pkt(Kind.DB_QUERY, src="dbc", zone=Zone.PRIVATE_DB)).allowed
        assert not decide(fw, (0, 0), pkt(Kind.DB_QUERY, src="other", zone=Zone.PRIVATE_DB)).allowed
        assert decide(fw, (0, 0), pkt(Kind.HTTP_REQUEST, src="bad")).allowed

    def test_missing_zone_threshold(self):
        fw = FuzzyFirewall(default_rulebase(), {Zone.PUBLIC_WEB: 0.2})
        with pytest.raises(FirewallConfigError):
            decide(fw, (1, 1), pkt(Kind.DB_QUERY, zone=Zone.PRIVATE_DB))

    def test_features_out_of_range(self):
        with pytest.raises(FirewallConfigError):
            decide(NoFirewall(), (1.2, 0.0), pkt())

    def test_threshold_range(self):
        with pytest.raises(FirewallConfigError):
            FuzzyFirewall(default_rulebase(), {Zone.PUBLIC_WEB: 1.5})

    @pytest.mark.parametrize("s,d,label", TABLE_I)
    def test_table_rows_against_high_threshold(self, s, d, label):
        p = pkt(Kind.DB_QUERY, zone=Zone.PRIVATE_DB)
        assert decide(fuzzy(), (CENTERS[s], CENTERS[d]), p).allowed == (label == "HighSecured")

    def test_default_thresholds(self):
        t = default_thresholds()
        assert t[Zone.PRIVATE_DB] == 0.7
        assert t[Zone.PUBLIC_WEB] == pytest.approx(0.7 / 3)

    @settings(max_examples=80, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_monotone_in_threshold(self, s, d, t1, t2):
        lo, hi = sorted((t1, t2))
        p = pkt(Kind.HTTP_REQUEST)
        strict = decide(FuzzyFirewall(default_rulebase(), {Zone.PUBLIC_WEB: hi}), (s, d), p)
        loose = decide(FuzzyFirewall(default_rulebase(), {Zone.PUBLIC_WEB: lo}), (s, d), p)
        assert not (strict.allowed and not loose.allowed)

    @settings(max_examples=50, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.sampled_from(list(Kind)))
    def test_pure_and_latency_symmetric(self, s, d, kind):
        p = pkt(kind)
        conv = ConventionalFirewall(default_acl(["c1"], []), latency=0.0005)
        fz = fuzzy()
        for fw, lat in ((conv, 0.0005), (fz, 0.0006)):
            a, b = decide(fw, (s, d), p), decide(fw, (s, d), p)
            assert a == b
            assert a.added_latency == lat

    def test_fail_closed_at_any_positive_threshold(self):
        for t in (1e-9, 0.01, 0.2333, 0.7, 1.0):
            fw = FuzzyFirewall(default_rulebase(), {Zone.PUBLIC_WEB: t, Zone.PRIVATE_DB: t})
            d = decide(fw, (1.0, 0.0), pkt())
            assert not d.allowed and d.security_level == 0.0
