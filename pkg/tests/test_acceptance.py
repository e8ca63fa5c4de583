"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line."""

import numpy as np
import pytest

from fuzzwall.cli import surface
from fuzzwall.config import SimConfig, default_config_path, load_config
from fuzzwall.fuzzy import TABLE_I, SecurityBand, band_of, default_rulebase, defuzzify_centroid, infer
from fuzzwall.firewall import FuzzyFirewall, Kind, PacketRecord, Zone, decide
from fuzzwall.netsim import run_comparison, run_named
from fuzzwall.rules import default_rules_path, format_rules, load_rules, parse_rules
from test_netsim import HAND_RESPONSE, hand_config
from test_rules import rulebases

RB = default_rulebase()
CENTERS = {"Low": 0.0, "Medium": 0.5, "High": 1.0, "Medium-High": 0.75, "Low-Medium": 0.25}


def test_1_centroid_oracle(criterion):
    rng = np.random.default_rng(7)
    coarse = RB.grid
    fine = np.linspace(RB.output.lo, RB.output.hi, 10 * (RB.defuzz_samples - 1) + 1)

    def aggregate(xs, levels):
        agg = np.zeros_like(xs)
        for term, w in zip(RB.output.terms, levels):
            agg = np.maximum(agg, np.minimum(term.mf.sample(xs), w))
        return agg

    worst = 0.0
    for _ in range(1000):
        levels = rng.uniform(0, 1, len(RB.output.terms)) * (rng.uniform(size=len(RB.output.terms)) < 0.7)
        if levels.max() < 1e-3:
            levels[rng.integers(len(levels))] = rng.uniform(0.05, 1)
        m = aggregate(fine, levels)
        oracle = np.trapezoid(fine * m, fine) / np.trapezoid(m, fine)
        worst = max(worst, abs(defuzzify_centroid(coarse, aggregate(coarse, levels)) - oracle))
    ok = criterion("1 centroid vs 10x trapezoid oracle", worst < 1e-6, f"max |err| over 1000 aggregates = {worst:.3g} (tol 1e-6)")
    assert ok


def test_2_table_fidelity(criterion):
    bad = []
    for s, d, label in TABLE_I:
        r = infer(RB, {"source": CENTERS[s], "destination": CENTERS[d]})
        if band_of(r.crisp).label != label:
            bad.append((s, d, label, r.crisp))
    hh = infer(RB, {"source": 1.0, "destination": 1.0}).crisp
    lh = infer(RB, {"source": 0.0, "destination": 1.0}).crisp
    ok = not bad and hh >= 0.7 and lh >= 0.7
    criterion("2 Table I fidelity", ok, f"7 rows, mismatches={bad}; (High,High)={hh:.4f} (Low,High)={lh:.4f}")
    assert ok


def test_3_fail_closed(criterion):
    points = [(1.0, 0.0), (0.95, 0.05), (1.0, 0.1), (0.9, 0.0)]
    lines = []
    ok = True
    for s, d in points:
        r = infer(RB, {"source": s, "destination": d})
        if max(r.firing_strengths) >= 1e-9:
            continue
        drops = all(
            not decide(FuzzyFirewall(RB, {Zone.PUBLIC_WEB: t, Zone.PRIVATE_DB: t}), (s, d),
                       PacketRecord(0, "a", "b", Zone.PUBLIC_WEB, Kind.JUNK, 1, 0.0)).allowed
            for t in (1e-12, 0.01, 0.2333, 0.5, 0.7, 1.0)
        )
        ok &= r.crisp == 0.0 and r.band is SecurityBand.INSECURE and drops
        lines.append((s, d))
    ok &= len(lines) >= 2
    criterion("3 fail-closed", ok, f"{len(lines)} zero-activation inputs {lines} -> crisp 0, Insecure, dropped at every threshold > 0")
    assert ok


def test_4_parser_round_trip(criterion):
    from hypothesis import HealthCheck, given, settings

    count = {"n": 0}

    @settings(max_examples=200, deadline=None, database=None, suppress_health_check=[HealthCheck.too_slow])
    @given(rulebases())
    def round_trip(rb):
        assert parse_rules(format_rules(rb)) == rb
        count["n"] += 1

    failure = None
    try:
        round_trip()
    except AssertionError as exc:
        failure = exc
    table = load_rules(default_rules_path())
    rows_ok = len(table.rules) == 7 and all(
        r.antecedents == (("source", s), ("destination", d)) and r.consequent == ("security", o)
        for r, (s, d, o) in zip(table.rules, TABLE_I)
    )
    ok = failure is None and count["n"] >= 200 and rows_ok
    criterion("4 parser round trip", ok, f"{count['n']} generated rule bases round-tripped; tableI.rules 7 rows match={rows_ok}")
    assert ok, failure


@pytest.fixture(scope="module")
def default_config():
    return load_config(default_config_path())


@pytest.fixture(scope="module")
def comparison(default_config):
    return run_comparison(default_config, default_config.seeds)


def test_5_determinism_conservation(criterion, default_config, comparison):
    same = all(run_named(default_config, p, 1) == run_named(default_config, p, 1) for p in ("none", "conventional", "fuzzy"))
    runs = [r for group in comparison.results.values() for r in group]
    conserved = all(r.generated == r.delivered + r.dropped + r.in_flight for r in runs)
    ok = same and conserved
    criterion("5 determinism and conservation", ok,
              f"bit-identical reruns={same}; conservation held on {len(runs)} runs={conserved}")
    assert ok


def test_6a_ordering(criterion, default_config, comparison):
    assert default_config.end_nodes <= 150 and len(comparison.seeds) == 10
    v = {(s, a): comparison.value(s, a, "avg_response_s") for s in ("none", "conventional", "fuzzy") for a in ("http", "db")}
    ok = all(v[("fuzzy", a)] < v[("conventional", a)] < v[("none", a)] for a in ("http", "db"))
    detail = "; ".join(
        f"{a}: fuzzy {v[('fuzzy', a)] * 1e3:.2f} ms < conv {v[('conventional', a)] * 1e3:.2f} ms < none {v[('none', a)] * 1e3:.2f} ms"
        for a in ("http", "db")
    )
    criterion("6a response-time ordering", ok, detail)
    assert ok


BANDS = [
    ("fuzzy", "conventional", "http", 5, 20),
    ("fuzzy", "none", "http", 15, 35),
    ("fuzzy", "conventional", "db", 5, 18),
    ("fuzzy", "none", "db", 12, 30),
]


@pytest.mark.parametrize("a,b,app,lo,hi", BANDS)
def test_6b_delta_bands(criterion, comparison, a, b, app, lo, hi):
    reduction = -comparison.delta(a, b, app, "avg_response_s")
    ok = lo <= reduction <= hi
    criterion(f"6b {app} {a}-vs-{b} reduction", ok, f"{reduction:.2f}% (band [{lo}, {hi}]%)")
    assert ok


def test_6c_filtration(criterion, comparison):
    http = -comparison.delta("fuzzy", "conventional", "http", "firewall_Bps")
    db = comparison.delta("fuzzy", "conventional", "db", "authorized_Bps")
    ok1 = 10 <= http <= 20
    ok2 = 5 <= db <= 15
    criterion("6c http firewall bytes, fuzzy below conventional", ok1, f"{http:.2f}% lower (band [10, 20]%)")
    criterion("6c db authorized bytes, fuzzy above conventional", ok2, f"{db:.2f}% higher (band [5, 15]%)")
    assert ok1 and ok2


def test_7_hand_fixture(criterion):
    got = run_named(hand_config(), "none").http.summary.avg_response_s
    err = abs(got - HAND_RESPONSE)
    ok = err < 1e-9
    criterion("7 hand-computed pipeline", ok, f"simulated {got!r} s vs closed form {HAND_RESPONSE!r} s (|err| {err:.2g})")
    assert ok


def test_8_surface(criterion):
    rows = {(round(x, 9), round(y, 9)): z for x, y, z in surface(RB, 21)}
    b00, b01, b11 = (band_of(rows[p]) for p in ((0, 0), (0, 1), (1, 1)))
    ok = len(rows) == 441 and b00 is SecurityBand.INSECURE and b01 is SecurityBand.HIGH_SECURED and b11 is SecurityBand.HIGH_SECURED
    criterion("8 surface corners", ok, f"(0,0) {b00.label}, (0,1) {b01.label}, (1,1) {b11.label} on a 21x21 grid")
    assert ok
