import math
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from fuzzwall.metrics import (
    METRICS,
    SERIES_HEADER,
    AppRun,
    ComparisonError,
    RunOutput,
    TimeSeries,
    compare,
    delta,
    read_series_csv,
    summarize,
    write_csv,
    write_series_csv,
)
from fuzzwall.netsim import run_named


def fake_run(policy="none", seed=1, responses=(), busy=0.0, duration=10.0, key="k"):
    apps = {"http": AppRun.empty(10), "db": AppRun.empty(10)}
    for i, rt in enumerate(responses):
        apps["http"].series_completions[i] += 1
        apps["http"].series_response[i] += rt
    apps["http"].requests = len(responses)
    apps["http"].busy_time = busy
    return RunOutput(policy, key, seed, duration, 1.0, apps)


class TestSummarize:
    def test_mean(self):
        assert summarize(fake_run(responses=(0.1, 0.3))).http.summary.avg_response_s == pytest.approx(0.2)

    def test_absent_when_empty(self):
        s = summarize(fake_run()).http.summary
        assert s.avg_response_s is None and s.completions == 0

    def test_utilization(self):
        assert summarize(fake_run(busy=300.0, duration=1000.0)).http.summary.utilization == pytest.approx(0.3)

    def test_recompute_from_series(self, small_config):
        r = run_named(small_config, "fuzzy")
        for app in (r.http, r.db):
            ser, s = app.series, app.summary
            n = sum(ser.completions)
            assert n == s.completions
            avg = math.fsum(ser.response_sum) / n
            assert abs(avg - s.avg_response_s) <= 1e-9 * abs(avg)
            assert abs(sum(ser.sent_bytes) / r.duration - s.mean_sent_Bps) <= 1e-9 * s.mean_sent_Bps
            assert abs(sum(ser.recv_bytes) / r.duration - s.mean_recv_Bps) <= 1e-9 * s.mean_recv_Bps


class TestDelta:
    def test_headline_form(self):
        assert delta(0.088, 0.100) == pytest.approx(-12.0)

    @given(st.floats(1e-6, 1e6))
    def test_identity(self, a):
        assert delta(a, a) == 0.0

    def test_absent(self):
        assert delta(None, 1.0) is None and delta(0.0, 0.0) == 0.0 and delta(1.0, 0.0) is None

    def test_identical_results(self, small_config):
        r = run_named(small_config, "none")
        # compare checks the policy slots, so relabel copies of one run
        rep = compare(r, replace(r, policy="conventional"), replace(r, policy="fuzzy"))
        for pair in rep.deltas.values():
            for app in pair.values():
                assert all(v in (0.0, None) for v in app.values())


class TestCompare:
    def test_rejects_mismatched_config(self):
        a, b, c = (summarize(fake_run(p, key="k")) for p in ("none", "conventional", "fuzzy"))
        c2 = summarize(fake_run("fuzzy", key="other"))
        compare(a, b, c)
        with pytest.raises(ComparisonError):
            compare(a, b, c2)

    def test_rejects_mismatched_seed(self):
        a, b = summarize(fake_run("none", seed=1)), summarize(fake_run("conventional", seed=1))
        with pytest.raises(ComparisonError):
            compare(a, b, summarize(fake_run("fuzzy", seed=2)))

    def test_rejects_wrong_slot(self):
        a = summarize(fake_run("none"))
        with pytest.raises(ComparisonError):
            compare(a, a, a)

    def test_seed_average(self):
        runs = {
            p: [summarize(fake_run(p, seed=s, responses=(0.1 * s * (2 if p == "none" else 1),))) for s in (1, 2)]
            for p in ("none", "conventional", "fuzzy")
        }
        rep = compare(runs["none"], runs["conventional"], runs["fuzzy"])
        assert rep.seeds == (1, 2)
        assert rep.value("none", "http", "avg_response_s") == pytest.approx(0.3)
        assert rep.delta("fuzzy", "none", "http", "avg_response_s") == pytest.approx(-50.0)
        assert set(rep.per_seed_deltas) == {1, 2}
        assert "fz-vs-conv" in rep.table()


class TestCsv:
    def test_empty_series_header_only(self, tmp_path):
        p = write_series_csv(TimeSeries(1.0, (), (), (), ()), tmp_path / "e.csv")
        assert p.read_text() == ",".join(SERIES_HEADER) + "\n"

    def test_round_trip(self, tmp_path, small_config):
        r = run_named(small_config, "conventional")
        ser = r.http.series
        back = read_series_csv(write_series_csv(ser, tmp_path / "s.csv"))
        assert back == ser.rows()

    def test_report_files_and_stability(self, tmp_path, small_config):
        rs = [run_named(small_config, p) for p in ("none", "conventional", "fuzzy")]
        rep = compare(*rs)
        files = write_csv(rep, tmp_path / "a")
        assert len(files) == 7
        assert sum(f.name == "summary.csv" for f in files) == 1
        again = write_csv(rep, tmp_path / "b")
        for f, g in zip(files, again):
            assert f.read_bytes() == g.read_bytes()

    def test_scenario_files(self, tmp_path, small_config):
        files = write_csv(run_named(small_config, "fuzzy"), tmp_path)
        assert sorted(f.name for f in files) == ["fuzzy_db_seed3.csv", "fuzzy_http_seed3.csv"]

    def test_write_error_has_path(self, tmp_path):
        target = tmp_path / "file"
        target.write_text("x")
        with pytest.raises(OSError, match="file"):
            write_csv(summarize(fake_run()), target / "sub")


def test_metric_names_stable():
    assert METRICS[0] == "avg_response_s"
