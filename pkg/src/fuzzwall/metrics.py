"""Run summaries, three-scenario comparison and CSV export."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

__all__ = [
    "APPS",
    "SCENARIOS",
    "METRICS",
    "TimeSeries",
    "AppRun",
    "RunOutput",
    "AppSummary",
    "AppResult",
    "ScenarioResult",
    "ComparisonError",
    "ComparisonReport",
    "summarize",
    "delta",
    "compare",
    "write_csv",
    "write_series_csv",
    "read_series_csv",
    "SERIES_HEADER",
]

APPS = ("http", "db")
SCENARIOS = ("none", "conventional", "fuzzy")
SERIES_HEADER = ("t", "sent_bytes", "recv_bytes", "completions", "avg_response_s")

# Summary metrics carried into comparisons, in report order.
METRICS = (
    "avg_response_s",
    "avg_send_s",
    "avg_service_s",
    "avg_receive_s",
    "mean_sent_Bps",
    "mean_recv_Bps",
    "firewall_Bps",
    "authorized_Bps",
    "utilization",
    "completions",
    "requests",
    "dropped",
    "in_flight",
)

DELTA_PAIRS = (("fuzzy", "conventional"), ("fuzzy", "none"), ("conventional", "none"))


@dataclass(frozen=True)
class TimeSeries:
    """Per-tick samples for one application, seen from its server.

    ``recv_bytes`` is what the server received (including junk aimed at it),
    ``sent_bytes`` what it sent back. Completions and response-time sums are
    client-observed and binned by completion time.
    """

    tick: float
    sent_bytes: tuple[int, ...]
    recv_bytes: tuple[int, ...]
    completions: tuple[int, ...]
    response_sum: tuple[float, ...]

    def __len__(self) -> int:
        return len(self.sent_bytes)

    def avg_response(self, i: int) -> float | None:
        n = self.completions[i]
        return self.response_sum[i] / n if n else None

    def rows(self) -> list[tuple[float, int, int, int, float | None]]:
        return [
            (i * self.tick, self.sent_bytes[i], self.recv_bytes[i], self.completions[i], self.avg_response(i))
            for i in range(len(self))
        ]


@dataclass
class AppRun:
    """Raw counters for one application, filled in by the simulator."""

    series_sent: list[int]
    series_recv: list[int]
    series_completions: list[int]
    series_response: list[float]
    send_time: float = 0.0
    service_time: float = 0.0
    receive_time: float = 0.0
    requests: int = 0
    in_flight: int = 0
    busy_time: float = 0.0
    firewall_bytes: int = 0
    authorized_bytes: int = 0
    junk_sent: int = 0
    junk_admitted: int = 0
    drops: dict[str, int] = field(default_factory=dict)

    @classmethod
    def empty(cls, n: int) -> "AppRun":
        return cls([0] * n, [0] * n, [0] * n, [0.0] * n)


@dataclass
class RunOutput:
    policy: str
    config_key: str
    seed: int
    duration: float
    tick: float
    apps: dict[str, AppRun]
    generated: int = 0
    delivered: int = 0
    dropped: int = 0
    in_flight: int = 0
    events: int = 0


@dataclass(frozen=True)
class AppSummary:
    avg_response_s: float | None
    avg_send_s: float | None
    avg_service_s: float | None
    avg_receive_s: float | None
    completions: int
    requests: int
    in_flight: int
    dropped: int
    mean_sent_Bps: float
    mean_recv_Bps: float
    firewall_Bps: float
    authorized_Bps: float
    utilization: float
    junk_sent: int
    junk_admitted: int
    drops: tuple[tuple[str, int], ...]

    def get(self, metric: str) -> float | None:
        value = getattr(self, metric)
        return None if value is None else float(value)


@dataclass(frozen=True)
class AppResult:
    series: TimeSeries
    summary: AppSummary


@dataclass(frozen=True)
class ScenarioResult:
    policy: str
    config_key: str
    seed: int
    duration: float
    apps: dict[str, AppResult]
    generated: int
    delivered: int
    dropped: int
    in_flight: int
    events: int

    @property
    def http(self) -> AppResult:
        return self.apps["http"]

    @property
    def db(self) -> AppResult:
        return self.apps["db"]


def _avg(total: float, n: int) -> float | None:
    return total / n if n else None


def _summarize_app(app: AppRun, duration: float, tick: float) -> AppResult:
    series = TimeSeries(
        tick,
        tuple(app.series_sent),
        tuple(app.series_recv),
        tuple(app.series_completions),
        tuple(app.series_response),
    )
    completions = sum(series.completions)
    utilization = app.busy_time / duration
    if not -1e-12 <= utilization <= 1.0 + 1e-12:
        raise ValueError(f"utilization {utilization} outside [0, 1]")
    summary = AppSummary(
        avg_response_s=_avg(math.fsum(series.response_sum), completions),
        avg_send_s=_avg(app.send_time, completions),
        avg_service_s=_avg(app.service_time, completions),
        avg_receive_s=_avg(app.receive_time, completions),
        completions=completions,
        requests=app.requests,
        in_flight=app.in_flight,
        dropped=sum(app.drops.values()),
        mean_sent_Bps=sum(series.sent_bytes) / duration,
        mean_recv_Bps=sum(series.recv_bytes) / duration,
        firewall_Bps=app.firewall_bytes / duration,
        authorized_Bps=app.authorized_bytes / duration,
        utilization=min(1.0, max(0.0, utilization)),
        junk_sent=app.junk_sent,
        junk_admitted=app.junk_admitted,
        drops=tuple(sorted(app.drops.items())),
    )
    return AppResult(series, summary)


def summarize(run: RunOutput) -> ScenarioResult:
    """Freeze raw run counters into a :class:`ScenarioResult`.

    Averages cover completed transactions only; requests still in flight at
    the horizon are counted in ``in_flight``. With no completions the
    average response time is ``None``, not zero.
    """
    return ScenarioResult(
        policy=run.policy,
        config_key=run.config_key,
        seed=run.seed,
        duration=run.duration,
        apps={name: _summarize_app(run.apps[name], run.duration, run.tick) for name in APPS},
        generated=run.generated,
        delivered=run.delivered,
        dropped=run.dropped,
        in_flight=run.in_flight,
        events=run.events,
    )


def delta(a: float | None, b: float | None) -> float | None:
    """Percentage change of ``a`` relative to ``b``: (a - b) / b * 100."""
    if a is None or b is None:
        return None
    if b == 0:
        return 0.0 if a == 0 else None
    return (a - b) / b * 100.0


class ComparisonError(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonReport:
    """Seed-averaged summaries of the three scenarios plus percentage deltas.

    ``summaries[scenario][app][metric]`` is the mean over seeds (metrics
    that are absent in some seed average over the seeds where present).
    ``deltas["fuzzy-vs-conventional"][app][metric]`` is delta(fuzzy, conventional).
    """

    seeds: tuple[int, ...]
    results: dict[str, tuple[ScenarioResult, ...]]
    summaries: dict[str, dict[str, dict[str, float | None]]]
    deltas: dict[str, dict[str, dict[str, float | None]]]
    per_seed_deltas: dict[int, dict[str, dict[str, dict[str, float | None]]]]

    def value(self, scenario: str, app: str, metric: str) -> float | None:
        return self.summaries[scenario][app][metric]

    def delta(self, a: str, b: str, app: str, metric: str) -> float | None:
        return self.deltas[f"{a}-vs-{b}"][app][metric]

    def rows(self) -> list[dict]:
        out = []
        for scenario in SCENARIOS:
            for app in APPS:
                for metric in METRICS:
                    out.append(
                        {
                            "kind": "summary",
                            "subject": scenario,
                            "app": app,
                            "metric": metric,
                            "value": self.summaries[scenario][app][metric],
                        }
                    )
        for pair in self.deltas:
            for app in APPS:
                for metric in METRICS:
                    out.append(
                        {
                            "kind": "delta_pct",
                            "subject": pair,
                            "app": app,
                            "metric": metric,
                            "value": self.deltas[pair][app][metric],
                        }
                    )
        return out

    def table(self) -> str:
        def fmt(v: float | None, pct: bool = False) -> str:
            if v is None:
                return "-"
            if pct:
                return f"{v:+.1f}%"
            if abs(v) >= 1000:
                return f"{v:,.0f}"
            return f"{v:.4g}"

        lines = [f"seeds: {', '.join(map(str, self.seeds))}"]
        head = f"{'metric':<16}{'none':>12}{'conventional':>14}{'fuzzy':>12}{'fz-vs-conv':>12}{'fz-vs-none':>12}"
        for app in APPS:
            lines.append("")
            lines.append(f"[{app}]")
            lines.append(head)
            for metric in METRICS:
                vals = [fmt(self.summaries[s][app][metric]) for s in SCENARIOS]
                d1 = fmt(self.deltas["fuzzy-vs-conventional"][app][metric], pct=True)
                d2 = fmt(self.deltas["fuzzy-vs-none"][app][metric], pct=True)
                lines.append(f"{metric:<16}{vals[0]:>12}{vals[1]:>14}{vals[2]:>12}{d1:>12}{d2:>12}")
        return "\n".join(lines)


def _app_metrics(result: ScenarioResult) -> dict[str, dict[str, float | None]]:
    return {app: {m: result.apps[app].summary.get(m) for m in METRICS} for app in APPS}


def _mean(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return math.fsum(present) / len(present) if present else None


def _deltas(summ: dict[str, dict[str, dict[str, float | None]]]) -> dict:
    return {
        f"{a}-vs-{b}": {
            app: {m: delta(summ[a][app][m], summ[b][app][m]) for m in METRICS} for app in APPS
        }
        for a, b in DELTA_PAIRS
    }


def compare(
    none: ScenarioResult | Sequence[ScenarioResult],
    conventional: ScenarioResult | Sequence[ScenarioResult],
    fuzzy: ScenarioResult | Sequence[ScenarioResult],
) -> ComparisonReport:
    """Compare the three scenarios, each given for one seed or a list of seeds.

    The i-th entries of the three lists must come from the same config and
    seed, differing only in policy.
    """
    groups = {}
    for name, arg in zip(SCENARIOS, (none, conventional, fuzzy)):
        groups[name] = (arg,) if isinstance(arg, ScenarioResult) else tuple(arg)
    n = len(groups["none"])
    if n == 0 or any(len(g) != n for g in groups.values()):
        raise ComparisonError("each scenario needs the same, non-zero number of runs")
    for i in range(n):
        trio = [groups[s][i] for s in SCENARIOS]
        for scenario, r in zip(SCENARIOS, trio):
            if r.policy != scenario:
                raise ComparisonError(f"expected a {scenario!r} run, got {r.policy!r}")
        if len({r.config_key for r in trio}) != 1 or len({r.seed for r in trio}) != 1:
            raise ComparisonError(
                f"run {i}: scenarios differ in more than the firewall policy "
                f"(seeds {[r.seed for r in trio]})"
            )
    seeds = tuple(r.seed for r in groups["none"])

    per_seed = {}
    collected = {s: [] for s in SCENARIOS}
    for i in range(n):
        summ = {s: _app_metrics(groups[s][i]) for s in SCENARIOS}
        for s in SCENARIOS:
            collected[s].append(summ[s])
        per_seed[seeds[i]] = _deltas(summ)

    summaries = {
        s: {
            app: {m: _mean([c[app][m] for c in collected[s]]) for m in METRICS} for app in APPS
        }
        for s in SCENARIOS
    }
    return ComparisonReport(seeds, groups, summaries, _deltas(summaries), per_seed)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_series_csv(series: TimeSeries, path: str | Path) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SERIES_HEADER)
    for row in series.rows():
        w.writerow([_fmt(v) for v in row])
    try:
        path.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return path


def read_series_csv(path: str | Path) -> list[tuple[float, int, int, int, float | None]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != SERIES_HEADER:
            raise ValueError(f"{path}: unexpected header {header}")
        return [
            (float(t), int(s), int(r), int(c), float(a) if a else None)
            for t, s, r, c, a in reader
        ]


def write_csv(obj: ScenarioResult | ComparisonReport, out_dir: str | Path) -> list[Path]:
    """Export ``obj`` into directory ``out_dir``; returns the files written.

    A ScenarioResult gives one series file per application. A report adds a
    ``summary.csv`` and one series file per (scenario, application, seed).
    """
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {out_dir}: {exc.strerror or exc}") from exc
    written = []
    if isinstance(obj, ScenarioResult):
        for app in APPS:
            written.append(write_series_csv(obj.apps[app].series, out_dir / f"{obj.policy}_{app}_seed{obj.seed}.csv"))
        return written

    summary = out_dir / "summary.csv"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["kind", "subject", "app", "metric", "value"])
    for row in obj.rows():
        w.writerow([row["kind"], row["subject"], row["app"], row["metric"], _fmt(row["value"])])
    try:
        summary.write_text(buf.getvalue(), encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {summary}: {exc.strerror or exc}") from exc
    written.append(summary)
    for scenario in SCENARIOS:
        for result in obj.results[scenario]:
            for app in APPS:
                written.append(
                    write_series_csv(result.apps[app].series, out_dir / f"{scenario}_{app}_seed{result.seed}.csv")
                )
    return written
