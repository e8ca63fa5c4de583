import copy
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent / "oracles"))

SMALL = {
    "duration": 20.0,
    "seed": 3,
    "nodes": {"http_clients": 4, "db_clients": 3, "unauthorized_clients": 2},
    "links": {
        "access": {"capacity": 1e7, "delay": 0.004},
        "web": {"capacity": 5e6, "delay": 0.001},
        "db": {"capacity": 5e6, "delay": 0.001},
    },
    "servers": {"web_rate": 1e6, "db_rate": 7e5},
    "workload": {
        "http": {"mean_interarrival": 0.5, "request_size": 400, "response_size": 12000.0, "response_min": 1000},
        "db": {"mean_interarrival": 0.5, "request_size": 300, "response_size": 16000.0, "response_min": 1000},
        "junk": {"web_rate": 20.0, "db_rate": 20.0, "size": 1000},
    },
    "firewall": {"unlisted_attackers": 1, "unlisted_db_clients": 1},
}


@pytest.fixture
def small_dict():
    return copy.deepcopy(SMALL)


@pytest.fixture
def small_config(small_dict):
    from fuzzwall.config import SimConfig

    return SimConfig.from_dict(small_dict)


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the test still asserts on its own."""

    def record(name: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.append((name, ok, detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
