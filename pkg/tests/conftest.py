import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

_CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def criterion():
    """Record one acceptance verdict; the assertion still decides the test."""

    def record(label, passed: bool, detail: str = ""):
        _CRITERIA[str(label)] = (bool(passed), detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    groups = {}
    for label, verdict in _CRITERIA.items():
        groups.setdefault(int("".join(c for c in label if c.isdigit())), []).append((label, verdict))
    for n in sorted(groups):
        parts = sorted(groups[n])
        if len(parts) == 1 and parts[0][0] == str(n):
            ok, detail = parts[0][1]
            terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
            continue
        ok = all(v[0] for _, v in parts)
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}")
        for label, (sub_ok, detail) in parts:
            terminalreporter.write_line(f"    {label}: {'PASS' if sub_ok else 'FAIL'}  {detail}")
