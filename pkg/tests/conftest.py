from __future__ import annotations

import itertools
import math

import numpy as np
import pytest


def brute_ising(n, beta, k, v):
    """Independent oracle: loop over every spin tuple, sum pairs by hand."""
    rows = []
    for s in itertools.product((1, -1), repeat=n):
        e = -k * sum(s)
        for i in range(n):
            for j in range(i + 1, n):
                e -= v(j - i) * s[i] * s[j]
        rows.append((np.array(s, dtype=float), math.exp(-beta * e)))
    z = sum(w for _, w in rows)
    return rows, z


STEPS = [(1, 0), (0, 1), (-1, 0), (0, -1)]


def brute_polymer(n, beta, h, v):
    """Independent oracle over all 4^n walks computed directly in the plane."""
    rows = []
    for walk in itertools.product(STEPS, repeat=n):
        x = np.array(walk, dtype=float)
        e = -float(np.dot(h, x.sum(axis=0)))
        for i in range(n):
            for j in range(i + 1, n):
                e -= v(j - i) * float(x[i] @ x[j])
        rows.append((x, math.exp(-beta * e)))
    z = sum(w for _, w in rows)
    return rows, z


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# ---------------------------------------------------------------- acceptance report

ACCEPTANCE: dict[str, tuple[bool, str]] = {}
ACCEPTANCE_ORDER = ["1", "2", "3", "4", "5", "6", "7", "8", "9", "10", "11"]


def record(criterion: str, passed: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    keys = [k for k in ACCEPTANCE_ORDER if k in ACCEPTANCE] + sorted(k for k in ACCEPTANCE if k not in ACCEPTANCE_ORDER)
    for k in keys:
        ok, detail = ACCEPTANCE[k]
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {k:<4} {detail}")
    for k in ACCEPTANCE_ORDER:
        if k not in ACCEPTANCE:
            tr.write_line(f"----  criterion {k:<4} not run")
