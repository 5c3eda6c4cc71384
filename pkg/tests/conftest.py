import numpy as np
import pytest
from hypothesis import strategies as st

from rankedshapes.core import enumerate_codes
from rankedshapes.models import blum_francois_pmf, yule_pmf


@st.composite
def codes(draw, min_n=2, max_n=12):
    """Random valid functional code: each position picks an earlier node with a free slot."""
    n = draw(st.integers(min_n, max_n))
    t = [1]
    counts = {}
    for pos in range(2, n):
        free = [v for v in range(2, pos + 1) if counts.get(v, 0) < 2]
        v = draw(st.sampled_from(free))
        counts[v] = counts.get(v, 0) + 1
        t.append(v)
    return tuple(t)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def yule():
    """``yule(n)`` -> {code: probability} over all shapes."""
    cache = {}

    def get(n):
        if n not in cache:
            cache[n] = {t: yule_pmf(t) for t in enumerate_codes(n)}
        return cache[n]

    return get


@pytest.fixture(scope="session")
def bf():
    cache = {}

    def get(n, beta):
        if (n, beta) not in cache:
            cache[n, beta] = {t: blum_francois_pmf(t, beta) for t in enumerate_codes(n)}
        return cache[n, beta]

    return get


ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """``report(k, ok, detail)`` prints and records one acceptance line."""

    def record(k: int, ok: bool, detail: str) -> bool:
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES[k] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
