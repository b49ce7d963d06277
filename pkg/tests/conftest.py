import numpy as np
import pytest

from adtmodel import SampledSignal


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running reproduction runs")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def sig(a, rate=1.0):
    return SampledSignal(np.asarray(a), rate)


CRITERIA = {
    1: "example 1 sweep (cubic delay kernel)",
    2: "example 2 sweep (separable quadratic kernel)",
    3: "structural exactness with full-length taps",
    4: "linear-chain FIR convergence",
    5: "identification round trip",
    6: "encoder properties",
    7: "predistortion properties",
    8: "analytic spot checks",
}


@pytest.fixture
def acceptance(request):
    """Record one sub-result of a numbered criterion; returns ``ok``."""
    store = request.config.__dict__.setdefault("_acceptance", {})

    def record(n, ok, detail):
        store.setdefault(n, []).append((bool(ok), detail))
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.__dict__.get("_acceptance")
    if store is None:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for n, name in CRITERIA.items():
        parts = store.get(n)
        if not parts:
            tr.write_line(f"criterion {n} FAIL  {name}: not completed")
            continue
        ok = all(p for p, _ in parts)
        tr.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}  {name}: " + "; ".join(
            d if p else f"[failed] {d}" for p, d in parts))
