import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=1000, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def e(dim, i):
    v = np.zeros(dim)
    v[i] = 1.0
    return v


def unit_vectors(dim=None, min_dim=2, max_dim=12):
    """Strategy for unit vectors built from bounded, non-degenerate Gaussian-like draws."""
    dims = st.just(dim) if dim else st.integers(min_dim, max_dim)
    elems = st.floats(-1.0, 1.0, allow_nan=False, width=64)

    def build(d):
        return arrays(np.float64, d, elements=elems).filter(lambda v: np.linalg.norm(v) > 1e-3).map(
            lambda v: v / np.linalg.norm(v))

    return dims.flatmap(build)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_units(rng, n, dim):
    x = rng.standard_normal((n, dim))
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def layer_stack(seed, dim=16, n=200, layers=5, separated=3):
    """Per-layer (normal, abnormal) features; only layer ``separated`` differs between classes."""
    from geovad.vmf import VmfParams, sample_vmf

    base = e(dim, 0)
    normal, abn = [], []
    for i in range(layers):
        rng = np.random.default_rng([seed, i])
        if i == separated:
            normal.append(sample_vmf(VmfParams(base, 2000.0), n, rng))
            abn.append(sample_vmf(VmfParams(base, 100.0), n, rng))
        else:
            normal.append(sample_vmf(VmfParams(base, 300.0), n, rng))
            abn.append(sample_vmf(VmfParams(base, 300.0), n, rng))
    return normal, abn


# --- per-criterion acceptance summary -----------------------------------------

_CRITERIA: dict[int, list] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed):
        return
    number, title = mark.args
    entry = _CRITERIA.setdefault(number, [title, True, []])
    if rep.failed:
        entry[1] = False
        entry[2].append(item.name)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, ok, failed = _CRITERIA[number]
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {title}"
        if failed:
            line += f"  (failed: {', '.join(failed)})"
        terminalreporter.write_line(line)
