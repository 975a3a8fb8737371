"""Shared fixtures and the acceptance summary hook."""

import gc
import time

import numpy as np
import pytest

from fomtrace import imgcore, ift

_ACCEPTANCE_RESULTS = []


def record_acceptance(name: str, passed: bool, detail: str = ""):
    _ACCEPTANCE_RESULTS.append((name, passed, detail))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for name, passed, detail in _ACCEPTANCE_RESULTS:
        flag = "PASS" if passed else "FAIL"
        line = f"[{flag}] {name}"
        if detail:
            line += f"  ({detail})"
        tr.write_line(line)


def interleaved_best(fn_a, fn_b, reps: int = 12) -> tuple[float, float]:
    """Best-of-``reps`` wall times for two callables, sampled alternately
    with garbage collection paused so both sides see the same noise."""
    best_a = best_b = float("inf")
    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(reps):
            t0 = time.perf_counter()
            fn_a()
            best_a = min(best_a, time.perf_counter() - t0)
            t0 = time.perf_counter()
            fn_b()
            best_b = min(best_b, time.perf_counter() - t0)
    finally:
        if gc_was_enabled:
            gc.enable()
    return best_a, best_b


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240901)


def random_graph(rng, max_nodes=10, max_weight=15, max_labels=3):
    """Small random symmetric graph plus a labeled seed set."""
    n = int(rng.integers(1, max_nodes + 1))
    edges = set()
    possible = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if possible:
        m = int(rng.integers(0, len(possible) + 1))
        idx = rng.choice(len(possible), size=m, replace=False)
        edges = {possible[i] for i in np.atleast_1d(idx)}
    u = np.array([e[0] for e in edges], dtype=np.int64)
    v = np.array([e[1] for e in edges], dtype=np.int64)
    w = rng.integers(0, max_weight + 1, size=len(edges))
    graph = ift.GenericGraph.from_edges(n, u, v, w)
    n_seeds = int(rng.integers(1, n + 1))
    nodes = rng.choice(n, size=n_seeds, replace=False)
    labels = rng.integers(0, max_labels, size=n_seeds)
    return graph, ift.SeedSet(nodes, labels)


def random_label_map(rng, shape=(32, 32), p=0.35) -> imgcore.LabelMap:
    return imgcore.LabelMap((rng.random(shape) < p).astype(np.int32))


@pytest.fixture(scope="session")
def track_seq():
    from fomtrace import synthetic

    return synthetic.disk_sequence(n_frames=20)


@pytest.fixture(scope="session")
def leak_seq():
    from fomtrace import synthetic

    return synthetic.leak_sequence()
