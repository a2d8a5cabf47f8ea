import math

import numpy as np
import pytest

from graph_core import DirectedGraph, EmptyGraphError, build_graph
from reports import write_csv
from trust import (TrustScores, TsmParams, _log_min_max, believability, compute_tsm,
                   load_trust_table, normalize_scores, trust_table)


def _oracle_tsm(n, edges, s, sweeps):
    """Plain-loop Jacobi iteration of the trust equations with sum-to-one scaling."""
    ti = [1.0 / n] * n
    tw = [1.0 / n] * n
    for _ in range(sweeps):
        new_ti = [0.0] * n
        new_tw = [0.0] * n
        for (u, v), w in edges.items():
            new_ti[u] += w / (1.0 + tw[v] ** s)
            new_tw[v] += w / (1.0 + ti[u] ** s)
        sum_ti, sum_tw = sum(new_ti), sum(new_tw)
        ti = [x / sum_ti for x in new_ti] if sum_ti > 0 else new_ti
        tw = [x / sum_tw for x in new_tw] if sum_tw > 0 else new_tw
    return ti, tw


def _random_graph(rng, n, m):
    edges = {}
    for _ in range(m):
        u, v = (int(x) for x in rng.integers(0, n, size=2))
        if u != v:
            edges[(u, v)] = edges.get((u, v), 0.0) + float(rng.choice([1.0, 0.5, 2.0]))
    src = np.array([u for u, _ in edges], dtype=np.int64)
    dst = np.array([v for _, v in edges], dtype=np.int64)
    w = np.array(list(edges.values()))
    return DirectedGraph.from_arrays(src, dst, w, [str(i) for i in range(n)]), edges


# ── compute_tsm ───────────────────────────────────────────────────────────────

def test_mutual_follow_fixed_point():
    g = build_graph([("a", "b"), ("b", "a")])
    raw = compute_tsm(g, TsmParams(involvement=1.0))
    assert raw.converged
    np.testing.assert_allclose(raw.ti, [0.5, 0.5], atol=1e-9)
    np.testing.assert_allclose(raw.tw, [0.5, 0.5], atol=1e-9)
    # Equal raw scores collapse to 1 under log min-max
    ts = normalize_scores(raw)
    assert list(ts.ti) == [1.0, 1.0]
    assert list(ts.tw) == [1.0, 1.0]


def test_edgeless_graph_converges_at_once():
    g = build_graph([("a", "a"), ("b", "b")])
    raw = compute_tsm(g)
    assert raw.converged
    assert raw.iterations_run == 1
    assert not raw.ti.any() and not raw.tw.any()


def test_empty_graph_rejected():
    with pytest.raises(EmptyGraphError, match="no nodes"):
        compute_tsm(build_graph([]))


def test_chain_matches_scalar_iteration():
    g = build_graph([("a", "b"), ("b", "c")])
    raw = compute_tsm(g, TsmParams(involvement=1.0, max_iterations=500, convergence_epsilon=1e-14))
    ti, tw = _oracle_tsm(3, {(0, 1): 1.0, (1, 2): 1.0}, 1.0, raw.iterations_run)
    np.testing.assert_allclose(raw.ti, ti, atol=1e-9)
    np.testing.assert_allclose(raw.tw, tw, atol=1e-9)
    # Nobody follows a, c follows nobody
    assert raw.tw[0] == 0.0 and raw.ti[2] == 0.0


def test_matches_brute_force_on_random_graphs():
    rng = np.random.default_rng(2024)
    for trial in range(200):
        n = int(rng.integers(2, 9))
        g, edges = _random_graph(rng, n, int(rng.integers(1, 21)))
        s = float(rng.choice([0.5, 1.0, 2.0]))
        sweeps = int(rng.integers(1, 12))
        raw = compute_tsm(g, TsmParams(involvement=s, max_iterations=sweeps, convergence_epsilon=1e-300))
        ti, tw = _oracle_tsm(n, edges, s, raw.iterations_run)
        np.testing.assert_allclose(raw.ti, ti, atol=1e-9, err_msg=f"trial {trial}")
        np.testing.assert_allclose(raw.tw, tw, atol=1e-9, err_msg=f"trial {trial}")


def test_scores_sum_to_one_each_sweep():
    rng = np.random.default_rng(5)
    g, _ = _random_graph(rng, 30, 120)
    raw = compute_tsm(g, TsmParams(max_iterations=3))
    assert raw.ti.sum() == pytest.approx(1.0)
    assert raw.tw.sum() == pytest.approx(1.0)


def test_non_convergence_is_reported():
    rng = np.random.default_rng(11)
    g, _ = _random_graph(rng, 20, 60)
    raw = compute_tsm(g, TsmParams(max_iterations=1, convergence_epsilon=1e-300))
    assert raw.iterations_run == 1
    assert not raw.converged


def test_thread_count_does_not_change_results():
    rng = np.random.default_rng(3)
    n = 70_000
    src = rng.integers(0, n, size=210_000)
    dst = rng.integers(0, n, size=210_000)
    g = DirectedGraph.from_arrays(src, dst, np.ones(len(src)), [str(i) for i in range(n)])
    params = TsmParams(max_iterations=5)
    one = compute_tsm(g, params, threads=1)
    four = compute_tsm(g, params, threads=4)
    assert np.array_equal(one.ti, four.ti)
    assert np.array_equal(one.tw, four.tw)


@pytest.mark.parametrize("kwargs", [
    {"involvement": -1.0},
    {"max_iterations": 0},
    {"convergence_epsilon": 0.0},
    {"log_floor": 1.0},
])
def test_invalid_params(kwargs):
    with pytest.raises(ValueError):
        TsmParams(**kwargs)


# ── normalization ─────────────────────────────────────────────────────────────

def test_log_min_max_midpoint():
    out = _log_min_max(np.array([0.01, 0.1, 1.0]), 1e-6)
    assert out[0] == 1e-6
    assert out[1] == pytest.approx(1e-6 + 0.5 * (1 - 1e-6), abs=1e-12)
    assert out[2] == 1.0


def test_log_min_max_all_equal():
    assert list(_log_min_max(np.array([0.3, 0.3, 0.3]), 1e-6)) == [1.0, 1.0, 1.0]


def test_log_min_max_clamps_zero():
    out = _log_min_max(np.array([0.0, 0.5]), 1e-6)
    assert out[0] == 1e-6
    assert out[1] == 1.0


def test_normalized_scores_are_in_range_and_monotone():
    rng = np.random.default_rng(8)
    g, _ = _random_graph(rng, 40, 150)
    raw = compute_tsm(g)
    ts = normalize_scores(raw)
    for before, after in ((raw.ti, ts.ti), (raw.tw, ts.tw)):
        assert after.min() >= 1e-6 and after.max() == 1.0
        order = np.argsort(before, kind="stable")
        assert np.all(np.diff(after[order]) >= 0)


# ── believability ─────────────────────────────────────────────────────────────

@pytest.mark.parametrize("tw_v, ti_u, expected", [
    (1.0, 1.0, 1.0),
    (0.5, 0.4, 0.2),
    (1e-6, 1.0, 1e-6),
])
def test_believability_product(tw_v, ti_u, expected):
    ts = TrustScores(ti=np.array([ti_u, 1.0]), tw=np.array([1.0, tw_v]))
    assert believability(ts, 0, 1) == pytest.approx(expected, rel=1e-15)


def test_believability_checks_edge_when_asked():
    g = build_graph([("a", "b")])
    ts = TrustScores(ti=np.ones(2), tw=np.ones(2))
    assert believability(ts, 0, 1, g) == 1.0
    with pytest.raises(ValueError):
        believability(ts, 1, 0, g)


# ── score dump ────────────────────────────────────────────────────────────────

def test_trust_dump_reads_back_exactly(tmp_path):
    rng = np.random.default_rng(1)
    g, _ = _random_graph(rng, 12, 40)
    ts = normalize_scores(compute_tsm(g))
    path = tmp_path / "trust.csv"
    write_csv(trust_table(g, ts), path)
    again = load_trust_table(path, g)
    assert np.array_equal(again.ti, ts.ti)
    assert np.array_equal(again.tw, ts.tw)
    assert path.read_text().splitlines()[0] == "node_id,ti,tw"


def test_trust_dump_missing_node(tmp_path):
    g = build_graph([("a", "b")])
    path = tmp_path / "trust.csv"
    path.write_text("node_id,ti,tw\na,1,1\n")
    with pytest.raises(ValueError, match="missing"):
        load_trust_table(path, g)


@pytest.mark.parametrize("ti_a", ["-0.5", "0", "1.5", "nan", "inf", "high"])
def test_trust_dump_rejects_out_of_range_scores(tmp_path, ti_a):
    g = build_graph([("a", "b"), ("a", "c")])
    path = tmp_path / "trust.csv"
    path.write_text(f"node_id,ti,tw\na,{ti_a},1\nb,1,1\nc,1,0.5\n")
    with pytest.raises(ValueError, match="'a'"):
        load_trust_table(path, g)
