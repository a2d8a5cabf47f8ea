import numpy as np
import pytest

from evaluation import evaluate
from graph_core import build_graph
from roles import classify_roles
from synth import (PlantingStrategy, SbmParams, generate_sbm, load_spreaders, plant_spreaders,
                   write_spreaders)
from trust import compute_tsm, normalize_scores
from vulnerability import all_node_vulnerability, assess


# ── generate_sbm ──────────────────────────────────────────────────────────────

def test_single_full_block_is_complete_digraph():
    g, truth = generate_sbm(SbmParams(block_sizes=(3,), p_in=1.0))
    assert g.node_count == 3
    assert g.edge_count == 6
    assert truth.community_count == 1


def test_no_crossing_edges_without_p_out():
    g, truth = generate_sbm(SbmParams(block_sizes=(2, 2), p_in=1.0, p_out=0.0, seed=3))
    src, dst, _ = g.edges()
    assert np.array_equal(truth.labels[src], truth.labels[dst])
    assert g.edge_count == 4


def test_edge_count_matches_binomial_expectation():
    sizes, p_in, p_out = (50, 50), 0.1, 0.01
    inside = sum(b * (b - 1) for b in sizes)
    across = sum(sizes) ** 2 - sum(b * b for b in sizes)
    mean = inside * p_in + across * p_out
    sd = np.sqrt(inside * p_in * (1 - p_in) + across * p_out * (1 - p_out))
    for seed in range(10):
        g, _ = generate_sbm(SbmParams(block_sizes=sizes, p_in=p_in, p_out=p_out, seed=seed))
        assert abs(g.edge_count - mean) <= 4 * sd, f"seed {seed}"


def test_same_seed_same_graph():
    params = SbmParams(block_sizes=(20, 30), p_in=0.2, p_out=0.02, seed=11)
    first, _ = generate_sbm(params)
    second, _ = generate_sbm(params)
    for x, y in zip(first.edges(), second.edges()):
        assert np.array_equal(x, y)
    other, _ = generate_sbm(SbmParams(block_sizes=(20, 30), p_in=0.2, p_out=0.02, seed=12))
    assert not np.array_equal(first.edges()[0], other.edges()[0]) or first.edge_count != other.edge_count


def test_undirected_mode_is_symmetric():
    g, _ = generate_sbm(SbmParams(block_sizes=(15, 15), p_in=0.3, p_out=0.05, seed=2, directed=False))
    assert (g.out_adj != g.out_adj.T).nnz == 0
    src, dst, _ = g.edges()
    assert not np.any(src == dst)


def test_planted_labels_follow_block_order():
    _, truth = generate_sbm(SbmParams(block_sizes=(2, 3, 1), p_in=0.5))
    assert truth.labels.tolist() == [0, 0, 1, 1, 1, 2]


@pytest.mark.parametrize("kwargs", [
    {"block_sizes": (3, 0), "p_in": 0.5},
    {"block_sizes": (3, 3), "p_in": 0.2, "p_out": 0.2},
    {"block_sizes": (3, 3), "p_in": 1.5},
    {"block_sizes": (3, 3), "p_in": 0.5, "p_out": -0.1},
])
def test_invalid_sbm_params(kwargs):
    with pytest.raises(ValueError):
        SbmParams(**kwargs)


# ── plant_spreaders ───────────────────────────────────────────────────────────

def _sbm_with_scores(seed=7, sizes=(25, 25, 25, 25), p_in=0.1, p_out=0.02):
    g, truth = generate_sbm(SbmParams(block_sizes=sizes, p_in=p_in, p_out=p_out, seed=seed))
    return g, truth, normalize_scores(compute_tsm(g))


def test_uniform_rate_one_flags_everyone():
    g, _, ts = _sbm_with_scores()
    assert plant_spreaders(g, ts, PlantingStrategy("uniform", 1.0)) == set(range(g.node_count))


def test_planting_is_seeded():
    g, _, ts = _sbm_with_scores()
    strategy = PlantingStrategy("uniform", 0.2)
    assert plant_spreaders(g, ts, strategy, seed=4) == plant_spreaders(g, ts, strategy, seed=4)


def test_trust_planting_favours_vulnerable_nodes():
    g, _, ts = _sbm_with_scores(seed=7)
    v = all_node_vulnerability(g, ts)
    trust_flagged, uniform_flagged = [], []
    for seed in range(100):
        trust_flagged.extend(plant_spreaders(g, ts, PlantingStrategy("trust", 0.1), seed=seed))
        uniform_flagged.extend(plant_spreaders(g, ts, PlantingStrategy("uniform", 0.1), seed=seed))
    assert v[trust_flagged].mean() > v[uniform_flagged].mean()
    # Same expected count: 10 per draw
    assert abs(len(trust_flagged) / 100 - 10) < 2
    assert np.all(v[trust_flagged] > 0)


def test_trust_planting_without_vulnerability_falls_back_to_uniform():
    g = build_graph([("a", "a"), ("b", "b")])
    ts = normalize_scores(compute_tsm(g))
    assert plant_spreaders(g, ts, PlantingStrategy("trust", 1.0)) == {0, 1}


def test_boundary_planting_only_flags_boundary_nodes():
    g, truth, ts = _sbm_with_scores(seed=5)
    roles = classify_roles(g, truth)
    boundary = set().union(*(set(rs.boundary.tolist()) for rs in roles))
    assert plant_spreaders(g, ts, PlantingStrategy("boundary", 1.0), roles=roles) == boundary
    partial = plant_spreaders(g, ts, PlantingStrategy("boundary", 0.3), seed=1, roles=roles)
    assert partial <= boundary
    with pytest.raises(ValueError):
        plant_spreaders(g, ts, PlantingStrategy("boundary", 0.3))


@pytest.mark.parametrize("kind, rate", [("uniform", 0.0), ("uniform", 1.5), ("random", 0.1)])
def test_invalid_strategy(kind, rate):
    with pytest.raises(ValueError):
        PlantingStrategy(kind, rate)


# ── Spreader files ────────────────────────────────────────────────────────────

def test_spreader_file_reads_back(tmp_path):
    g, _, ts = _sbm_with_scores()
    spreaders = plant_spreaders(g, ts, PlantingStrategy("uniform", 0.3), seed=2)
    path = tmp_path / "spreaders.txt"
    write_spreaders(g, spreaders, path)
    assert load_spreaders(path, g) == spreaders


def test_spreader_file_replaced_whole(tmp_path):
    g = build_graph([("a", "b"), ("b", "c")])
    path = tmp_path / "spreaders.txt"
    path.write_text("stale\nlines\nhere\n")
    write_spreaders(g, {g.node_id("c"), g.node_id("a")}, path)
    assert path.read_bytes() == b"a\nc\n"
    assert sorted(p.name for p in tmp_path.iterdir()) == ["spreaders.txt"]
    write_spreaders(g, set(), path)
    assert path.read_bytes() == b""


def test_spreader_file_skips_comments_and_unknown_ids(tmp_path):
    g = build_graph([("a", "b"), ("b", "c")])
    path = tmp_path / "spreaders.txt"
    path.write_text("# planted\n\na\n  c  \nghost\n")
    assert load_spreaders(path, g) == {g.node_id("a"), g.node_id("c")}


# ── End-to-end direction ──────────────────────────────────────────────────────

@pytest.mark.slow
def test_trust_planting_is_more_identifiable_than_uniform():
    wins = 0
    for seed in range(10):
        g, truth = generate_sbm(SbmParams(block_sizes=(100,) * 10, p_in=0.05, p_out=0.005, seed=seed))
        ts = normalize_scores(compute_tsm(g))
        roles = classify_roles(g, truth)
        report = assess(g, ts, truth, roles)
        scores = {}
        for kind in ("trust", "uniform"):
            planted = plant_spreaders(g, ts, PlantingStrategy(kind, 0.05), seed=seed)
            scores[kind] = evaluate(report, roles, planted).map
        wins += scores["trust"] > scores["uniform"]
    assert wins >= 8
