import itertools

import networkx as nx
import numpy as np
import pytest

from community import (AssignmentError, CommunityAssignment, detect, label_propagation,
                       load_assignment, louvain, louvain_passes, modularity, partition_nmi,
                       write_assignment)
from graph_core import EmptyGraphError, build_graph, symmetrize
from synth import SbmParams, generate_sbm


def _undirected(pairs):
    return build_graph([e for u, v in pairs for e in ((u, v), (v, u))])


def _groups(g, a):
    """Communities as sets of external ids, order-free."""
    return {frozenset(g.ids[v] for v in a.members(c)) for c in range(a.community_count)}


def _two_cliques():
    left = list(itertools.combinations("abcd", 2))
    right = list(itertools.combinations("efgh", 2))
    return _undirected(left + right + [("d", "e")])


def _two_triangles():
    # Mutual follows inside each triangle, one-sided bridge c -> d
    pairs = [("a", "b"), ("b", "c"), ("a", "c"), ("d", "e"), ("e", "f"), ("d", "f")]
    return build_graph([e for u, v in pairs for e in ((u, v), (v, u))] + [("c", "d")])


# ── Louvain ───────────────────────────────────────────────────────────────────

def test_louvain_splits_two_cliques():
    g = _two_cliques()
    a = louvain(symmetrize(g), seed=0)
    assert _groups(g, a) == {frozenset("abcd"), frozenset("efgh")}


def test_louvain_single_node():
    g = build_graph([("a", "a")])
    a = louvain(symmetrize(g))
    assert list(a.labels) == [0]


def test_louvain_edgeless_graph_gives_singletons():
    g = build_graph([(x, x) for x in "abcde"])
    passes = louvain_passes(symmetrize(g))
    a, q = passes[-1]
    assert a.community_count == 5
    assert q is None


def test_louvain_empty_graph():
    with pytest.raises(EmptyGraphError):
        louvain(symmetrize(build_graph([])))


def test_louvain_modularity_never_decreases():
    g, _ = generate_sbm(SbmParams(block_sizes=(20, 20, 20), p_in=0.25, p_out=0.02, seed=9))
    qs = [q for _, q in louvain_passes(symmetrize(g), seed=3)]
    assert all(later >= earlier - 1e-12 for earlier, later in zip(qs, qs[1:]))


def test_louvain_is_seed_deterministic():
    g, _ = generate_sbm(SbmParams(block_sizes=(15, 15, 15), p_in=0.3, p_out=0.03, seed=4))
    view = symmetrize(g)
    assert np.array_equal(louvain(view, seed=5).labels, louvain(view, seed=5).labels)


def test_louvain_recovers_planted_blocks():
    hits = 0
    for seed in range(10):
        g, truth = generate_sbm(SbmParams(block_sizes=(25, 25, 25, 25), p_in=0.3, p_out=0.01, seed=seed))
        a = louvain(symmetrize(g), seed=seed)
        hits += partition_nmi(a, truth) >= 0.9
    assert hits >= 9


# ── Label propagation ─────────────────────────────────────────────────────────

@pytest.mark.parametrize("seed", [0, 1, 2, 3, 17])
def test_lpa_two_triangles(seed):
    g = _two_triangles()
    a = label_propagation(symmetrize(g), seed=seed)
    assert _groups(g, a) == {frozenset("abc"), frozenset("def")}


def test_lpa_single_edge_merges():
    g = build_graph([("a", "b")])
    assert label_propagation(symmetrize(g), seed=0).community_count == 1


def test_lpa_edgeless_graph():
    g = build_graph([(x, x) for x in "abc"])
    assert label_propagation(symmetrize(g)).community_count == 3


def test_lpa_labels_are_compact():
    g, _ = generate_sbm(SbmParams(block_sizes=(10, 10), p_in=0.5, p_out=0.05, seed=2))
    a = label_propagation(symmetrize(g), seed=2)
    assert set(a.labels.tolist()) == set(range(a.community_count))


def test_lpa_is_seed_deterministic():
    g, _ = generate_sbm(SbmParams(block_sizes=(30, 30, 30), p_in=0.15, p_out=0.03, seed=4))
    view = symmetrize(g)
    for seed in (0, 5, 123):
        first = label_propagation(view, seed=seed)
        for _ in range(3):
            assert np.array_equal(label_propagation(view, seed=seed).labels, first.labels)


# ── Modularity ────────────────────────────────────────────────────────────────

def test_modularity_two_disconnected_triangles():
    g = _undirected([("a", "b"), ("b", "c"), ("a", "c"), ("d", "e"), ("e", "f"), ("d", "f")])
    a = CommunityAssignment(labels=np.array([0, 0, 0, 1, 1, 1]))
    assert modularity(symmetrize(g), a) == pytest.approx(0.5)


def test_modularity_single_community_is_zero():
    g = _two_cliques()
    a = CommunityAssignment(labels=np.zeros(g.node_count, dtype=np.int64))
    assert modularity(symmetrize(g), a) == pytest.approx(0.0, abs=1e-15)


def test_modularity_singletons_on_clique_negative():
    g = _undirected(list(itertools.combinations("abcd", 2)))
    a = CommunityAssignment(labels=np.arange(4))
    assert modularity(symmetrize(g), a) < 0


def test_modularity_matches_networkx():
    rng = np.random.default_rng(12)
    g, _ = generate_sbm(SbmParams(block_sizes=(12, 12), p_in=0.4, p_out=0.1, seed=12))
    view = symmetrize(g)
    labels = rng.integers(0, 4, size=g.node_count)
    a = CommunityAssignment.from_labels(labels)
    parts = [set(a.members(c).tolist()) for c in range(a.community_count)]
    expected = nx.algorithms.community.modularity(view.to_networkx(), parts, weight="weight")
    assert modularity(view, a) == pytest.approx(expected, abs=1e-12)


def test_modularity_zero_weight():
    g = build_graph([("a", "a")])
    with pytest.raises(ValueError):
        modularity(symmetrize(g), CommunityAssignment(labels=np.array([0])))


# ── Assignment files ──────────────────────────────────────────────────────────

def test_load_assignment_one_community():
    g = build_graph([("a", "b")])
    assert load_assignment(b"a\t7\nb\t7\n", g).community_count == 1


def test_load_assignment_missing_node_named():
    g = build_graph([("a", "b")])
    with pytest.raises(AssignmentError, match="b"):
        load_assignment(b"a\t1\n", g)


def test_load_assignment_duplicate():
    g = build_graph([("a", "b")])
    with pytest.raises(AssignmentError, match="duplicate"):
        load_assignment(b"a\t1\na\t2\n", g)


def test_load_assignment_unknown_node():
    g = build_graph([("a", "b")])
    with pytest.raises(AssignmentError, match="unknown"):
        load_assignment(b"a\t1\nb\t1\nzz\t1\n", g)


def test_written_assignment_loads_back(tmp_path):
    g = _two_cliques()
    a = louvain(symmetrize(g))
    path = tmp_path / "communities.tsv"
    write_assignment(g, a, path)
    assert np.array_equal(load_assignment(path, g).labels, a.labels)


# ── Dispatcher and NMI ────────────────────────────────────────────────────────

def test_detect_dispatch(tmp_path):
    g = _two_triangles()
    path = tmp_path / "c.tsv"
    path.write_text("a\tx\nb\tx\nc\tx\nd\ty\ne\ty\nf\ty\n")
    from_file = detect(g, "file", assignment_path=path)
    assert _groups(g, from_file) == {frozenset("abc"), frozenset("def")}
    assert detect(g, "lpa", seed=0).community_count == 2
    with pytest.raises(ValueError):
        detect(g, "infomap")
    with pytest.raises(ValueError):
        detect(g, "file")


def test_partition_nmi_ignores_label_names():
    a = CommunityAssignment(labels=np.array([0, 0, 1, 1]))
    b = CommunityAssignment(labels=np.array([1, 1, 0, 0]))
    assert partition_nmi(a, b) == pytest.approx(1.0)
