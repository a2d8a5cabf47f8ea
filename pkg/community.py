"""
community.py
============
Disjoint community assignments over the symmetrized follower graph.

Functions:
  louvain(g, seed, resolution)            : greedy modularity (local moving + aggregation)
  louvain_passes(g, seed, resolution)     : every outer Louvain pass with its Q
  label_propagation(g, seed, max_sweeps)  : asynchronous weighted label propagation
  modularity(g, assignment, resolution)   : Newman-Girvan Q with weighted degrees
  load_assignment(source, g)              : node_id<TAB>label file (e.g. Infomap output)
  assignment_table(g, a)                  : node_id,community DataFrame
  write_assignment(g, a, path)            : dump in the load format
  partition_nmi(a, b)                     : normalized mutual information of two partitions
  detect(g, algo, ...)                    : dispatcher used by the CLI
"""

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from networkx.algorithms.community import louvain_partitions
from sklearn.metrics import normalized_mutual_info_score

from graph_core import DirectedGraph, EmptyGraphError, UndirectedView, symmetrize
from reports import write_csv

logger = logging.getLogger(__name__)

# ── Configuration Constants ───────────────────────────────────────────────────

DEFAULT_RESOLUTION = 1.0
DEFAULT_MAX_SWEEPS = 100
LOUVAIN_THRESHOLD = 1e-7    # minimum Q gain for another outer pass
ALGORITHMS = ("louvain", "lpa", "file")
ASSIGNMENT_CSV = {"sep": "\t", "header": False}


class AssignmentError(ValueError):
    """Community file does not describe a partition of the graph."""


@dataclass(frozen=True, eq=False)
class CommunityAssignment:
    """labels[v] in 0..k-1, every node labelled exactly once."""
    labels: np.ndarray

    @property
    def community_count(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0

    def members(self, c: int) -> np.ndarray:
        return np.flatnonzero(self.labels == c)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.community_count)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "CommunityAssignment":
        """Compact arbitrary labels to 0..k-1 in order of first appearance by NodeId."""
        codes, _ = pd.factorize(np.asarray(labels), sort=False)
        return cls(labels=codes.astype(np.int64))


# ── Modularity ────────────────────────────────────────────────────────────────

def modularity(g: UndirectedView, a: CommunityAssignment, resolution: float = 1.0) -> float:
    """Q = sum_c [ in_c / 2m - resolution * (tot_c / 2m)^2 ]."""
    if len(a.labels) != g.node_count:
        raise AssignmentError(f"assignment covers {len(a.labels)} nodes, graph has {g.node_count}")
    two_m = float(g.adj.sum())
    if two_m <= 0:
        raise ValueError("modularity undefined: graph has zero total weight")
    coo = g.adj.tocoo()
    same = a.labels[coo.row] == a.labels[coo.col]
    k = a.community_count
    internal = np.bincount(a.labels[coo.row[same]], weights=coo.data[same], minlength=k)
    degree = np.asarray(g.adj.sum(axis=1)).ravel()
    total = np.bincount(a.labels, weights=degree, minlength=k)
    return float(np.sum(internal / two_m - resolution * (total / two_m) ** 2))


# ── Louvain ───────────────────────────────────────────────────────────────────

def _require_nodes(g: UndirectedView) -> None:
    if g.node_count == 0:
        raise EmptyGraphError("community detection needs at least one node")


def _sets_to_assignment(parts: Sequence[set], n: int) -> CommunityAssignment:
    labels = np.empty(n, dtype=np.int64)
    # Order communities by their smallest member so labels do not depend on set order
    for c, members in enumerate(sorted(parts, key=min)):
        labels[list(members)] = c
    return CommunityAssignment(labels=labels)


def louvain_passes(g: UndirectedView, seed: int = 0,
                   resolution: float = DEFAULT_RESOLUTION) -> List[Tuple[CommunityAssignment, Optional[float]]]:
    """
    One (assignment, Q) per outer pass: local moving until no single move
    improves Q, then aggregation. Visit order is shuffled by ``seed``.
    Q is None on a graph without edges.
    """
    _require_nodes(g)
    if resolution <= 0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    if g.adj.nnz == 0:
        # No move can improve Q without edges
        return [(CommunityAssignment(labels=np.arange(g.node_count, dtype=np.int64)), None)]
    nxg = g.to_networkx()
    passes = []
    for level in louvain_partitions(nxg, weight="weight", resolution=resolution,
                                    threshold=LOUVAIN_THRESHOLD, seed=seed):
        a = _sets_to_assignment(level, g.node_count)
        q = modularity(g, a, resolution)
        passes.append((a, q))
        logger.debug("Louvain pass %d: %d communities, Q=%s", len(passes), a.community_count, q)
    return passes


def louvain(g: UndirectedView, seed: int = 0, resolution: float = DEFAULT_RESOLUTION) -> CommunityAssignment:
    final, q = louvain_passes(g, seed, resolution)[-1]
    logger.info("Louvain: %d communities (Q=%s)", final.community_count,
                f"{q:.6f}" if q is not None else "n/a")
    return final


# ── Label propagation ─────────────────────────────────────────────────────────

def label_propagation(g: UndirectedView, seed: int = 0,
                      max_sweeps: int = DEFAULT_MAX_SWEEPS) -> CommunityAssignment:
    """
    Every node starts with its own label. Each sweep visits nodes in a seeded
    random order; a node adopts the neighbor label with the largest summed edge
    weight, ties going to the smallest label. Stops after a sweep with no change.
    """
    _require_nodes(g)
    if max_sweeps < 1:
        raise ValueError(f"max_sweeps must be >= 1, got {max_sweeps}")
    n = g.node_count
    rng = np.random.default_rng(seed)
    labels = np.arange(n, dtype=np.int64)
    indptr, indices, data = g.adj.indptr, g.adj.indices, g.adj.data

    for sweep in range(1, max_sweeps + 1):
        changed = 0
        for v in rng.permutation(n):
            lo, hi = indptr[v], indptr[v + 1]
            if lo == hi:
                continue
            scores: Dict[int, float] = {}
            for u, w in zip(indices[lo:hi].tolist(), data[lo:hi].tolist()):
                lab = int(labels[u])
                scores[lab] = scores.get(lab, 0.0) + w
            best = max(scores.values())
            choice = min(lab for lab, score in scores.items() if score == best)
            if choice != labels[v]:
                labels[v] = choice
                changed += 1
        logger.debug("LPA sweep %d: %d label change(s)", sweep, changed)
        if changed == 0:
            break
    else:
        logger.warning("Label propagation hit max_sweeps=%d before stabilising", max_sweeps)

    a = CommunityAssignment.from_labels(labels)
    logger.info("Label propagation: %d communities after %d sweep(s)", a.community_count, sweep)
    return a


# ── Assignment files ──────────────────────────────────────────────────────────

def load_assignment(source: Union[BinaryIO, str, Path, bytes], g: DirectedGraph) -> CommunityAssignment:
    """
    Read ``node_id<TAB>community_label`` lines (``#`` comments allowed).
    Every graph node must appear exactly once; labels are compacted.
    """
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            raw_lines = f.read().decode("utf-8").splitlines()
    else:
        raw_lines = source.read().decode("utf-8").splitlines()

    raw_labels: Dict[int, str] = {}
    for line_no, text in enumerate(raw_lines, start=1):
        if not text or text.startswith("#"):
            continue
        fields = text.split("\t")
        if len(fields) != 2:
            raise AssignmentError(f"line {line_no}: expected 'node_id<TAB>community', got {text!r}")
        node, label = fields
        if not g.has_node(node):
            raise AssignmentError(f"line {line_no}: unknown node id {node!r}")
        v = g.node_id(node)
        if v in raw_labels:
            raise AssignmentError(f"line {line_no}: duplicate entry for node {node!r}")
        raw_labels[v] = label

    missing = [g.ids[v] for v in range(g.node_count) if v not in raw_labels]
    if missing:
        raise AssignmentError(f"assignment missing {len(missing)} node(s): {', '.join(missing[:5])}")
    a = CommunityAssignment.from_labels([raw_labels[v] for v in range(g.node_count)])
    logger.info("Loaded assignment: %d communities", a.community_count)
    return a


def assignment_table(g: DirectedGraph, a: CommunityAssignment) -> pd.DataFrame:
    return pd.DataFrame({"node_id": list(g.ids), "community": a.labels})


def write_assignment(g: DirectedGraph, a: CommunityAssignment, path: Union[str, Path]) -> None:
    write_csv(assignment_table(g, a), path, **ASSIGNMENT_CSV)


# ── Helpers ───────────────────────────────────────────────────────────────────

def partition_nmi(a: CommunityAssignment, b: CommunityAssignment) -> float:
    return float(normalized_mutual_info_score(a.labels, b.labels))


def detect(g: DirectedGraph, algo: str = "louvain", seed: int = 0,
           resolution: float = DEFAULT_RESOLUTION, max_sweeps: int = DEFAULT_MAX_SWEEPS,
           assignment_path: Optional[Union[str, Path]] = None) -> CommunityAssignment:
    """Run the named detector on the symmetrized graph, or load an external file."""
    if algo == "file":
        if assignment_path is None:
            raise ValueError("algo 'file' needs an assignment path")
        return load_assignment(assignment_path, g)
    view = symmetrize(g)
    if algo == "louvain":
        return louvain(view, seed=seed, resolution=resolution)
    if algo == "lpa":
        return label_propagation(view, seed=seed, max_sweeps=max_sweeps)
    raise ValueError(f"unknown community algorithm {algo!r} (expected one of {ALGORITHMS})")
