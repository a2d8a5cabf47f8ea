"""
graph_core.py
=============
Directed weighted follower graph: ingestion, id interning, adjacency access.

Functions:
  build_graph(edges)                : intern ids, drop self-loops, sum duplicates
  load_edge_list(source, fmt)       : parse a tab/comma edge list into a graph
  write_edge_list(g, path, fmt)     : write a graph back out in the same format
  symmetrize(g)                     : undirected view used by community detection
  neighbors(g, v, direction)        : sorted (node, weight) pairs for one node

Node ids are dense integers 0..n-1; ``DirectedGraph.ids`` maps them back to
the external string identifiers. Adjacency is stored as scipy CSR matrices
with sorted column indices, so every per-node slice is already in ascending
NodeId order.
"""

import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from reports import write_csv

logger = logging.getLogger(__name__)

# ── Configuration Constants ───────────────────────────────────────────────────

SEPARATORS = {"tsv": "\t", "csv": ","}
DEFAULT_WEIGHT = 1.0

EdgeTuple = Union[Tuple[str, str], Tuple[str, str, Optional[float]]]


class EdgeListError(ValueError):
    """Malformed edge list entry; ``line`` is 1-based."""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyGraphError(ValueError):
    """Raised by operations that need at least one node."""


# ── Graph types ───────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class DirectedGraph:
    """
    Immutable weighted digraph. ``out_adj[u, v]`` and ``in_adj[v, u]`` both hold
    w(u, v); the two matrices always describe the same edge set.
    """
    ids: Tuple[str, ...]
    out_adj: sp.csr_matrix
    in_adj: sp.csr_matrix
    _index: Dict[str, int] = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not self._index and self.ids:
            object.__setattr__(self, "_index", {x: i for i, x in enumerate(self.ids)})

    @property
    def node_count(self) -> int:
        return len(self.ids)

    @property
    def edge_count(self) -> int:
        return int(self.out_adj.nnz)

    @property
    def out_degree(self) -> np.ndarray:
        return np.diff(self.out_adj.indptr)

    @property
    def in_degree(self) -> np.ndarray:
        return np.diff(self.in_adj.indptr)

    def node_id(self, external: str) -> int:
        """Dense handle for an external id; KeyError if unknown."""
        return self._index[external]

    def has_node(self, external: str) -> bool:
        return external in self._index

    def has_edge(self, u: int, v: int) -> bool:
        row = self.out_adj.indices[self.out_adj.indptr[u]:self.out_adj.indptr[u + 1]]
        pos = np.searchsorted(row, v)
        return bool(pos < len(row) and row[pos] == v)

    def edges(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(src, dst, weight) arrays in (src, dst) ascending order."""
        coo = self.out_adj.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data

    @classmethod
    def from_arrays(cls, src: np.ndarray, dst: np.ndarray, weight: np.ndarray,
                    ids: Sequence[str]) -> "DirectedGraph":
        """
        Build from dense-id arrays. Self-loops are dropped and duplicate
        (src, dst) pairs are summed; caller guarantees weights are positive.
        """
        n = len(ids)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        weight = np.asarray(weight, dtype=np.float64)
        keep = src != dst
        if not keep.all():
            logger.debug("Dropping %d self-loop(s)", int((~keep).sum()))
        out_adj = sp.coo_matrix(
            (weight[keep], (src[keep], dst[keep])), shape=(n, n)
        ).tocsr()
        out_adj.sum_duplicates()
        out_adj.sort_indices()
        in_adj = out_adj.transpose().tocsr()
        in_adj.sort_indices()
        return cls(ids=tuple(str(x) for x in ids), out_adj=out_adj, in_adj=in_adj)


@dataclass(frozen=True, eq=False)
class UndirectedView:
    """Symmetric adjacency; weight of {u, v} is w(u, v) + w(v, u)."""
    ids: Tuple[str, ...]
    adj: sp.csr_matrix

    @property
    def node_count(self) -> int:
        return len(self.ids)

    @property
    def total_weight(self) -> float:
        """m: sum of undirected edge weights, each pair counted once."""
        return float(self.adj.sum()) / 2.0

    def to_networkx(self):
        """networkx Graph with the same nodes (0..n-1) and weights, sorted insertion."""
        import networkx as nx

        g = nx.Graph()
        g.add_nodes_from(range(self.node_count))
        upper = sp.triu(self.adj, k=1).tocoo()
        order = np.lexsort((upper.col, upper.row))
        g.add_weighted_edges_from(
            zip(upper.row[order].tolist(), upper.col[order].tolist(), upper.data[order].tolist())
        )
        return g


# ── Construction ──────────────────────────────────────────────────────────────

def _check_weight(raw, line: int) -> float:
    if raw is None:
        return DEFAULT_WEIGHT
    try:
        w = float(raw)
    except (TypeError, ValueError):
        raise EdgeListError(line, f"weight {raw!r} is not a number") from None
    if not math.isfinite(w) or w <= 0:
        raise EdgeListError(line, f"weight {raw!r} must be positive and finite")
    return w


def build_graph(edges: Iterable[EdgeTuple]) -> DirectedGraph:
    """
    Build a DirectedGraph from (src, dst[, weight]) tuples.
    Ids are interned in first-seen order (src before dst within an edge).
    Entry positions in error messages are 1-based.
    """
    src_ids: List[str] = []
    dst_ids: List[str] = []
    weights: List[float] = []
    for line, edge in enumerate(edges, start=1):
        if len(edge) not in (2, 3):
            raise EdgeListError(line, f"expected 2 or 3 fields, got {len(edge)}")
        src_ids.append(str(edge[0]))
        dst_ids.append(str(edge[1]))
        weights.append(_check_weight(edge[2] if len(edge) == 3 else None, line))

    if not src_ids:
        return DirectedGraph.from_arrays(np.empty(0), np.empty(0), np.empty(0), ())

    # Interleave so factorize sees src then dst of each edge in input order
    interleaved = np.empty(2 * len(src_ids), dtype=object)
    interleaved[0::2] = src_ids
    interleaved[1::2] = dst_ids
    codes, uniques = pd.factorize(interleaved, sort=False)
    g = DirectedGraph.from_arrays(codes[0::2], codes[1::2], np.asarray(weights), uniques.tolist())
    logger.info("Built graph: %d nodes, %d edges", g.node_count, g.edge_count)
    return g


def _parse_lines(stream: Iterable[bytes], sep: str) -> Iterator[EdgeTuple]:
    for line_no, raw in enumerate(stream, start=1):
        try:
            text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        except UnicodeDecodeError:
            raise EdgeListError(line_no, "not valid UTF-8") from None
        text = text.rstrip("\r\n")
        if not text or text.startswith("#"):
            continue
        fields = text.split(sep)
        if len(fields) not in (2, 3) or not fields[0] or not fields[1]:
            raise EdgeListError(line_no, f"expected 'src{sep!r}dst[{sep!r}weight]', got {text!r}")
        weight = _check_weight(fields[2], line_no) if len(fields) == 3 else None
        yield (fields[0], fields[1], weight)


def load_edge_list(source: Union[BinaryIO, str, Path, bytes], fmt: str = "tsv") -> DirectedGraph:
    """
    Parse an edge list: one ``src<SEP>dst[<SEP>weight]`` per line, SEP a tab
    (``tsv``) or comma (``csv``); ``#`` lines are comments. Errors carry the
    physical line number. Empty input yields an empty graph.
    """
    if fmt not in SEPARATORS:
        raise ValueError(f"Unknown edge list format {fmt!r} (expected one of {sorted(SEPARATORS)})")
    sep = SEPARATORS[fmt]

    if isinstance(source, bytes):
        source = io.BytesIO(source)
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            tuples = list(_parse_lines(f, sep))
    else:
        tuples = list(_parse_lines(source, sep))

    # Blank weight fields were already validated; drop the None sentinel
    return build_graph((s, d) if w is None else (s, d, w) for s, d, w in tuples)


def write_edge_list(g: DirectedGraph, path: Union[str, Path], fmt: str = "tsv") -> None:
    """Write every edge as ``src<SEP>dst<SEP>weight`` in (src, dst) order."""
    sep = SEPARATORS[fmt]
    src, dst, w = g.edges()
    ids = np.asarray(g.ids, dtype=object)
    frame = pd.DataFrame({"src": ids[src], "dst": ids[dst], "weight": w})
    write_csv(frame, path, sep=sep, header=False)


# ── Views and access ──────────────────────────────────────────────────────────

def symmetrize(g: DirectedGraph) -> UndirectedView:
    """Undirected view: {u, v} weighted by w(u, v) + w(v, u)."""
    adj = (g.out_adj + g.in_adj).tocsr()
    adj.eliminate_zeros()
    adj.sort_indices()
    return UndirectedView(ids=g.ids, adj=adj)


def neighbors(g: DirectedGraph, v: int, direction: str = "out") -> List[Tuple[int, float]]:
    """(NodeId, weight) pairs adjacent to v, ascending by NodeId."""
    if not 0 <= v < g.node_count:
        raise IndexError(f"node {v} out of range for graph with {g.node_count} nodes")
    if direction == "out":
        adj = g.out_adj
    elif direction == "in":
        adj = g.in_adj
    else:
        raise ValueError(f"direction must be 'out' or 'in', got {direction!r}")
    lo, hi = adj.indptr[v], adj.indptr[v + 1]
    return list(zip(adj.indices[lo:hi].tolist(), adj.data[lo:hi].tolist()))
