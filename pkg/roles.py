"""
roles.py
========
Neighbor / boundary / core classification of nodes around each community.

Functions:
  classify_roles(g, assignment, edge_semantics) : one RoleSet per community
  role_table(g, roles)                          : community,node,role dump
  neighbor_table(g, roles)                      : community,boundary_node,neighbor_node dump
  community_statistics(roles, truth)            : community statistics table

Edge semantics:
  follow-out    : n is a neighbor of b when b follows n (edge b -> n), so
                  information flows n -> b in the direction believability uses
  any-adjacency : an edge in either direction counts
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set

import numpy as np
import pandas as pd

from community import AssignmentError, CommunityAssignment
from graph_core import DirectedGraph

logger = logging.getLogger(__name__)

FOLLOW_OUT = "follow-out"
ANY_ADJACENCY = "any-adjacency"
EDGE_SEMANTICS = (FOLLOW_OUT, ANY_ADJACENCY)
# CLI shorthand
SEMANTICS_ALIASES = {"follow-out": FOLLOW_OUT, "any": ANY_ADJACENCY, "any-adjacency": ANY_ADJACENCY}


@dataclass(frozen=True, eq=False)
class RoleSet:
    """
    Roles around community ``community``. All node arrays are sorted ascending;
    ``boundary_edges`` rows are (boundary node, neighbor node) sorted the same way.
    """
    community: int
    members: np.ndarray
    boundary: np.ndarray
    core: np.ndarray
    neighbors: np.ndarray
    boundary_edges: np.ndarray
    boundary_neighbors: Dict[int, np.ndarray] = field(default_factory=dict)

    @property
    def size(self) -> int:
        return len(self.members)


def _external_pairs(g: DirectedGraph, labels: np.ndarray, edge_semantics: str) -> pd.DataFrame:
    src, dst, _ = g.edges()
    crossing = labels[src] != labels[dst]
    pairs = pd.DataFrame({"boundary": src[crossing], "neighbor": dst[crossing]})
    if edge_semantics == ANY_ADJACENCY:
        reverse = pd.DataFrame({"boundary": dst[crossing], "neighbor": src[crossing]})
        pairs = pd.concat([pairs, reverse], ignore_index=True)
    pairs = pairs.drop_duplicates().sort_values(["boundary", "neighbor"], kind="mergesort")
    pairs["community"] = labels[pairs["boundary"].to_numpy()]
    return pairs.reset_index(drop=True)


def classify_roles(g: DirectedGraph, a: CommunityAssignment,
                   edge_semantics: str = FOLLOW_OUT) -> List[RoleSet]:
    """One RoleSet per community label 0..k-1, in label order."""
    edge_semantics = SEMANTICS_ALIASES.get(edge_semantics, edge_semantics)
    if edge_semantics not in EDGE_SEMANTICS:
        raise ValueError(f"edge_semantics must be one of {EDGE_SEMANTICS}, got {edge_semantics!r}")
    if len(a.labels) != g.node_count:
        raise AssignmentError(f"assignment covers {len(a.labels)} nodes, graph has {g.node_count}")

    labels = a.labels
    pairs = _external_pairs(g, labels, edge_semantics)
    by_community = dict(tuple(pairs.groupby("community", sort=True)))
    order = np.argsort(labels, kind="stable")
    splits = np.split(order, np.cumsum(a.sizes())[:-1]) if g.node_count else []

    role_sets: List[RoleSet] = []
    for c, members in enumerate(splits):
        chunk = by_community.get(c)
        if chunk is None:
            role_sets.append(RoleSet(
                community=c, members=members, boundary=np.empty(0, dtype=np.int64),
                core=members, neighbors=np.empty(0, dtype=np.int64),
                boundary_edges=np.empty((0, 2), dtype=np.int64),
            ))
            continue
        edges = chunk[["boundary", "neighbor"]].to_numpy(dtype=np.int64)
        boundary, starts = np.unique(edges[:, 0], return_index=True)
        per_node = np.split(edges[:, 1], starts[1:])
        role_sets.append(RoleSet(
            community=c,
            members=members,
            boundary=boundary,
            core=np.setdiff1d(members, boundary, assume_unique=True),
            neighbors=np.unique(edges[:, 1]),
            boundary_edges=edges,
            boundary_neighbors={int(b): nbrs for b, nbrs in zip(boundary, per_node)},
        ))

    for rs in role_sets:
        assert len(rs.boundary) + len(rs.core) == rs.size, f"community {rs.community}: role partition broken"
    logger.info("Classified roles for %d communities (%s): %d boundary nodes, %d boundary edges",
                len(role_sets), edge_semantics,
                sum(len(rs.boundary) for rs in role_sets),
                sum(len(rs.boundary_edges) for rs in role_sets))
    return role_sets


# ── Dumps and statistics ──────────────────────────────────────────────────────

def role_table(g: DirectedGraph, roles: List[RoleSet]) -> pd.DataFrame:
    """community,node,role with role in {boundary, core}; sorted by community then NodeId."""
    ids = np.asarray(g.ids, dtype=object)
    frames = []
    for rs in roles:
        is_boundary = np.isin(rs.members, rs.boundary)
        frames.append(pd.DataFrame({
            "community": rs.community,
            "node": ids[rs.members],
            "role": np.where(is_boundary, "boundary", "core"),
        }))
    if not frames:
        return pd.DataFrame(columns=["community", "node", "role"])
    return pd.concat(frames, ignore_index=True)


def neighbor_table(g: DirectedGraph, roles: List[RoleSet]) -> pd.DataFrame:
    ids = np.asarray(g.ids, dtype=object)
    frames = [
        pd.DataFrame({
            "community": rs.community,
            "boundary_node": ids[rs.boundary_edges[:, 0]],
            "neighbor_node": ids[rs.boundary_edges[:, 1]],
        })
        for rs in roles if len(rs.boundary_edges)
    ]
    if not frames:
        return pd.DataFrame(columns=["community", "boundary_node", "neighbor_node"])
    return pd.concat(frames, ignore_index=True)


def community_statistics(roles: List[RoleSet], truth: Optional[Set[int]] = None) -> Dict[str, float]:
    """
    Network-level averages over communities: size, infected members, boundary
    edges, boundary nodes, neighbor nodes, infected boundary and neighbor nodes.
    Infected columns are left out when no ground truth is given.
    """
    records = []
    truth_arr = np.fromiter(sorted(truth), dtype=np.int64) if truth is not None else None
    for rs in roles:
        row = {
            "nodes": rs.size,
            "boundary_edges": len(rs.boundary_edges),
            "boundary_nodes": len(rs.boundary),
            "neighbor_nodes": len(rs.neighbors),
        }
        if truth_arr is not None:
            row["infected_nodes"] = int(np.isin(rs.members, truth_arr).sum())
            row["infected_boundary"] = int(np.isin(rs.boundary, truth_arr).sum())
            row["infected_neighbors"] = int(np.isin(rs.neighbors, truth_arr).sum())
        records.append(row)
    rows = pd.DataFrame(records)
    stats: Dict[str, float] = {"communities": len(roles)}
    if rows.empty:
        return stats
    for col in rows.columns:
        stats[f"avg_{col}"] = float(rows[col].mean())
    return stats
