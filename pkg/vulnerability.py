"""
vulnerability.py
================
Believability-based vulnerability of boundary nodes and communities.

Functions:
  node_vulnerability(ts, b, neighbors)    : V(b) = 1 - prod_n (1 - tw(n) ti(b))
  community_vulnerability(node_scores)    : V~(C) = 1 - prod_b (1 - V(b))
  assess(g, ts, assignment, roles, ...)   : every boundary node and community, ranked
  all_node_vulnerability(g, ts)           : V over each node's full follow set
  report_to_json / node_table / community_table : report serialization
  spreader_table(g, ts, assignment, roles, spreaders) : trust and V of each known spreader

Products run over neighbors / boundary nodes in ascending NodeId order so
results are bit-reproducible. A running product that drops below 1e-300 is
continued as a sum of log1p terms.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Set

import numpy as np
import pandas as pd

from community import CommunityAssignment
from graph_core import DirectedGraph
from roles import RoleSet
from trust import TrustScores

logger = logging.getLogger(__name__)

UNDERFLOW_GUARD = 1e-300


class InconsistentInputError(ValueError):
    """Graph, trust scores, assignment and roles describe different node sets."""


# ── Report types ──────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class NodeVulnerability:
    node: int
    community: int
    score: float


@dataclass
class CommunityVulnerability:
    community: int
    score: float
    boundary_count: int
    spreader_boundary_count: Optional[int] = None


@dataclass
class VulnerabilityReport:
    """Rankings ordered by (score desc, id asc)."""
    node_rankings: Dict[int, List[NodeVulnerability]]
    community_ranking: List[CommunityVulnerability]
    params: Dict[str, object] = field(default_factory=dict)

    def community_scores(self) -> Dict[int, float]:
        return {cv.community: cv.score for cv in self.community_ranking}


# ── Core formulas ─────────────────────────────────────────────────────────────

def _at_least_one(probabilities: Iterable[float]) -> float:
    """1 - prod(1 - p), accumulated in the given order."""
    product = 1.0
    log_sum: Optional[float] = None
    for p in probabilities:
        if p >= 1.0:
            return 1.0
        if log_sum is not None:
            log_sum += math.log1p(-p)
            continue
        product *= 1.0 - p
        if product < UNDERFLOW_GUARD:
            log_sum = math.log(product) if product > 0 else -math.inf
    if log_sum is not None:
        return -math.expm1(log_sum)
    return 1.0 - product


def node_vulnerability(ts: TrustScores, b: int, neighbors: Iterable[int]) -> float:
    """
    Likelihood that b believes at least one of ``neighbors``. Works for any
    node, not only boundary nodes; an empty neighbor set gives 0.
    """
    ordered = sorted({int(n) for n in neighbors})
    if b in ordered:
        raise ValueError(f"node {b} cannot be its own neighbor")
    ti_b = float(ts.ti[b])
    return _at_least_one(float(ts.tw[n]) * ti_b for n in ordered)


def community_vulnerability(node_scores: Sequence[float]) -> float:
    """Likelihood that at least one boundary node believes a neighbor; [] gives 0."""
    for v in node_scores:
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"node vulnerability {v} outside [0, 1]")
    return _at_least_one(float(v) for v in node_scores)


def all_node_vulnerability(g: DirectedGraph, ts: TrustScores) -> np.ndarray:
    """V for every node over everyone it follows (out-neighbors)."""
    out = g.out_adj
    scores = np.zeros(g.node_count)
    for v in range(g.node_count):
        lo, hi = out.indptr[v], out.indptr[v + 1]
        if lo < hi:
            scores[v] = _at_least_one((ts.tw[out.indices[lo:hi]] * ts.ti[v]).tolist())
    return scores


# ── Assessment ────────────────────────────────────────────────────────────────

def _rank_nodes(items: List[NodeVulnerability]) -> List[NodeVulnerability]:
    return sorted(items, key=lambda x: (-x.score, x.node))


def assess(g: DirectedGraph, ts: TrustScores, a: CommunityAssignment, roles: List[RoleSet],
           infected: Optional[Set[int]] = None, params: Optional[Dict[str, object]] = None) -> VulnerabilityReport:
    """
    For each community, each boundary node b: bel_nb over its neighbor set, then
    V(b), then V~(C). ``infected`` restricts each neighbor set to known spreaders.
    """
    n = g.node_count
    if len(ts) != n or len(a.labels) != n:
        raise InconsistentInputError(
            f"graph has {n} nodes, trust scores {len(ts)}, assignment {len(a.labels)}")
    if len(roles) != a.community_count:
        raise InconsistentInputError(
            f"{len(roles)} role sets for {a.community_count} communities")

    infected_arr = np.fromiter(sorted(infected), dtype=np.int64) if infected is not None else None
    node_rankings: Dict[int, List[NodeVulnerability]] = {}
    communities: List[CommunityVulnerability] = []

    for rs in roles:
        scored: List[NodeVulnerability] = []
        for b in rs.boundary.tolist():
            if a.labels[b] != rs.community:
                raise InconsistentInputError(f"boundary node {b} is not in community {rs.community}")
            nbrs = rs.boundary_neighbors[b]
            if infected_arr is not None:
                nbrs = nbrs[np.isin(nbrs, infected_arr)]
            scored.append(NodeVulnerability(node=b, community=rs.community,
                                            score=node_vulnerability(ts, b, nbrs.tolist())))
        # scored is in ascending NodeId order here
        v_tilde = community_vulnerability([x.score for x in scored])
        node_rankings[rs.community] = _rank_nodes(scored)
        communities.append(CommunityVulnerability(community=rs.community, score=v_tilde,
                                                  boundary_count=len(scored)))

    communities.sort(key=lambda x: (-x.score, x.community))
    merged: Dict[str, object] = {"infected_only": infected is not None}
    merged.update(params or {})
    logger.info("Assessed %d communities; %d with a boundary",
                len(communities), sum(1 for c in communities if c.boundary_count))
    return VulnerabilityReport(node_rankings=node_rankings, community_ranking=communities, params=merged)


# ── Serialization ─────────────────────────────────────────────────────────────

def node_table(g: DirectedGraph, report: VulnerabilityReport) -> pd.DataFrame:
    """community,node,V in community order, ranked within each community."""
    rows = [
        {"community": c, "node": g.ids[x.node], "V": x.score}
        for c in sorted(report.node_rankings)
        for x in report.node_rankings[c]
    ]
    return pd.DataFrame(rows, columns=["community", "node", "V"])


def community_table(report: VulnerabilityReport) -> pd.DataFrame:
    rows = [
        {"community": cv.community, "V_tilde": cv.score}
        for cv in report.community_ranking
    ]
    return pd.DataFrame(rows, columns=["community", "V_tilde"])


def report_to_json(g: DirectedGraph, report: VulnerabilityReport) -> Dict[str, object]:
    """Nested per-community document in community-ranking order."""
    return {
        "params": report.params,
        "communities": [
            {
                "community": cv.community,
                "V_tilde": cv.score,
                "boundary_count": cv.boundary_count,
                "spreader_boundary_count": cv.spreader_boundary_count,
                "boundary_nodes": [
                    {"node": g.ids[x.node], "V": x.score}
                    for x in report.node_rankings[cv.community]
                ],
            }
            for cv in report.community_ranking
        ],
    }


def spreader_table(g: DirectedGraph, ts: TrustScores, a: CommunityAssignment, roles: List[RoleSet],
                   spreaders: Set[int]) -> pd.DataFrame:
    """
    node,community,role,ti,tw,V for each spreader in NodeId order. V is taken
    over the spreader's full follow set, so core spreaders get a score too.
    """
    if len(ts) != g.node_count or len(a.labels) != g.node_count:
        raise InconsistentInputError(
            f"graph has {g.node_count} nodes, trust scores {len(ts)}, assignment {len(a.labels)}")
    nodes = np.fromiter(sorted(spreaders), dtype=np.int64)
    boundary = np.zeros(g.node_count, dtype=bool)
    for rs in roles:
        boundary[rs.boundary] = True
    v = all_node_vulnerability(g, ts)
    ids = np.asarray(g.ids, dtype=object)
    return pd.DataFrame({
        "node": ids[nodes],
        "community": a.labels[nodes],
        "role": np.where(boundary[nodes], "boundary", "core"),
        "ti": ts.ti[nodes],
        "tw": ts.tw[nodes],
        "V": v[nodes],
    }, columns=["node", "community", "role", "ti", "tw", "V"])
