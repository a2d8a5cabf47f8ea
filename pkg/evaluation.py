"""
evaluation.py
=============
Ranking evaluation against ground-truth spreaders.

Functions:
  precision_at_k(ranked, truth, k)             : spreaders among the first min(k, len) items
  average_precision(ranked, truth, k_max)      : standard truncated AP for one list
  ap_at_k(per_community, k)                    : mean P@k over eligible communities
  mean_average_precision(per_community, k_max, variant) : MAP, standard or literal
  kendall_tau(rel, ret)                        : tie-aware tau with P, Q, T, U counts
  ground_truth_community_ranking(roles, truth) : fraction of boundary nodes that spread
  evaluate(report, roles, truth, ks, map_k)    : full node- and community-level protocol
  summary_row(result, network)                 : one CSV row per network

A community is eligible for AP/MAP when at least one of its boundary nodes is
a spreader; the rest are counted as skipped.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Hashable, List, Optional, Sequence, Set, Tuple

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from roles import RoleSet
from vulnerability import VulnerabilityReport

logger = logging.getLogger(__name__)

DEFAULT_KS = (1, 5, 10, 15)
DEFAULT_MAP_K = 15
MAP_VARIANTS = ("standard", "literal")


class NoGroundTruthError(ValueError):
    """No community has a spreader among its boundary nodes."""


# ── Types ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class RankedList:
    """(item, score) pairs ordered by score desc, item asc."""
    entries: Tuple[Tuple[Hashable, float], ...]

    def __post_init__(self):
        items = [item for item, _ in self.entries]
        if len(set(items)) != len(items):
            raise ValueError("ranked list contains duplicate items")

    @classmethod
    def from_scores(cls, scores: Dict[Hashable, float]) -> "RankedList":
        return cls(tuple(sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))))

    @property
    def items(self) -> List[Hashable]:
        return [item for item, _ in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class TauResult:
    """Kendall's tau; ``value`` is None when the denominator is zero."""
    value: Optional[float]
    concordant: int
    discordant: int
    ties_rel: int
    ties_ret: int

    @property
    def defined(self) -> bool:
        return self.value is not None

    def to_dict(self) -> Dict[str, object]:
        return {
            "value": self.value if self.defined else "undefined",
            "P": self.concordant, "Q": self.discordant,
            "T": self.ties_rel, "U": self.ties_ret,
        }


@dataclass
class EvalReport:
    ap: Dict[int, float]
    map: float
    map_standard: float
    map_literal: float
    map_variant: str
    map_k: int
    tau: TauResult
    eligible_communities: int
    skipped_communities: int
    precision_table: pd.DataFrame = field(repr=False)

    def to_dict(self) -> Dict[str, object]:
        return {
            "ap": {str(k): v for k, v in self.ap.items()},
            "map": self.map,
            "map_variant": self.map_variant,
            "map_k": self.map_k,
            "map_standard": self.map_standard,
            "map_literal": self.map_literal,
            "tau": self.tau.to_dict(),
            "eligible_communities": self.eligible_communities,
            "skipped_communities": self.skipped_communities,
            "per_community": [
                {key: value for key, value in row.items() if not _is_missing(value)}
                for row in self.precision_table.to_dict(orient="records")
            ],
        }


def _is_missing(value: object) -> bool:
    return isinstance(value, float) and math.isnan(value)


PerCommunity = Sequence[Tuple[RankedList, Set[Hashable]]]


# ── Precision metrics ─────────────────────────────────────────────────────────

def precision_at_k(ranked: RankedList, truth: Set[Hashable], k: int) -> float:
    if k < 1:
        raise ValueError(f"k must be a positive integer, got {k}")
    if len(ranked) == 0:
        raise ValueError("precision of an empty ranking is undefined")
    cutoff = min(k, len(ranked))
    hits = sum(1 for item in ranked.items[:cutoff] if item in truth)
    return hits / cutoff


def average_precision(ranked: RankedList, truth: Set[Hashable], k_max: int) -> float:
    """sum_{i<=k_max} P@i * rel(i) / min(k_max, #spreaders in the list)."""
    relevant = sum(1 for item in ranked.items if item in truth)
    if relevant == 0:
        return 0.0
    hits = 0
    total = 0.0
    for i, item in enumerate(ranked.items[:k_max], start=1):
        if item in truth:
            hits += 1
            total += hits / i
    return total / min(k_max, relevant)


def _eligible(per_community: PerCommunity) -> List[Tuple[RankedList, Set[Hashable]]]:
    eligible = [(r, t) for r, t in per_community
                if len(r) and any(item in t for item in r.items)]
    if not eligible:
        raise NoGroundTruthError("no ground truth: no community has a spreader boundary node")
    return eligible


def ap_at_k(per_community: PerCommunity, k: int) -> float:
    eligible = _eligible(per_community)
    return float(np.mean([precision_at_k(r, t, k) for r, t in eligible]))


def mean_average_precision(per_community: PerCommunity, k_max: int = DEFAULT_MAP_K,
                           variant: str = "standard") -> float:
    """
    ``standard``: mean over eligible communities of truncated AP.
    ``literal``: mean of AP@k for k = 1..k_max.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be a positive integer, got {k_max}")
    if variant == "standard":
        eligible = _eligible(per_community)
        return float(np.mean([average_precision(r, t, k_max) for r, t in eligible]))
    if variant == "literal":
        return float(np.mean([ap_at_k(per_community, k) for k in range(1, k_max + 1)]))
    raise ValueError(f"map variant must be one of {MAP_VARIANTS}, got {variant!r}")


# ── Kendall's tau ─────────────────────────────────────────────────────────────

def kendall_tau(rel: Sequence[float], ret: Sequence[float]) -> TauResult:
    """
    tau = (P - Q) / sqrt((P + Q + T) (P + Q + U)) over all item pairs, with T
    the pairs tied only in ``rel`` and U those tied only in ``ret``; pairs tied
    in both count nowhere.
    """
    x = np.asarray(rel, dtype=np.float64)
    y = np.asarray(ret, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("rel and ret must be aligned 1-d sequences")
    if len(x) < 2:
        raise ValueError("kendall_tau needs at least two items")

    p = q = t = u = 0
    # Row by row keeps memory linear in the number of items
    for i in range(len(x) - 1):
        dx = np.sign(x[i] - x[i + 1:])
        dy = np.sign(y[i] - y[i + 1:])
        prod = dx * dy
        p += int(np.count_nonzero(prod > 0))
        q += int(np.count_nonzero(prod < 0))
        t += int(np.count_nonzero((dx == 0) & (dy != 0)))
        u += int(np.count_nonzero((dx != 0) & (dy == 0)))
    denominator = (p + q + t) * (p + q + u)
    value = (p - q) / math.sqrt(denominator) if denominator > 0 else None
    return TauResult(value=value, concordant=p, discordant=q, ties_rel=t, ties_ret=u)


# ── Ground truth ──────────────────────────────────────────────────────────────

def ground_truth_community_ranking(roles: List[RoleSet], truth: Set[int]) -> RankedList:
    """Score each community by the fraction of its boundary nodes that are spreaders."""
    truth_arr = np.fromiter(sorted(truth), dtype=np.int64)
    scores = {
        rs.community: float(np.isin(rs.boundary, truth_arr).mean()) if len(rs.boundary) else 0.0
        for rs in roles
    }
    return RankedList.from_scores(scores)


def _ordinal_ranks(ranked: RankedList, order: List[Hashable]) -> np.ndarray:
    """Dense ranks (1 = highest score, ties share a rank) aligned to ``order``."""
    scores = dict(ranked.entries)
    return rankdata([-scores[item] for item in order], method="dense")


# ── Full protocol ─────────────────────────────────────────────────────────────

def evaluate(report: VulnerabilityReport, roles: List[RoleSet], truth: Set[int],
             ks: Sequence[int] = DEFAULT_KS, map_k: int = DEFAULT_MAP_K,
             map_variant: str = "standard") -> EvalReport:
    """Node-level AP@k / MAP over V(b) rankings and community-level tau over V~(C)."""
    if not ks or list(ks) != sorted(set(ks)) or ks[0] < 1:
        raise ValueError(f"ks must be nonempty, ascending and positive, got {list(ks)}")
    if map_variant not in MAP_VARIANTS:
        raise ValueError(f"map variant must be one of {MAP_VARIANTS}, got {map_variant!r}")

    per_community: List[Tuple[RankedList, Set[int]]] = []
    rows = []
    for rs in roles:
        ranking = report.node_rankings.get(rs.community, [])
        ranked = RankedList(tuple((x.node, x.score) for x in ranking))
        spreaders = {b for b in rs.boundary.tolist() if b in truth}
        row: Dict[str, object] = {
            "community": rs.community,
            "boundary_nodes": len(rs.boundary),
            "spreader_boundary_nodes": len(spreaders),
            "eligible": bool(spreaders),
        }
        if spreaders:
            per_community.append((ranked, spreaders))
            for k in ks:
                row[f"P@{k}"] = precision_at_k(ranked, spreaders, k)
            row["AP"] = average_precision(ranked, spreaders, map_k)
        rows.append(row)

    for cv in report.community_ranking:
        cv.spreader_boundary_count = int(sum(1 for b in roles[cv.community].boundary.tolist() if b in truth))

    ap = {k: ap_at_k(per_community, k) for k in ks}
    map_standard = mean_average_precision(per_community, map_k, "standard")
    map_literal = mean_average_precision(per_community, map_k, "literal")

    order = [rs.community for rs in roles]
    rel = _ordinal_ranks(ground_truth_community_ranking(roles, truth), order)
    ret = _ordinal_ranks(RankedList.from_scores(report.community_scores()), order)
    tau = kendall_tau(rel, ret) if len(order) >= 2 else TauResult(None, 0, 0, 0, 0)
    if not tau.defined:
        logger.warning("Kendall's tau undefined for this network (P=%d Q=%d T=%d U=%d)",
                       tau.concordant, tau.discordant, tau.ties_rel, tau.ties_ret)

    eligible = len(per_community)
    logger.info("Evaluation: %d eligible / %d skipped communities, MAP=%.4f, tau=%s",
                eligible, len(roles) - eligible, map_standard if map_variant == "standard" else map_literal,
                f"{tau.value:.4f}" if tau.defined else "undefined")
    return EvalReport(
        ap=ap,
        map=map_standard if map_variant == "standard" else map_literal,
        map_standard=map_standard,
        map_literal=map_literal,
        map_variant=map_variant,
        map_k=map_k,
        tau=tau,
        eligible_communities=eligible,
        skipped_communities=len(roles) - eligible,
        precision_table=pd.DataFrame(rows),
    )


def summary_row(result: EvalReport, network: str) -> Dict[str, object]:
    """One row per network: AP@k columns, MAP, tau."""
    row: Dict[str, object] = {"network": network}
    row.update({f"AP@{k}": v for k, v in result.ap.items()})
    row["MAP"] = result.map
    row["tau"] = result.tau.value if result.tau.defined else "undefined"
    return row


def summarize_rows(rows: pd.DataFrame) -> pd.DataFrame:
    """Append a plain-mean row over networks; undefined tau values are left out of the mean."""
    numeric = rows.drop(columns=["network"]).apply(pd.to_numeric, errors="coerce")
    mean_row = numeric.mean(axis=0).to_dict()
    mean_row["network"] = "mean"
    return pd.concat([rows, pd.DataFrame([mean_row])], ignore_index=True)[rows.columns]
