"""
synth.py
========
Seeded synthetic networks and spreader plantings for desk-scale experiments.

Functions:
  generate_sbm(params)                          : stochastic block model + planted partition
  plant_spreaders(g, ts, strategy, seed, roles) : ground-truth spreader set
  write_spreaders(g, spreaders, path)           : one external node id per line
  load_spreaders(path, g)                       : read a spreader file back

All randomness comes from numpy's PCG64 ``default_rng(seed)`` so fixtures are
stable across runs and platforms.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from community import CommunityAssignment
from graph_core import DirectedGraph
from reports import write_bytes
from roles import RoleSet
from trust import TrustScores
from vulnerability import all_node_vulnerability

logger = logging.getLogger(__name__)

STRATEGIES = ("uniform", "trust", "boundary")


@dataclass(frozen=True)
class SbmParams:
    block_sizes: Tuple[int, ...]
    p_in: float
    p_out: float = 0.0
    seed: int = 0
    directed: bool = True

    def __post_init__(self):
        object.__setattr__(self, "block_sizes", tuple(int(b) for b in self.block_sizes))
        if any(b < 1 for b in self.block_sizes):
            raise ValueError(f"block sizes must be positive, got {self.block_sizes}")
        if not 0.0 <= self.p_out < self.p_in <= 1.0:
            raise ValueError(f"need 0 <= p_out < p_in <= 1, got p_in={self.p_in} p_out={self.p_out}")


@dataclass(frozen=True)
class PlantingStrategy:
    kind: str
    rate: float

    def __post_init__(self):
        if self.kind not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.kind!r}")
        if not 0.0 < self.rate <= 1.0:
            raise ValueError(f"rate must lie in (0, 1], got {self.rate}")


# ── Block model ───────────────────────────────────────────────────────────────

def _sample_block(rng: np.random.Generator, rows: int, cols: int, same_block: bool,
                  p: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Independent Bernoulli(p) over the ordered pairs of a rows x cols block
    (diagonal excluded when ``same_block``): binomial count, then distinct
    positions drawn without replacement.
    """
    width = cols - 1 if same_block else cols
    population = rows * width
    if population == 0 or p == 0.0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    count = int(rng.binomial(population, p))
    flat = np.sort(rng.choice(population, size=count, replace=False))
    r, c = np.divmod(flat, width)
    if same_block:
        c = c + (c >= r)
    return r.astype(np.int64), c.astype(np.int64)


def generate_sbm(params: SbmParams) -> Tuple[DirectedGraph, CommunityAssignment]:
    """
    Each ordered pair (u, v), u != v, gets an edge with probability p_in inside a
    block and p_out across blocks. With ``directed=False`` each unordered pair is
    drawn once and stored in both directions.
    """
    sizes = params.block_sizes
    n = sum(sizes)
    if n == 0:
        raise ValueError("SBM needs at least one node")
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    rng = np.random.default_rng(params.seed)

    src_parts: List[np.ndarray] = []
    dst_parts: List[np.ndarray] = []
    for i, ni in enumerate(sizes):
        for j, nj in enumerate(sizes):
            if not params.directed and j < i:
                continue
            p = params.p_in if i == j else params.p_out
            r, c = _sample_block(rng, ni, nj, i == j, p)
            if not params.directed and i == j:
                # Each unordered pair maps to exactly one ordered pair with r < c
                keep = r < c
                r, c = r[keep], c[keep]
            src_parts.append(r + offsets[i])
            dst_parts.append(c + offsets[j])

    src = np.concatenate(src_parts)
    dst = np.concatenate(dst_parts)
    if not params.directed:
        src, dst = np.concatenate([src, dst]), np.concatenate([dst, src])
    g = DirectedGraph.from_arrays(src, dst, np.ones(len(src)), [str(v) for v in range(n)])
    truth = CommunityAssignment(labels=np.repeat(np.arange(len(sizes), dtype=np.int64), sizes))
    logger.info("SBM: %d nodes in %d blocks, %d edges (seed %d)", n, len(sizes), g.edge_count, params.seed)
    return g, truth


# ── Spreader planting ─────────────────────────────────────────────────────────

def plant_spreaders(g: DirectedGraph, ts: TrustScores, strategy: PlantingStrategy, seed: int = 0,
                    roles: Optional[Sequence[RoleSet]] = None) -> Set[int]:
    """
    uniform  : each node flagged independently with probability ``rate``
    trust    : node v flagged with probability rate * n * V(v) / sum(V), V over
               its full follow set; same expected count as uniform unless clipped at 1
    boundary : boundary nodes only (needs ``roles``), each with probability ``rate``
    """
    n = g.node_count
    rng = np.random.default_rng(seed)
    draws = rng.random(n)

    if strategy.kind == "uniform":
        flagged = draws < strategy.rate
    elif strategy.kind == "trust":
        v = all_node_vulnerability(g, ts)
        total = v.sum()
        if total <= 0:
            logger.warning("All node vulnerabilities are 0; trust planting falls back to uniform")
            prob = np.full(n, strategy.rate)
        else:
            prob = strategy.rate * n * v / total
            clipped = int((prob > 1.0).sum())
            if clipped:
                logger.warning("Trust planting: %d node probabilit%s clipped at 1",
                               clipped, "y" if clipped == 1 else "ies")
            prob = np.minimum(prob, 1.0)
        flagged = draws < prob
    else:
        if roles is None:
            raise ValueError("boundary planting needs community roles")
        eligible = np.zeros(n, dtype=bool)
        for rs in roles:
            eligible[rs.boundary] = True
        flagged = eligible & (draws < strategy.rate)

    spreaders = set(np.flatnonzero(flagged).tolist())
    logger.info("Planted %d spreader(s) with %s strategy (rate %.4g, seed %d)",
                len(spreaders), strategy.kind, strategy.rate, seed)
    return spreaders


# ── Spreader files ────────────────────────────────────────────────────────────

def write_spreaders(g: DirectedGraph, spreaders: Set[int], path: Union[str, Path]) -> None:
    lines = [g.ids[v] for v in sorted(spreaders)]
    write_bytes("".join(f"{x}\n" for x in lines).encode("utf-8"), path)


def load_spreaders(path: Union[str, Path], g: DirectedGraph) -> Set[int]:
    """One node id per line; ``#`` comments and blank lines skipped. Unknown ids are dropped."""
    spreaders: Set[int] = set()
    unknown = 0
    for text in Path(path).read_text(encoding="utf-8").splitlines():
        text = text.strip()
        if not text or text.startswith("#"):
            continue
        if g.has_node(text):
            spreaders.add(g.node_id(text))
        else:
            unknown += 1
    if unknown:
        logger.warning("%s: %d spreader id(s) not in the graph were ignored", path, unknown)
    logger.info("Loaded %d spreader(s) from %s", len(spreaders), path)
    return spreaders
