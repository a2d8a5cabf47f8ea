"""
trust.py
========
Trustingness / trustworthiness scores over a follower graph, plus believability.

Functions:
  compute_tsm(g, params, threads)   : Jacobi iteration of the trust equations
  normalize_scores(raw, params)     : log min-max rescale into [log_floor, 1]
  believability(ts, u, v, g=None)   : tw(v) * ti(u) for follower edge u -> v
  trust_table(g, ts)                : DataFrame node_id,ti,tw for the score dump
  load_trust_table(path, g)         : read a dump back into TrustScores

One sweep computes, for every node v and u,

    ti(v) = sum_{x in out(v)} w(v, x) / (1 + tw(x)^s)
    tw(u) = sum_{x in in(u)}  w(x, u) / (1 + ti(x)^s)

reading only the previous sweep's vectors, then divides each vector by its
network-wide sum. Sweeps are row-chunked matrix-vector products; each row's
sum is produced by exactly one chunk so results do not depend on the thread
count.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp

from graph_core import DirectedGraph, EmptyGraphError

logger = logging.getLogger(__name__)

# ── Configuration Constants ───────────────────────────────────────────────────

DEFAULT_INVOLVEMENT = 1.0       # exponent s
DEFAULT_MAX_ITERATIONS = 100
DEFAULT_EPSILON = 1e-6
DEFAULT_LOG_FLOOR = 1e-6
ROW_CHUNK = 65536               # fixed, so chunk boundaries never depend on threads


# ── Types ─────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TsmParams:
    involvement: float = DEFAULT_INVOLVEMENT
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    convergence_epsilon: float = DEFAULT_EPSILON
    log_floor: float = DEFAULT_LOG_FLOOR

    def __post_init__(self):
        if not (self.involvement >= 0 and math.isfinite(self.involvement)):
            raise ValueError(f"involvement must be >= 0, got {self.involvement}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if not self.convergence_epsilon > 0:
            raise ValueError(f"convergence_epsilon must be > 0, got {self.convergence_epsilon}")
        if not 0 < self.log_floor < 1:
            raise ValueError(f"log_floor must lie in (0, 1), got {self.log_floor}")


@dataclass(frozen=True, eq=False)
class RawTrustScores:
    ti: np.ndarray
    tw: np.ndarray
    iterations_run: int
    converged: bool


@dataclass(frozen=True, eq=False)
class TrustScores:
    """Normalized scores, every entry in (0, 1]."""
    ti: np.ndarray
    tw: np.ndarray

    def __len__(self) -> int:
        return len(self.ti)


# ── TSM iteration ─────────────────────────────────────────────────────────────

def _chunked_matvec(adj: sp.csr_matrix, vec: np.ndarray, pool: Optional[ThreadPoolExecutor]) -> np.ndarray:
    n = adj.shape[0]
    if pool is None or n <= ROW_CHUNK:
        return adj @ vec
    bounds = [(lo, min(lo + ROW_CHUNK, n)) for lo in range(0, n, ROW_CHUNK)]
    parts: List[np.ndarray] = list(pool.map(lambda b: adj[b[0]:b[1]] @ vec, bounds))
    return np.concatenate(parts)


def _normalize_sum(vec: np.ndarray) -> np.ndarray:
    total = vec.sum()
    return vec / total if total > 0 else vec


def compute_tsm(g: DirectedGraph, params: TsmParams = TsmParams(), threads: int = 1) -> RawTrustScores:
    """
    Run the trust iteration until max_i |d ti| + |d tw| < epsilon or
    max_iterations sweeps. Scores start uniform at 1/n.
    """
    n = g.node_count
    if n == 0:
        raise EmptyGraphError("no nodes")

    s = params.involvement
    ti = np.full(n, 1.0 / n)
    tw = np.full(n, 1.0 / n)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    converged = False
    iteration = 0
    try:
        for iteration in range(1, params.max_iterations + 1):
            ti_new = _normalize_sum(_chunked_matvec(g.out_adj, 1.0 / (1.0 + np.power(tw, s)), pool))
            tw_new = _normalize_sum(_chunked_matvec(g.in_adj, 1.0 / (1.0 + np.power(ti, s)), pool))
            delta = float(np.max(np.abs(ti_new - ti) + np.abs(tw_new - tw)))
            ti, tw = ti_new, tw_new
            logger.debug("TSM sweep %d: max delta %.3e", iteration, delta)
            # An all-zero sweep (no edges) is already the fixed point
            if delta < params.convergence_epsilon or (not ti.any() and not tw.any()):
                converged = True
                break
    finally:
        if pool is not None:
            pool.shutdown()

    if converged:
        logger.info("TSM converged after %d sweep(s)", iteration)
    else:
        logger.warning("TSM stopped at max_iterations=%d without converging", params.max_iterations)
    return RawTrustScores(ti=ti, tw=tw, iterations_run=iteration, converged=converged)


# ── Normalization ─────────────────────────────────────────────────────────────

def _log_min_max(x: np.ndarray, log_floor: float) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return x.copy()
    positive = x[x > 0]
    if positive.size == 0:
        return np.ones_like(x)
    clamped = np.where(x > 0, x, log_floor * positive.min())
    lo, hi = clamped.min(), clamped.max()
    if hi == lo:
        return np.ones_like(x)
    log_lo = math.log(lo)
    y = (np.log(clamped) - log_lo) / (math.log(hi) - log_lo)
    out = log_floor + y * (1.0 - log_floor)
    # Pin the extremes so rounding can never leave the [log_floor, 1] range
    out[clamped == hi] = 1.0
    out[clamped == lo] = log_floor
    return out


def normalize_scores(raw: RawTrustScores, params: TsmParams = TsmParams()) -> TrustScores:
    """Log min-max rescaling of each vector into [log_floor, 1]; max maps to 1."""
    return TrustScores(ti=_log_min_max(raw.ti, params.log_floor),
                       tw=_log_min_max(raw.tw, params.log_floor))


# ── Believability ─────────────────────────────────────────────────────────────

def believability(ts: TrustScores, u: int, v: int, g: Optional[DirectedGraph] = None) -> float:
    """
    Believability of follower edge u -> v: tw(v) * ti(u).
    Pass ``g`` to have the edge's existence checked.
    """
    if g is not None and not g.has_edge(u, v):
        raise ValueError(f"no edge {g.ids[u]} -> {g.ids[v]}: believability needs u to follow v")
    return float(ts.tw[v] * ts.ti[u])


# ── Score dump ────────────────────────────────────────────────────────────────

def trust_table(g: DirectedGraph, ts: TrustScores) -> pd.DataFrame:
    return pd.DataFrame({"node_id": list(g.ids), "ti": ts.ti, "tw": ts.tw})


def load_trust_table(path: Union[str, Path], g: DirectedGraph) -> TrustScores:
    """Read a node_id,ti,tw dump; every graph node must appear exactly once."""
    frame = pd.read_csv(path, dtype={"node_id": str})
    if frame["node_id"].duplicated().any():
        raise ValueError(f"{path}: duplicate node ids in trust dump")
    frame = frame.set_index("node_id")
    missing = [x for x in g.ids if x not in frame.index]
    if missing:
        raise ValueError(f"{path}: trust dump missing {len(missing)} node(s), e.g. {missing[0]!r}")
    frame = frame.loc[list(g.ids)]
    ti = pd.to_numeric(frame["ti"], errors="coerce").to_numpy(dtype=np.float64)
    tw = pd.to_numeric(frame["tw"], errors="coerce").to_numpy(dtype=np.float64)
    for column, values in (("ti", ti), ("tw", tw)):
        # NaN fails both comparisons
        bad = np.flatnonzero(~((values > 0) & (values <= 1)))
        if bad.size:
            v = int(bad[0])
            raise ValueError(f"{path}: {column} of node {g.ids[v]!r} is {frame[column].iloc[v]!r}, "
                             f"expected a finite value in (0, 1] ({bad.size} bad entries)")
    return TrustScores(ti=ti, tw=tw)
