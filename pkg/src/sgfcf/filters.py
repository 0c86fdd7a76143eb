"""Graph-filter families over normalized singular values, homophilic
ratios, and the individualized filter exponent mapping.

A node's homophilic ratio is the fraction of pairs of its neighbors
that stay close in the graph once the node itself is removed; it proxies
how internally consistent the node's interactions are. Ratios are mapped
linearly onto a per-node monomial exponent range [beta1, beta2], so
nodes with coherent histories get sharper low-pass filters.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from typing import Union

import numpy as np
import scipy.sparse as sp

from .errors import ConfigError, OddDelta, SizeCapExceeded
from .graph import BipartiteGraph

# Exact distance computation with per-node removal is a verification-scale
# operation for delta >= 4; larger graphs fall back to sampled pairs.
HOMOPHILY_EXACT_CAP = 200


@dataclass(frozen=True)
class MonomialFilter:
    """g(s) = s^beta; the shared-filter form of the individualized filter."""

    beta: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError(f"monomial beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class ExponentialFilter:
    """Diffusion kernel e^{beta * s}, rescaled by e^{-beta} so g(1) = 1."""

    beta: float = 1.0

    def __post_init__(self):
        if self.beta < 0:
            raise ConfigError(f"exponential beta must be >= 0, got {self.beta}")


@dataclass(frozen=True)
class MarkovFilter:
    """Averaged diffusion (sum of s^l for l = 0..order) / (order + 1)."""

    order: int = 2

    def __post_init__(self):
        if self.order < 1:
            raise ConfigError(f"markov order must be >= 1, got {self.order}")


@dataclass(frozen=True)
class JacobiFilter:
    """Sum of Jacobi polynomials P_0..P_order evaluated by the three-term
    recurrence, clamped at zero from below (non-negative filter)."""

    a: float = 1.0
    b: float = 1.0
    order: int = 3

    def __post_init__(self):
        if self.a <= -1 or self.b <= -1:
            raise ConfigError(f"jacobi requires a > -1 and b > -1, got a={self.a}, b={self.b}")
        if self.order < 1:
            raise ConfigError(f"jacobi order must be >= 1, got {self.order}")


FilterFamily = Union[MonomialFilter, ExponentialFilter, MarkovFilter, JacobiFilter]


def power_clamped(sigma: np.ndarray, beta) -> np.ndarray:
    """sigma^beta with 0^0 = 1 and 0^beta = 0 for beta > 0.

    Values are clamped away from zero before powering so exponent
    broadcasting never hits 0^0 ambiguity inside exp/log paths.
    """
    sigma = np.maximum(np.asarray(sigma, dtype=np.float64), 1e-300)
    return np.power(sigma, beta)


def eval_filter(family: FilterFamily, sigma_normalized: np.ndarray) -> np.ndarray:
    """Evaluate a filter family on normalized singular values in [0, 1]."""
    s = np.asarray(sigma_normalized, dtype=np.float64)
    if isinstance(family, MonomialFilter):
        return power_clamped(s, family.beta)
    if isinstance(family, ExponentialFilter):
        return np.exp(family.beta * (s - 1.0))
    if isinstance(family, MarkovFilter):
        acc = np.ones_like(s)
        term = np.ones_like(s)
        for _ in range(family.order):
            term = term * s
            acc += term
        return acc / (family.order + 1)
    if isinstance(family, JacobiFilter):
        return _jacobi_sum(s, family.a, family.b, family.order)
    raise ConfigError(f"unknown filter family: {family!r}")


def _jacobi_sum(x: np.ndarray, a: float, b: float, order: int) -> np.ndarray:
    p_prev = np.ones_like(x)  # P_0
    total = p_prev.copy()
    p_curr = (a - b) / 2.0 + (a + b + 2.0) / 2.0 * x  # P_1
    total += p_curr
    for k in range(2, order + 1):
        c0 = 2.0 * k * (k + a + b) * (2.0 * k + a + b - 2.0)
        theta = (2.0 * k + a + b) * (2.0 * k + a + b - 1.0) / (2.0 * k * (k + a + b))
        theta_p = (
            (2.0 * k + a + b - 1.0) * (a * a - b * b)
            / (2.0 * k * (k + a + b) * (2.0 * k + a + b - 2.0))
        )
        theta_pp = (
            (k + a - 1.0) * (k + b - 1.0) * (2.0 * k + a + b)
            / (k * (k + a + b) * (2.0 * k + a + b - 2.0))
        )
        if c0 == 0.0:
            raise ConfigError(f"jacobi recurrence degenerate at k={k} for a={a}, b={b}")
        p_next = theta * x * p_curr + theta_p * p_curr - theta_pp * p_prev
        total += p_next
        p_prev, p_curr = p_curr, p_next
    return np.maximum(total, 0.0)


@dataclass(frozen=True)
class HomophilyScores:
    """Per-node homophilic ratios in (0, 1]."""

    user_scores: np.ndarray
    item_scores: np.ndarray
    delta: int
    mode: str = "inclusive"


@dataclass(frozen=True)
class IgfConfig:
    """Anchor exponent beta and the individualized range [beta1, beta2]."""

    beta: float = 1.0
    beta1: float = 1.0
    beta2: float = 1.0

    def __post_init__(self):
        if not self.beta1 <= self.beta <= self.beta2:
            raise ConfigError(
                f"require beta1 <= beta <= beta2, got {self.beta1}, {self.beta}, {self.beta2}"
            )


@dataclass(frozen=True)
class IgfProfile:
    user_beta: np.ndarray
    item_beta: np.ndarray


def _validate_delta(delta: int, mode: str) -> None:
    if delta < 2 or delta % 2 != 0:
        raise OddDelta(f"delta must be an even integer >= 2, got {delta}")
    if mode not in ("inclusive", "strict"):
        raise ConfigError(f"mode must be 'inclusive' or 'strict', got {mode!r}")


def _cooccurrence_counts(R: sp.csr_matrix, chunk: int = 2048) -> np.ndarray:
    """Pairs (i, j) of each row's support with distance <= 2 after removing
    that row's node.

    Two distinct neighbors i, j of u remain at distance 2 without u iff
    they co-occur under at least one other node, i.e. their co-occurrence
    count is >= 2 (u itself always contributes one). Diagonal pairs count
    unconditionally. Counting is vectorized through the thresholded
    co-occurrence Gram matrix.
    """
    R = R.tocsr()
    gram = (R.T @ R).tocsr()
    gram.setdiag(0)
    gram.eliminate_zeros()
    reachable = gram.copy()
    reachable.data = (reachable.data >= 2).astype(np.float64)
    reachable.eliminate_zeros()
    n_rows = R.shape[0]
    degrees = np.diff(R.indptr)
    counts = degrees.astype(np.int64).copy()  # diagonal pairs
    for start in range(0, n_rows, chunk):
        block = R[start : start + chunk]
        pair_hits = (block @ reachable).multiply(block).sum(axis=1)
        counts[start : start + chunk] += np.asarray(pair_hits).ravel().astype(np.int64)
    return counts


def _adjacency_lists(graph: BipartiteGraph) -> list[np.ndarray]:
    """Unified adjacency over node ids [users, then items offset by |U|]."""
    n_users = graph.n_users
    adj: list[np.ndarray] = []
    for u in range(n_users):
        row = graph.row_major.indices[graph.row_major.indptr[u] : graph.row_major.indptr[u + 1]]
        adj.append(row + n_users)
    for i in range(graph.n_items):
        col = graph.col_major.indices[graph.col_major.indptr[i] : graph.col_major.indptr[i + 1]]
        adj.append(col)
    return adj


def _bfs_within(adj: list[np.ndarray], source: int, removed: int, max_depth: int) -> dict[int, int]:
    """Depth-capped BFS from source, never visiting the removed node."""
    dist = {source: 0}
    frontier = deque([source])
    while frontier:
        node = frontier.popleft()
        d = dist[node]
        if d >= max_depth:
            continue
        for nb in adj[node]:
            nb = int(nb)
            if nb == removed or nb in dist:
                continue
            dist[nb] = d + 1
            frontier.append(nb)
    return dist


def _bfs_counts(
    graph: BipartiteGraph, delta: int, side: str, adj: list[np.ndarray] | None = None
) -> np.ndarray:
    """Exact pair counts by BFS with node removal (delta >= 4 path)."""
    if adj is None:
        adj = _adjacency_lists(graph)
    n_users = graph.n_users
    if side == "user":
        matrix, offset, removed_offset = graph.row_major, n_users, 0
    else:
        matrix, offset, removed_offset = graph.col_major, 0, n_users
    n_nodes = matrix.shape[0]
    counts = np.zeros(n_nodes, dtype=np.int64)
    for node in range(n_nodes):
        neighbors = matrix.indices[matrix.indptr[node] : matrix.indptr[node + 1]]
        if len(neighbors) == 0:
            continue
        targets = set((neighbors + offset).tolist())
        removed = node + removed_offset
        total = 0
        for src in neighbors:
            dist = _bfs_within(adj, int(src) + offset, removed, delta)
            total += sum(1 for t in targets if t in dist)
        counts[node] = total
    return counts


def _sampled_scores(
    graph: BipartiteGraph, delta: int, side: str, pair_samples: int, seed: int
) -> np.ndarray:
    """Monte-Carlo homophily estimate for graphs beyond the exact cap."""
    adj = _adjacency_lists(graph)
    n_users = graph.n_users
    if side == "user":
        matrix, offset, removed_offset = graph.row_major, n_users, 0
    else:
        matrix, offset, removed_offset = graph.col_major, 0, n_users
    rng = np.random.default_rng(seed)
    n_nodes = matrix.shape[0]
    scores = np.ones(n_nodes, dtype=np.float64)
    for node in range(n_nodes):
        neighbors = matrix.indices[matrix.indptr[node] : matrix.indptr[node + 1]]
        d = len(neighbors)
        if d <= 1:
            continue
        removed = node + removed_offset
        sources = rng.choice(neighbors, size=min(pair_samples, d), replace=False)
        hits = tried = 0
        for src in sources:
            dist = _bfs_within(adj, int(src) + offset, removed, delta)
            for t in neighbors:
                tried += 1
                if int(t) + offset in dist:
                    hits += 1
        scores[node] = hits / tried if tried else 1.0
    return scores


def homophilic_pair_counts(
    graph: BipartiteGraph, delta: int = 2, mode: str = "inclusive"
) -> tuple[np.ndarray, np.ndarray]:
    """Exact numerator counts of the homophilic ratio for both sides.

    A neighbor pair (i, j) of node u counts when their graph distance
    with u removed is <= delta (inclusive) or < delta (strict); the
    diagonal pair i = j always counts. Distances between same-side nodes
    are even, so the strict indicator at delta equals the inclusive one
    at delta - 2.
    """
    _validate_delta(delta, mode)
    effective = delta - 2 if mode == "strict" else delta
    if effective == 0:
        return graph.user_degrees.astype(np.int64).copy(), graph.item_degrees.astype(np.int64).copy()
    if effective == 2:
        return (
            _cooccurrence_counts(graph.row_major),
            _cooccurrence_counts(graph.col_major),
        )
    n = graph.n_users + graph.n_items
    if n > HOMOPHILY_EXACT_CAP:
        raise SizeCapExceeded(
            f"exact homophily with delta >= 4 limited to {HOMOPHILY_EXACT_CAP} nodes, got {n}"
        )
    adj = _adjacency_lists(graph)
    return (
        _bfs_counts(graph, effective, "user", adj),
        _bfs_counts(graph, effective, "item", adj),
    )


def homophilic_ratio_all(
    graph: BipartiteGraph,
    delta: int = 2,
    mode: str = "inclusive",
    pair_samples: int = 64,
    seed: int = 0,
) -> HomophilyScores:
    """Homophilic ratios for every user and item.

    delta = 2 (either mode) runs the co-occurrence fast path at any
    scale. delta >= 4 is exact up to HOMOPHILY_EXACT_CAP nodes and
    switches to deterministic sampled-pair estimates beyond that.
    Degree-zero nodes score 1 by convention (nothing to compare).
    """
    _validate_delta(delta, mode)
    effective = delta - 2 if mode == "strict" else delta
    n = graph.n_users + graph.n_items
    if effective <= 2 or n <= HOMOPHILY_EXACT_CAP:
        user_counts, item_counts = homophilic_pair_counts(graph, delta, mode)
        user_scores = _counts_to_scores(user_counts, graph.user_degrees)
        item_scores = _counts_to_scores(item_counts, graph.item_degrees)
    else:
        user_scores = _sampled_scores(graph, effective, "user", pair_samples, seed)
        item_scores = _sampled_scores(graph, effective, "item", pair_samples, seed + 1)
    return HomophilyScores(
        user_scores=user_scores, item_scores=item_scores, delta=delta, mode=mode
    )


def _counts_to_scores(counts: np.ndarray, degrees: np.ndarray) -> np.ndarray:
    scores = np.ones(len(counts), dtype=np.float64)
    active = degrees > 0
    scores[active] = counts[active] / np.square(degrees[active].astype(np.float64))
    return scores


def map_homo_to_beta(
    scores: HomophilyScores, cfg: IgfConfig, scope: str = "per_side"
) -> IgfProfile:
    """Linear map of homophilic ratios onto [beta1, beta2].

    Each side uses its own min/max by default; pass scope='global' to
    share one range across users and items. A degenerate range (all
    scores equal) maps every node to the anchor beta.
    """
    if scope not in ("per_side", "global"):
        raise ConfigError(f"scope must be 'per_side' or 'global', got {scope!r}")
    if scope == "global":
        pooled = np.concatenate([scores.user_scores, scores.item_scores])
        lo, hi = float(pooled.min()), float(pooled.max())
        return IgfProfile(
            user_beta=_linear_map(scores.user_scores, lo, hi, cfg),
            item_beta=_linear_map(scores.item_scores, lo, hi, cfg),
        )
    return IgfProfile(
        user_beta=_linear_map(
            scores.user_scores, float(scores.user_scores.min()), float(scores.user_scores.max()), cfg
        ),
        item_beta=_linear_map(
            scores.item_scores, float(scores.item_scores.min()), float(scores.item_scores.max()), cfg
        ),
    )


def _linear_map(values: np.ndarray, lo: float, hi: float, cfg: IgfConfig) -> np.ndarray:
    if hi <= lo:
        return np.full(len(values), cfg.beta, dtype=np.float64)
    return cfg.beta1 + (values - lo) * (cfg.beta2 - cfg.beta1) / (hi - lo)


def write_homophily_csv(scores: HomophilyScores, profile: IgfProfile, path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_type", "node_id", "score", "beta"])
        for node_id, (score, beta) in enumerate(zip(scores.user_scores, profile.user_beta)):
            writer.writerow(["user", node_id, repr(float(score)), repr(float(beta))])
        for node_id, (score, beta) in enumerate(zip(scores.item_scores, profile.item_beta)):
            writer.writerow(["item", node_id, repr(float(score)), repr(float(beta))])
