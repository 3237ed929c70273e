"""User-compatibility graph.

Vertices are users; an edge joins two users whose normalized channel
correlation |a_i^H a_j| / (||a_i|| ||a_j||) is strictly below the
admissibility threshold epsilon, so connected users are quasi-orthogonal and
cheap to serve together with zero-forcing. Each vertex is weighted by the
user's single-user minimum power, the cost of meeting its rate floor with no
interference at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import SystemConfig, User
from .errors import ZeroVector
from .power import single_user_min_power

# The exact budgeted-clique search is exponential; keep it a small-graph oracle.
MAX_EXACT_VERTICES = 20


@dataclass
class UserGraph:
    """Adjacency (symmetric, zero diagonal), vertex weights in watts, and the
    cached normalized correlations the adjacency was thresholded from."""

    adjacency: np.ndarray = field(repr=False)       # (K, K) bool
    weights: np.ndarray = field(repr=False)         # (K,) float
    correlations: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_vertices(self) -> int:
        return self.weights.shape[0]

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(self.adjacency)) // 2


def normalized_correlation(a_i: np.ndarray, a_j: np.ndarray) -> float:
    """|a_i^H a_j| / (||a_i|| ||a_j||), in [0, 1]. Raises ZeroVector."""
    ni = np.linalg.norm(a_i)
    nj = np.linalg.norm(a_j)
    if ni == 0.0 or nj == 0.0:
        raise ZeroVector("cannot correlate an all-zero channel vector")
    return float(np.abs(np.vdot(a_i, a_j)) / (ni * nj))


def correlation_matrix(channels: np.ndarray) -> np.ndarray:
    """All pairwise normalized correlations for channel columns (unit diagonal)."""
    norms = np.linalg.norm(channels, axis=0)
    if np.any(norms == 0.0):
        raise ZeroVector("cannot correlate an all-zero channel vector")
    corr = np.abs(channels.conj().T @ channels) / np.outer(norms, norms)
    np.fill_diagonal(corr, 1.0)
    return corr


def graph_from_arrays(channels: np.ndarray, min_rates: np.ndarray,
                      epsilon: float, noise_power: float,
                      correlations: np.ndarray | None = None) -> UserGraph:
    """Build the graph from raw channel columns and rate floors."""
    k = channels.shape[1]
    if k == 0:
        return UserGraph(adjacency=np.zeros((0, 0), dtype=bool),
                         weights=np.zeros(0), correlations=np.zeros((0, 0)))
    corr = correlation_matrix(channels) if correlations is None else correlations
    adjacency = corr < epsilon          # strict: equality means no edge
    np.fill_diagonal(adjacency, False)
    channel_powers = np.sum(np.abs(channels) ** 2, axis=0)
    weights = np.atleast_1d(single_user_min_power(min_rates, channel_powers, noise_power))
    return UserGraph(adjacency=adjacency, weights=weights, correlations=corr)


def build_graph(users: list[User], cfg: SystemConfig) -> UserGraph:
    """Graph over a user population with epsilon taken from the config."""
    channels = (np.column_stack([u.channel for u in users]) if users
                else np.zeros((cfg.num_antennas, 0), dtype=complex))
    min_rates = np.array([u.min_rate for u in users], dtype=float)
    return graph_from_arrays(channels, min_rates, cfg.epsilon, cfg.noise_power)


def neighbors(g: UserGraph, k: int) -> set[int]:
    """Vertices adjacent to vertex k."""
    return {int(i) for i in np.flatnonzero(g.adjacency[k])}


def is_clique(g: UserGraph, vertices) -> bool:
    """True iff all pairs in the set are adjacent; empty and singleton sets count."""
    idx = sorted(set(int(v) for v in vertices))
    if len(idx) <= 1:
        return True
    sub = g.adjacency[np.ix_(idx, idx)]
    off_diag = ~np.eye(len(idx), dtype=bool)
    return bool(np.all(sub[off_diag]))


def max_budget_clique(g: UserGraph, p_max: float) -> list[int]:
    """Exact search for the largest clique whose weights sum to at most p_max.

    Exhaustive branch-and-bound; refuses graphs above MAX_EXACT_VERTICES.
    Intended as a test oracle for the greedy schedulers, not for production
    graph sizes.
    """
    n = g.num_vertices
    if n > MAX_EXACT_VERTICES:
        raise ValueError(f"exact clique search is limited to {MAX_EXACT_VERTICES} vertices")
    adjacency = g.adjacency
    weights = g.weights
    best: list[int] = []

    def extend(clique: list[int], weight: float, candidates: list[int]):
        nonlocal best
        if len(clique) > len(best):
            best = list(clique)
        if len(clique) + len(candidates) <= len(best):
            return
        for pos, v in enumerate(candidates):
            if weight + weights[v] > p_max:
                continue
            clique.append(v)
            extend(clique, weight + float(weights[v]),
                   [u for u in candidates[pos + 1:] if adjacency[v, u]])
            clique.pop()

    extend([], 0.0, list(range(n)))
    return best
