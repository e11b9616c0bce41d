"""Undirected interconnection graphs and their Laplacian spectra.

The network-level synthesis decouples along the eigenvalues of the graph
Laplacian, so every topology is stored together with its full symmetric
eigendecomposition. Eigenvalues are sorted ascending and values within
``ZERO_EIGENVALUE_TOL`` of zero are snapped to exactly zero, so downstream
per-mode formulas can recognise the uncoupled (lambda = 0) case exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: |eigenvalue| below this is snapped to exactly 0.
ZERO_EIGENVALUE_TOL = 1e-10

#: |eigenvalue| below this counts as a zero eigenvalue (component counting).
COMPONENT_TOL = 1e-8


@dataclass(frozen=True)
class GraphTopology:
    """Immutable undirected graph over agents 1..N with spectral data.

    Attributes:
        n_agents: number of vertices N.
        edges: canonical (i, j) vertex pairs, 1-based, i < j.
        adjacency: N x N symmetric 0/1 matrix with zero diagonal.
        degrees: per-vertex edge counts.
        laplacian: degree matrix minus adjacency matrix.
        eigvals: Laplacian eigenvalues, ascending, eigvals[0] == 0.
        eigvecs: orthogonal matrix whose columns are the eigenvectors.
    """

    n_agents: int
    edges: tuple[tuple[int, int], ...]
    adjacency: np.ndarray
    degrees: np.ndarray
    laplacian: np.ndarray
    eigvals: np.ndarray
    eigvecs: np.ndarray

    @property
    def num_components(self) -> int:
        """Connected components, counted as zero Laplacian eigenvalues."""
        return int(np.sum(np.abs(self.eigvals) < COMPONENT_TOL))

    @property
    def is_connected(self) -> bool:
        return self.num_components == 1

    @property
    def max_degree(self) -> int:
        return int(self.degrees.max())


def build_graph(n_agents: int, edges) -> GraphTopology:
    """Build an undirected graph from 1-based vertex pairs.

    Duplicate and reversed pairs collapse to a single edge. Vertices must
    lie in 1..n_agents and self-loops are rejected.

    Args:
        n_agents: number of vertices (>= 1).
        edges: iterable of (i, j) pairs.

    Returns:
        GraphTopology with adjacency, Laplacian and its eigendecomposition.
    """
    if n_agents < 1:
        raise ValueError(f"graph needs at least one vertex, got {n_agents}")
    canonical = set()
    for pair in edges:
        i, j = int(pair[0]), int(pair[1])
        if not (1 <= i <= n_agents and 1 <= j <= n_agents):
            raise ValueError(
                f"edge ({i},{j}) out of range for {n_agents} vertices"
            )
        if i == j:
            raise ValueError(f"self-loop ({i},{j}) is not allowed")
        canonical.add((min(i, j), max(i, j)))

    adjacency = np.zeros((n_agents, n_agents))
    for i, j in canonical:
        adjacency[i - 1, j - 1] = 1.0
        adjacency[j - 1, i - 1] = 1.0
    degrees = adjacency.sum(axis=1)
    laplacian = np.diag(degrees) - adjacency

    eigvals, eigvecs = np.linalg.eigh(laplacian)
    eigvals = eigvals.copy()
    eigvals[np.abs(eigvals) < ZERO_EIGENVALUE_TOL] = 0.0

    return GraphTopology(
        n_agents=n_agents,
        edges=tuple(sorted(canonical)),
        adjacency=adjacency,
        degrees=degrees,
        laplacian=laplacian,
        eigvals=eigvals,
        eigvecs=eigvecs,
    )


def cyclic_graph(n_agents: int) -> GraphTopology:
    """Ring of nearest-neighbour links: 1-2-...-N-1. Requires N >= 3."""
    if n_agents < 3:
        raise ValueError(f"a cycle needs at least 3 vertices, got {n_agents}")
    edges = [(i, i + 1) for i in range(1, n_agents)] + [(n_agents, 1)]
    return build_graph(n_agents, edges)


def max_degree_bound(graph: GraphTopology) -> int:
    """Link-count bound d_max + 1 used by the top-down truncation test."""
    return graph.max_degree + 1
