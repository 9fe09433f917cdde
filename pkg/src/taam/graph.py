"""Sparse undirected graphs, symmetric normalization and propagation.

Graphs are stored in CSR form (``row_offsets`` / ``col_indices``).  The
propagation operator ``S = D^-1/2 (A + I) D^-1/2`` keeps the same layout
with one weight per stored entry and is applied through ``scipy.sparse``,
whose CSR kernel reduces each row in a fixed order.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True)
class SparseGraph:
    """Undirected graph without self-loops; every edge stored both ways."""

    n_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray

    @property
    def n_edges(self) -> int:
        """Number of undirected edges."""
        return len(self.col_indices) // 2

    def neighbors(self, u: int) -> np.ndarray:
        return self.col_indices[self.row_offsets[u]:self.row_offsets[u + 1]]

    def degrees(self) -> np.ndarray:
        return np.diff(self.row_offsets)

    def edge_list(self) -> list[tuple[int, int]]:
        """Each undirected edge once, as ``(u, v)`` with ``u < v``, sorted."""
        rows = np.repeat(np.arange(self.n_nodes), self.degrees())
        keep = rows < self.col_indices
        return list(zip(rows[keep].tolist(), self.col_indices[keep].tolist()))

    def adjacency(self) -> sp.csr_matrix:
        data = np.ones(len(self.col_indices), dtype=np.float64)
        return sp.csr_matrix((data, self.col_indices, self.row_offsets),
                             shape=(self.n_nodes, self.n_nodes))


@dataclass(frozen=True)
class PropagationOperator:
    """Symmetrically normalized ``A + I`` in CSR form."""

    n_nodes: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    weights: np.ndarray
    _mat: sp.csr_matrix = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        if self._mat is None:
            mat = sp.csr_matrix((self.weights, self.col_indices, self.row_offsets),
                                shape=(self.n_nodes, self.n_nodes))
            object.__setattr__(self, "_mat", mat)

    def toarray(self) -> np.ndarray:
        return self._mat.toarray()

    @property
    def matrix(self) -> sp.csr_matrix:
        return self._mat


def build_graph(edges, n_nodes: int) -> SparseGraph:
    """Build a symmetric, deduplicated CSR graph from a list of node pairs.

    Self-loops in ``edges`` are dropped; they are added back only by
    :func:`normalize_adjacency`.
    """
    if n_nodes <= 0:
        raise ValueError("n_nodes must be positive")
    pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
    if pairs.size and (pairs.min() < 0 or pairs.max() >= n_nodes):
        bad = pairs[(pairs < 0).any(axis=1) | (pairs >= n_nodes).any(axis=1)][0]
        raise ValueError(f"edge endpoint out of range: {tuple(bad.tolist())} "
                         f"for n_nodes={n_nodes}")
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    both = np.concatenate([pairs, pairs[:, ::-1]], axis=0)
    if len(both):
        both = np.unique(both, axis=0)  # lexicographic (row, col) order
    counts = np.bincount(both[:, 0], minlength=n_nodes) if len(both) else np.zeros(n_nodes, np.int64)
    row_offsets = np.zeros(n_nodes + 1, dtype=np.int64)
    np.cumsum(counts, out=row_offsets[1:])
    col_indices = both[:, 1].copy() if len(both) else np.zeros(0, dtype=np.int64)
    return SparseGraph(n_nodes, row_offsets, col_indices)


def normalize_adjacency(g: SparseGraph) -> PropagationOperator:
    """Return ``D^-1/2 (A + I) D^-1/2`` where ``D`` is the degree of ``A + I``."""
    n = g.n_nodes
    deg = g.degrees() + 1
    inv_sqrt = 1.0 / np.sqrt(deg.astype(np.float64))

    # insert the diagonal entry into each row, keeping columns sorted
    rows = np.repeat(np.arange(n), g.degrees())
    all_rows = np.concatenate([rows, np.arange(n)])
    all_cols = np.concatenate([g.col_indices, np.arange(n)])
    order = np.lexsort((all_cols, all_rows))
    all_rows, all_cols = all_rows[order], all_cols[order]

    weights = inv_sqrt[all_rows] * inv_sqrt[all_cols]
    row_offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=row_offsets[1:])
    return PropagationOperator(n, row_offsets, all_cols.astype(np.int64), weights)


def _check_rows(S: PropagationOperator, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[0] != S.n_nodes:
        raise ValueError(f"feature matrix has shape {X.shape}, "
                         f"expected ({S.n_nodes}, *)")
    return X


def propagate(S: PropagationOperator, X: np.ndarray) -> np.ndarray:
    """One hop of smoothing, ``S @ X``.  ``X`` is not modified."""
    X = _check_rows(S, X)
    return np.asarray(S.matrix @ X)


def dirichlet_energy(S: PropagationOperator, Z: np.ndarray) -> float:
    """Graph Dirichlet energy ``Tr(Z^T (I - S) Z)``."""
    Z = _check_rows(S, Z)
    return float(np.sum(Z * Z) - np.sum(Z * propagate(S, Z)))
