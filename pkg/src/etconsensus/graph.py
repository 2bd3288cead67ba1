"""Weighted undirected graphs, Laplacians and their spectra."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import GraphError, NotSymmetric

TOL_ZERO = 1e-9


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph on nodes ``0..node_count-1`` with positive edge weights.

    Parameters
    ----------
    node_count : int
        Number of agents ``N``.
    edges : sequence of (i, j, w)
        Each unordered pair at most once, ``i != j``, ``w > 0``. The graph
        must be connected.
    """

    node_count: int
    edges: tuple = field(default=())

    def __post_init__(self):
        n = int(self.node_count)
        if n < 1:
            raise GraphError("node_count must be a positive integer")
        canon = []
        seen = set()
        for e in self.edges:
            if len(e) != 3:
                raise GraphError(f"edge {e!r} is not an (i, j, w) triple")
            i, j, w = int(e[0]), int(e[1]), float(e[2])
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) references a node outside 0..{n - 1}")
            if i == j:
                raise GraphError(f"self loop on node {i}")
            if not w > 0 or not np.isfinite(w):
                raise GraphError(f"edge ({i}, {j}) has non-positive weight {w}")
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"edge {key} listed twice")
            seen.add(key)
            canon.append((i, j, w))
        object.__setattr__(self, "node_count", n)
        object.__setattr__(self, "edges", tuple(canon))
        if not _is_connected(n, canon):
            raise GraphError("graph is not connected")

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.node_count, self.node_count))
        for i, j, w in self.edges:
            a[i, j] = a[j, i] = w
        return a

    @classmethod
    def from_laplacian(cls, L, tol=1e-12) -> "WeightedGraph":
        L = np.asarray(L, dtype=float)
        n = L.shape[0]
        edges = [(i, j, -L[i, j]) for i in range(n) for j in range(i + 1, n) if -L[i, j] > tol]
        return cls(n, tuple(edges))


def _is_connected(n, edges) -> bool:
    nbrs = [[] for _ in range(n)]
    for i, j, _ in edges:
        nbrs[i].append(j)
        nbrs[j].append(i)
    seen = {0}
    queue = deque([0])
    while queue:
        for j in nbrs[queue.popleft()]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == n


def laplacian(g: WeightedGraph) -> np.ndarray:
    """Return ``L = H - A`` (degree matrix minus adjacency)."""
    a = g.adjacency()
    return np.diag(a.sum(axis=1)) - a


def incidence_factorization(g: WeightedGraph):
    """Return ``(D, W)`` with ``D @ W @ D.T == laplacian(g)``.

    Column ``k`` of ``D`` has ``+1`` at the head (smaller index) and ``-1``
    at the tail (larger index) of edge ``k``; ``W`` is ``diag(w_k)``.
    """
    D = np.zeros((g.node_count, g.edge_count))
    for k, (i, j, _) in enumerate(g.edges):
        D[min(i, j), k] = 1.0
        D[max(i, j), k] = -1.0
    W = np.diag([w for _, _, w in g.edges])
    return D, W


@dataclass(frozen=True)
class LaplacianSpectrum:
    eigenvalues: np.ndarray
    modal_basis: np.ndarray

    @property
    def lambda2(self) -> float:
        return float(self.eigenvalues[1]) if len(self.eigenvalues) > 1 else 0.0

    @property
    def lambdaN(self) -> float:
        return float(self.eigenvalues[-1])

    @property
    def reduced_basis(self) -> np.ndarray:
        """``Y``: the modal basis without the consensus direction."""
        return self.modal_basis[:, 1:]

    @property
    def eigenratio(self) -> float:
        return self.lambdaN / self.lambda2


def spectrum(L, sym_tol=1e-10) -> LaplacianSpectrum:
    """Eigen-decompose a symmetric Laplacian.

    Eigenvalues are ascending. Each eigenvector is signed so its first
    non-negligible component is positive, which keeps traces reproducible.

    Raises
    ------
    NotSymmetric
        If ``max |L - L.T|`` exceeds `sym_tol`.
    """
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1]:
        raise NotSymmetric("Laplacian must be square")
    asym = np.max(np.abs(L - L.T)) if L.size else 0.0
    if asym > sym_tol:
        raise NotSymmetric(f"matrix asymmetry {asym:.3g} exceeds {sym_tol:g}")
    vals, vecs = np.linalg.eigh(0.5 * (L + L.T))
    for k in range(vecs.shape[1]):
        v = vecs[:, k]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] < 0:
            vecs[:, k] = -v
    vals = vals.copy()
    if abs(vals[0]) <= TOL_ZERO:
        vals[0] = 0.0
    return LaplacianSpectrum(vals, vecs)


def consensus_projector(n: int) -> np.ndarray:
    """``M = I - (1/N) 1 1^T``."""
    return np.eye(n) - np.full((n, n), 1.0 / n)


# Communication graph of the six-agent example (0-based node indices).
DEMO_GRAPH = WeightedGraph(
    6,
    (
        (0, 1, 1.0),
        (0, 2, 2.0),
        (0, 4, 0.5),
        (1, 5, 1.0),
        (2, 4, 1.0),
        (3, 4, 1.0),
        (4, 5, 1.0),
    ),
)

DEMO_LAPLACIAN = np.array(
    [
        [3.5, -1, -2, 0, -0.5, 0],
        [-1, 2, 0, 0, 0, -1],
        [-2, 0, 3, 0, -1, 0],
        [0, 0, 0, 1, -1, 0],
        [-0.5, 0, -1, -1, 3.5, -1],
        [0, -1, 0, 0, -1, 2],
    ],
    dtype=float,
)
