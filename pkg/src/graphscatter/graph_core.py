"""Weighted undirected graphs, shift operators, spectra and the GFT.

All matrices are dense ``numpy`` arrays; the intended scale is a few hundred
nodes at most.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from pathlib import Path

import networkx as nx
import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    AsymmetricInput,
    ConnectivityRetryExhausted,
    ConvergenceFailure,
    DimensionMismatch,
    IsolatedNode,
    InvalidPermutation,
)

MAX_CONNECT_ATTEMPTS = 100


def derive_seed(*coords) -> int:
    """Stable 63-bit seed from integer coordinates (master seed first)."""
    state = np.random.SeedSequence([int(c) for c in coords]).generate_state(2, dtype=np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1]))


class Graph:
    """Weighted undirected graph backed by a dense symmetric weight matrix."""

    def __init__(self, weights, node_labels=None, allow_self_loops=False):
        W = np.array(weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise DimensionMismatch(f"weight matrix must be square, got shape {W.shape}")
        if not np.array_equal(W, W.T):
            raise AsymmetricInput("weight matrix is not symmetric")
        if np.any(W < 0) or not np.all(np.isfinite(W)):
            raise ValueError("weights must be finite and nonnegative")
        if not allow_self_loops and np.any(np.diag(W) != 0):
            raise ValueError("self-loops present but allow_self_loops is False")
        if node_labels is not None:
            node_labels = [str(s) for s in node_labels]
            if len(node_labels) != W.shape[0]:
                raise DimensionMismatch("node_labels length differs from node count")
        W.setflags(write=False)
        self.weights = W
        self.node_labels = node_labels
        self.allow_self_loops = allow_self_loops

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    @property
    def degrees(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def n_edges(self) -> int:
        return int(np.count_nonzero(np.triu(self.weights, k=1)))

    def is_connected(self) -> bool:
        if self.n == 0:
            return False
        n_comp, _ = connected_components(self.weights != 0, directed=False)
        return n_comp == 1

    def __eq__(self, other):
        if not isinstance(other, Graph):
            return NotImplemented
        return np.array_equal(self.weights, other.weights) and self.node_labels == other.node_labels

    def __repr__(self):
        return f"Graph(n={self.n}, edges={self.n_edges()})"


class ShiftVariant(enum.Enum):
    ADJACENCY = "adjacency"
    LAPLACIAN = "laplacian"
    NORMALIZED_LAPLACIAN = "normalized_laplacian"
    LAZY_DIFFUSION = "lazy_diffusion"


@dataclass(frozen=True)
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


class ShiftOperator:
    """A graph shift operator with a lazily computed, cached spectrum.

    The spectrum is computed at most once even under concurrent first access.
    """

    def __init__(self, variant: ShiftVariant, matrix, graph: Graph | None = None):
        S = np.array(matrix, dtype=float)
        if S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionMismatch(f"shift matrix must be square, got shape {S.shape}")
        if np.max(np.abs(S - S.T), initial=0.0) > 1e-12:
            raise AsymmetricInput("shift matrix is not symmetric")
        S.setflags(write=False)
        self.variant = variant
        self.matrix = S
        self.graph = graph
        self._spectrum = None
        self._lock = threading.Lock()

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def spectrum(self) -> Spectrum:
        if self._spectrum is None:
            with self._lock:
                if self._spectrum is None:
                    self._spectrum = _eigh(self.matrix)
        return self._spectrum

    @property
    def has_spectrum(self) -> bool:
        return self._spectrum is not None

    def __repr__(self):
        return f"ShiftOperator({self.variant.value}, n={self.n})"


def build_shift(graph: Graph, variant: ShiftVariant) -> ShiftOperator:
    W = graph.weights
    d = W.sum(axis=1)
    if variant is ShiftVariant.ADJACENCY:
        S = W.copy()
    elif variant is ShiftVariant.LAPLACIAN:
        S = np.diag(d) - W
    else:
        isolated = np.flatnonzero(d <= 0)
        if isolated.size:
            raise IsolatedNode(f"nodes with zero degree: {isolated[:10].tolist()}")
        dis = 1.0 / np.sqrt(d)
        A = dis[:, None] * W * dis[None, :]
        if variant is ShiftVariant.NORMALIZED_LAPLACIAN:
            S = np.eye(graph.n) - A
        else:
            S = 0.5 * (np.eye(graph.n) + A)
    # exact symmetry: the elementwise products above can differ in the last bit
    S = 0.5 * (S + S.T)
    return ShiftOperator(variant, S, graph=graph)


def _eigh(S: np.ndarray) -> Spectrum:
    try:
        lam, V = np.linalg.eigh(S)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(str(exc)) from exc
    # sign convention: largest-magnitude entry of every eigenvector is positive
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.sign(V[idx, np.arange(V.shape[1])])
    signs[signs == 0] = 1.0
    V = V * signs
    lam.setflags(write=False)
    V.setflags(write=False)
    return Spectrum(lam, V)


def eigendecompose(shift: ShiftOperator) -> Spectrum:
    return shift.spectrum


def gft(spectrum: Spectrum, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != spectrum.n:
        raise DimensionMismatch(f"signal length {x.shape[-1]} != {spectrum.n}")
    return x @ spectrum.eigenvectors


def igft(spectrum: Spectrum, x_hat) -> np.ndarray:
    x_hat = np.asarray(x_hat, dtype=float)
    if x_hat.shape[-1] != spectrum.n:
        raise DimensionMismatch(f"signal length {x_hat.shape[-1]} != {spectrum.n}")
    return x_hat @ spectrum.eigenvectors.T


def _check_perm(perm, n) -> np.ndarray:
    p = np.asarray(perm)
    if p.shape != (n,) or not np.issubdtype(p.dtype, np.integer):
        raise InvalidPermutation(f"permutation must be {n} integers")
    if not np.array_equal(np.sort(p), np.arange(n)):
        raise InvalidPermutation("permutation has repeated or out-of-range indices")
    return p


def inverse_permutation(perm) -> np.ndarray:
    p = np.asarray(perm)
    return np.argsort(p)


def apply_permutation(obj, perm):
    """Relabel nodes so that new node ``i`` is old node ``perm[i]``.

    For matrices this is ``P^T S P`` with ``P[perm[i], i] = 1``; for signals it
    is ``P^T x``. Works on :class:`Graph`, :class:`ShiftOperator` and arrays.
    """
    if isinstance(obj, Graph):
        p = _check_perm(perm, obj.n)
        labels = None if obj.node_labels is None else [obj.node_labels[i] for i in p]
        return Graph(obj.weights[np.ix_(p, p)], labels, obj.allow_self_loops)
    if isinstance(obj, ShiftOperator):
        p = _check_perm(perm, obj.n)
        graph = None if obj.graph is None else apply_permutation(obj.graph, p)
        return ShiftOperator(obj.variant, obj.matrix[np.ix_(p, p)], graph=graph)
    arr = np.asarray(obj)
    p = _check_perm(perm, arr.shape[0])
    if arr.ndim == 1:
        return arr[p]
    return arr[np.ix_(p, p)]


def _graph_from_nx(G: nx.Graph, n: int) -> Graph:
    W = nx.to_numpy_array(G, nodelist=range(n), weight=None, dtype=float)
    np.fill_diagonal(W, 0.0)
    return Graph(W)


def _ring_degree(n: int, p_edge: float) -> int:
    k = int(round(p_edge * (n - 1)))
    if k % 2:
        k = k + 1 if k + 1 <= n - 1 else k - 1
    return max(k, 0)


def generate_small_world(n: int, p_edge: float, q_rewire: float, seed: int) -> Graph:
    """Connected Watts-Strogatz graph.

    The ring lattice degree is ``p_edge * (n - 1)`` rounded to an even integer.
    Disconnected draws are regenerated with derived sub-seeds.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if not (0 <= p_edge <= 1 and 0 <= q_rewire <= 1):
        raise ValueError("probabilities must lie in [0, 1]")
    k = _ring_degree(n, p_edge)
    for attempt in range(MAX_CONNECT_ATTEMPTS):
        G = nx.watts_strogatz_graph(n, k, q_rewire, seed=derive_seed(seed, attempt) % 2**32)
        graph = _graph_from_nx(G, n)
        if graph.is_connected():
            return graph
    raise ConnectivityRetryExhausted(
        f"no connected small-world graph after {MAX_CONNECT_ATTEMPTS} attempts (n={n}, k={k})"
    )


def generate_two_community(n: int, p_in: float, p_out: float, seed: int):
    """Connected two-block stochastic block model.

    Returns ``(graph, labels)`` where nodes ``0..n/2-1`` are community 0.
    """
    if n % 2 or n < 2:
        raise ValueError("n must be a positive even number")
    if not p_in > p_out:
        raise ValueError("p_in must exceed p_out")
    half = n // 2
    probs = [[p_in, p_out], [p_out, p_in]]
    labels = np.repeat([0, 1], half)
    for attempt in range(MAX_CONNECT_ATTEMPTS):
        G = nx.stochastic_block_model([half, half], probs, seed=derive_seed(seed, attempt) % 2**32)
        graph = _graph_from_nx(G, n)
        if graph.is_connected():
            return graph, labels
    raise ConnectivityRetryExhausted(
        f"no connected two-community graph after {MAX_CONNECT_ATTEMPTS} attempts"
    )


def write_edgelist(graph: Graph, path) -> None:
    lines = [f"#nodes {graph.n}"]
    if graph.node_labels is not None:
        lines += [f"#label {i} {lab}" for i, lab in enumerate(graph.node_labels)]
    iu, ju = np.nonzero(np.triu(graph.weights))
    for i, j in zip(iu, ju):
        lines.append(f"{i} {j} {graph.weights[i, j]:.17g}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_edgelist(path) -> Graph:
    n = None
    labels = {}
    edges = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#nodes"):
            n = int(line.split()[1])
        elif line.startswith("#label"):
            _, idx, lab = line.split(maxsplit=2)
            labels[int(idx)] = lab
        elif line.startswith("#"):
            continue
        else:
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 'i j w'")
            edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if n is None:
        raise ValueError(f"{path}: missing '#nodes N' header")
    W = np.zeros((n, n))
    for i, j, w in edges:
        W[i, j] = W[j, i] = w
    node_labels = [labels[i] for i in range(n)] if labels else None
    return Graph(W, node_labels, allow_self_loops=bool(np.any(np.diag(W))))


def largest_component(graph: Graph) -> tuple[Graph, np.ndarray]:
    """Restrict to the largest connected component; returns ``(subgraph, kept_indices)``."""
    _, comp = connected_components(graph.weights != 0, directed=False)
    sizes = np.bincount(comp)
    keep = np.flatnonzero(comp == np.argmax(sizes))
    labels = None if graph.node_labels is None else [graph.node_labels[i] for i in keep]
    return Graph(graph.weights[np.ix_(keep, keep)], labels, graph.allow_self_loops), keep
