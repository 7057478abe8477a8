"""Graph scattering transform.

A representation holds one coefficient per path ``(j_1, ..., j_l)``. Paths are
ordered layer by layer and lexicographically inside a layer, so coefficient 0
is always the aggregated input signal.
"""

from __future__ import annotations

import csv
import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatch, DimensionMismatch, PathCountOverflow
from .graph_core import Graph
from .wavelets import WaveletBank

MAX_PATHS = 10**6


def path_count(J: int, L: int) -> int:
    """``(J^L - 1) / (J - 1)``, or ``L`` when ``J == 1``."""
    if J == 1:
        return L
    return (J**L - 1) // (J - 1)


def enumerate_paths(J: int, L: int, cap: int = MAX_PATHS) -> list[tuple[int, ...]]:
    """All paths of length ``0..L-1`` over scales ``1..J``."""
    if J < 1 or L < 1:
        raise ValueError("J and L must be at least 1")
    if J ** (L - 1) > cap or path_count(J, L) > cap:
        raise PathCountOverflow(f"J={J}, L={L} gives more than {cap} paths")
    paths = []
    for layer in range(L):
        paths.extend(itertools.product(range(1, J + 1), repeat=layer))
    return paths


class AggregatorKind(enum.Enum):
    MEAN = "mean"
    DEGREE_WEIGHTED = "degree_weighted"


@dataclass(frozen=True)
class Aggregator:
    """Linear read-out ``U`` applied to every node of the scattering tree.

    ``B_U`` bounds ``||U||`` and ``eps_U`` bounds ``||U(S) - U(S_hat)||``;
    both enter the generalized stability bound.
    """

    kind: AggregatorKind
    weights: np.ndarray
    B_U: float
    eps_U: float = 0.0

    @classmethod
    def mean(cls, n: int) -> Aggregator:
        w = np.full(n, 1.0 / n)
        w.setflags(write=False)
        return cls(AggregatorKind.MEAN, w, 1.0, 0.0)

    @classmethod
    def degree_weighted(cls, graph: Graph) -> Aggregator:
        d = graph.degrees
        total = float(d.sum())
        if total <= 0:
            raise ValueError("degree-weighted aggregator needs at least one edge")
        w = d / total
        w.setflags(write=False)
        return cls(AggregatorKind.DEGREE_WEIGHTED, w, float(np.linalg.norm(w)), 0.0)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def with_perturbation(self, other: Aggregator) -> Aggregator:
        """Copy of ``self`` whose ``eps_U`` is its distance to ``other``."""
        eps = float(np.linalg.norm(self.weights - other.weights))
        return Aggregator(self.kind, self.weights, self.B_U, eps)

    def __call__(self, x: np.ndarray):
        return self.weights @ x


@dataclass(frozen=True)
class ScatteringRep:
    coefficients: np.ndarray
    paths: tuple
    J: int
    L: int
    family: str
    aggregator: str

    @property
    def config(self):
        return (self.J, self.L, self.family, self.aggregator)

    @property
    def path_index(self) -> dict:
        return {p: i for i, p in enumerate(self.paths)}

    def __len__(self):
        return len(self.coefficients)


def _scatter_matrix(bank: WaveletBank, weights: np.ndarray, X: np.ndarray, L: int) -> np.ndarray:
    """Coefficients for the columns of ``X`` (n x m); returns (n_paths, m)."""
    H = bank.filter_matrices
    layer = X[None, :, :]
    rows = [weights @ X]
    for _ in range(1, L):
        # children of node p are stored at p*J + (j-1): lexicographic order
        nxt = np.abs(H[None] @ layer[:, None])
        layer = nxt.reshape(-1, X.shape[0], X.shape[1])
        rows.append(np.einsum("a,pam->pm", weights, layer))
    return np.vstack([r.reshape(-1, X.shape[1]) for r in rows])


def scatter(bank: WaveletBank, aggregator: Aggregator, x, L: int = 3) -> ScatteringRep:
    """Scattering representation of a single signal."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != bank.n or aggregator.n != bank.n:
        raise DimensionMismatch(f"signal/aggregator size does not match graph size {bank.n}")
    paths = tuple(enumerate_paths(bank.J, L))
    coeffs = _scatter_matrix(bank, aggregator.weights, x[:, None], L)[:, 0]
    return ScatteringRep(coeffs, paths, bank.J, L, bank.family.value, aggregator.kind.value)


def scatter_batch(bank: WaveletBank, aggregator: Aggregator, X, L: int = 3) -> np.ndarray:
    """Representations of the rows of ``X`` as an ``(m, n_paths)`` array."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != bank.n or aggregator.n != bank.n:
        raise DimensionMismatch(f"signals must be (m, {bank.n})")
    enumerate_paths(bank.J, L)
    return _scatter_matrix(bank, aggregator.weights, X.T, L).T.copy()


def layer_signals(bank: WaveletBank, x, L: int = 3) -> dict:
    """Intermediate signals ``x_p`` for every path, keyed by path."""
    x = np.asarray(x, dtype=float)
    out = {(): x}
    frontier = [()]
    for _ in range(1, L):
        nxt = []
        for p in frontier:
            for j in range(1, bank.J + 1):
                q = p + (j,)
                out[q] = np.abs(bank.filter_matrices[j - 1] @ out[p])
                nxt.append(q)
        frontier = nxt
    return out


def energy(rep: ScatteringRep | np.ndarray) -> float:
    c = rep.coefficients if isinstance(rep, ScatteringRep) else np.asarray(rep, dtype=float)
    return float(np.dot(c, c))


def rep_distance(a: ScatteringRep, b: ScatteringRep) -> tuple[float, float]:
    """``(absolute, relative)`` l2 distance; relative is 0 when both are 0."""
    if a.config != b.config:
        raise ConfigMismatch(f"{a.config} vs {b.config}")
    diff = float(np.linalg.norm(a.coefficients - b.coefficients))
    ref = float(np.linalg.norm(a.coefficients))
    if ref == 0.0:
        return diff, 0.0 if diff == 0.0 else float("inf")
    return diff, diff / ref


def format_path(path: tuple) -> str:
    return "-".join(str(j) for j in path) if path else "0"


def write_rep(rep: ScatteringRep, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "coefficient"])
        for p, c in zip(rep.paths, rep.coefficients):
            w.writerow([format_path(p), repr(float(c))])
