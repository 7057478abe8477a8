"""Relative and edge-drop perturbations, perturbation sizes and stability bounds."""

from __future__ import annotations

import enum
import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigMismatch, DimensionMismatch, InfeasibleEps, TooLargeForExact
from .graph_core import Graph, ShiftOperator, ShiftVariant, build_shift
from .wavelets import WaveletBank

log = logging.getLogger(__name__)

EXACT_PERM_MAX_N = 8
PINV_TOL = 1e-10


@dataclass(frozen=True)
class ErrorMatrix:
    E: np.ndarray
    eps: float
    structural: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.E, 2))


class PerturbationKind(enum.Enum):
    DILATION = "dilation"
    EDGE_DROP = "edge_drop"


@dataclass(frozen=True)
class PerturbationOutcome:
    kind: PerturbationKind
    perturbed_graph: Graph
    perturbed_shift: ShiftOperator | None = None
    error: ErrorMatrix | None = None
    drop_probability: float | None = None
    n_clamped: int = 0

    def shift(self, variant: ShiftVariant) -> ShiftOperator:
        if self.perturbed_shift is not None and self.perturbed_shift.variant is variant:
            return self.perturbed_shift
        return build_shift(self.perturbed_graph, variant)


def structural_constraint(E) -> float:
    """``||E / m_N - I||_2`` with ``m_N`` the largest-magnitude eigenvalue of E.

    Defined as 0 for ``E == 0``.
    """
    E = np.asarray(E, dtype=float)
    if not np.any(E):
        return 0.0
    if np.count_nonzero(E - np.diag(np.diagonal(E))) == 0:
        m = np.diagonal(E)
    else:
        m = np.linalg.eigvalsh(0.5 * (E + E.T))
    m_N = float(m[np.argmax(np.abs(m))])
    return float(np.linalg.norm(E / m_N - np.eye(E.shape[0]), 2))


def dilation_error(n: int, eps: float, seed: int) -> ErrorMatrix:
    """Diagonal error matrix with ``||E|| = eps/2`` and structural cost <= eps.

    Entries are drawn on ``[1 - eps, 1]``, the largest is pinned to 1 and the
    whole vector is scaled by ``eps / 2``.
    """
    if not eps > 0:
        raise InfeasibleEps("eps must be positive")
    if eps >= 2:
        raise InfeasibleEps("eps >= 2 breaks sign coherence of the diagonal")
    rng = np.random.default_rng(seed)
    d = rng.uniform(1.0 - eps, 1.0, size=n)
    d[int(np.argmax(d))] = 1.0
    e = d * (eps / 2.0)
    E = np.diag(e)
    return ErrorMatrix(E, float(eps), structural_constraint(E))


def perturb_adjacency(W, E) -> tuple[Graph, int]:
    """``W_hat = W + E^T W + W E`` clamped at 0; returns the graph and clamp count."""
    W = W.weights if isinstance(W, Graph) else np.asarray(W, dtype=float)
    E = E.E if isinstance(E, ErrorMatrix) else np.asarray(E, dtype=float)
    if W.shape != E.shape:
        raise DimensionMismatch(f"W {W.shape} vs E {E.shape}")
    if not np.any(E):
        return Graph(W.copy()), 0
    W_hat = W + E.T @ W + W @ E
    W_hat = 0.5 * (W_hat + W_hat.T)
    np.fill_diagonal(W_hat, 0.0)
    negative = W_hat < 0
    n_clamped = int(np.count_nonzero(np.triu(negative, 1)))
    W_hat[negative] = 0.0
    return Graph(W_hat), n_clamped


def dilate(graph: Graph, eps: float, seed: int, variant=ShiftVariant.NORMALIZED_LAPLACIAN):
    """Dilation perturbation of ``graph`` as a :class:`PerturbationOutcome`."""
    err = dilation_error(graph.n, eps, seed)
    g_hat, n_clamped = perturb_adjacency(graph, err)
    return PerturbationOutcome(
        PerturbationKind.DILATION, g_hat, build_shift(g_hat, variant), error=err, n_clamped=n_clamped
    )


def edge_drop(graph: Graph, p: float, seed: int) -> PerturbationOutcome:
    """Remove each edge independently with probability ``p``."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    W = graph.weights.copy()
    iu, ju = np.nonzero(np.triu(W, 1))
    drop = rng.random(iu.size) < p
    W[iu[drop], ju[drop]] = 0.0
    W[ju[drop], iu[drop]] = 0.0
    return PerturbationOutcome(PerturbationKind.EDGE_DROP, Graph(W), drop_probability=float(p))


def _least_norm_error(S: np.ndarray, delta: np.ndarray, spectrum) -> tuple[np.ndarray, float]:
    """Least-norm symmetric E with ``E S + S E = delta`` (E symmetric)."""
    lam, V = spectrum.eigenvalues, spectrum.eigenvectors
    D = V.T @ delta @ V
    denom = lam[:, None] + lam[None, :]
    safe = np.abs(denom) >= PINV_TOL
    Et = np.zeros_like(D)
    Et[safe] = D[safe] / denom[safe]
    E = V @ Et @ V.T
    residual = float(np.linalg.norm(E.T @ S + S @ E - delta))
    return E, residual


@dataclass(frozen=True)
class DistanceResult:
    distance: float
    residual: float
    upper_bound: bool
    permutation: np.ndarray


def relative_distance(S: ShiftOperator, S_hat: ShiftOperator, exact_perm: bool = False) -> DistanceResult:
    """Relative perturbation size ``min ||E||`` with ``E^T S + S E = P^T S_hat P - S``.

    With ``exact_perm`` the permutations closest to S are searched exhaustively
    (n <= 8) and the smallest ``||E||`` among them returned. Otherwise P = I and
    the result is an upper bound on the true distance (``upper_bound`` set).
    """
    A, A_hat = S.matrix, S_hat.matrix
    if A.shape != A_hat.shape:
        raise DimensionMismatch(f"{A.shape} vs {A_hat.shape}")
    n = A.shape[0]
    eig = S.spectrum
    if not exact_perm:
        E, res = _least_norm_error(A, A_hat - A, eig)
        return DistanceResult(float(np.linalg.norm(E, 2)), res, True, np.arange(n))
    if n > EXACT_PERM_MAX_N:
        raise TooLargeForExact(f"exact permutation search limited to n <= {EXACT_PERM_MAX_N}")
    candidates = []
    best_fit = math.inf
    for perm in itertools.permutations(range(n)):
        p = np.array(perm)
        delta = A_hat[np.ix_(p, p)] - A
        fit = float(np.linalg.norm(delta))
        if fit < best_fit - 1e-12:
            best_fit, candidates = fit, [(p, delta)]
        elif abs(fit - best_fit) <= 1e-12:
            candidates.append((p, delta))
    best = None
    for p, delta in candidates:
        E, res = _least_norm_error(A, delta, eig)
        d = float(np.linalg.norm(E, 2))
        if best is None or d < best.distance:
            best = DistanceResult(d, res, False, p)
    return best


# --- bounds ----------------------------------------------------------------


def xi(r: int, B: float, J: int, L: int) -> float:
    """``sum_{l=0}^{L-1} l^r (B^2 J)^l`` by direct summation."""
    q = B * B * J
    return math.fsum(float(l) ** r * q**l for l in range(L))


def stability_bound(eps, C, B, J, L, B_U=1.0, eps_U=0.0) -> float:
    """Bound on ``||Phi(S,x) - Phi(S_hat,x)||`` per unit ``||x||``."""
    a = eps * C / B
    total = eps_U**2 * xi(0, B, J, L) + 2 * eps_U * B_U * a * xi(1, B, J, L) + (B_U * a) ** 2 * xi(2, B, J, L)
    return math.sqrt(max(total, 0.0))


def coefficient_bound(eps, C, B, layer: int, B_U=1.0, eps_U=0.0) -> float:
    """Bound on one path coefficient difference per unit ``||x||``."""
    if layer == 0:
        return eps_U
    return eps_U * B**layer + B_U * eps * C * layer * B ** (layer - 1)


def wavelet_output_difference(
    bank_S: WaveletBank, bank_Shat: WaveletBank, j: int, trials: int = 0, seed: int = 0
) -> float:
    """``||H_j(S) - H_j(S_hat)||_2``; a Monte Carlo lower estimate is logged."""
    if bank_S.family is not bank_Shat.family or bank_S.J != bank_Shat.J:
        raise ConfigMismatch("banks differ in family or scale count")
    if bank_S.n != bank_Shat.n:
        raise DimensionMismatch(f"{bank_S.n} vs {bank_Shat.n}")
    D = bank_S.filter_matrices[j - 1] - bank_Shat.filter_matrices[j - 1]
    exact = float(np.linalg.norm(D, 2))
    if trials > 0:
        mc = monte_carlo_operator_norm(D, trials, seed)
        log.debug("scale %d: exact %.3e, monte carlo %.3e", j, exact, mc)
    return exact


def monte_carlo_operator_norm(D: np.ndarray, trials: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((D.shape[1], trials))
    X /= np.linalg.norm(X, axis=0)
    return float(np.max(np.linalg.norm(D @ X, axis=0)))
