"""Spectral graph wavelet banks: monic cubic, tight Hann and diffusion families."""

from __future__ import annotations

import csv
import enum
import math

import numpy as np
from numpy.polynomial import chebyshev as npcheb

from .errors import (
    DegenerateSpectrum,
    DimensionMismatch,
    DomainMismatch,
    ScaleOutOfRange,
    SingularCubicSystem,
    ZeroFrameLowerBound,
)
from .graph_core import Graph, ShiftOperator, ShiftVariant, Spectrum, build_shift

DEFAULT_FRAME_GRID = 1000
DEFAULT_LIPSCHITZ_GRID = 2000


class WaveletFamily(enum.Enum):
    MONIC_CUBIC = "monic_cubic"
    TIGHT_HANN = "tight_hann"
    DIFFUSION = "diffusion"


class SpectralKernel:
    """A real function of the eigenvalue with a declared domain.

    If no analytic derivative is supplied, :meth:`derivative` falls back to a
    central difference with step ``1e-6 * (hi - lo)``.
    """

    def __init__(self, func, domain, derivative=None, name=""):
        lo, hi = float(domain[0]), float(domain[1])
        if not hi > lo:
            raise ValueError(f"empty kernel domain [{lo}, {hi}]")
        self._func = func
        self._deriv = derivative
        self.domain = (lo, hi)
        self.name = name

    def __call__(self, lam):
        return self._func(np.asarray(lam, dtype=float))

    @property
    def has_analytic_derivative(self) -> bool:
        return self._deriv is not None

    def derivative(self, lam):
        lam = np.asarray(lam, dtype=float)
        if self._deriv is not None:
            return self._deriv(lam)
        return self.finite_difference(lam)

    def finite_difference(self, lam):
        h = 1e-6 * (self.domain[1] - self.domain[0])
        lam = np.asarray(lam, dtype=float)
        return (self._func(lam + h) - self._func(lam - h)) / (2 * h)

    def __repr__(self):
        return f"SpectralKernel({self.name!r}, domain={self.domain})"


def _materialize(kernels, spectrum: Spectrum) -> np.ndarray:
    V = spectrum.eigenvectors
    mats = []
    for k in kernels:
        H = (V * k(spectrum.eigenvalues)) @ V.T
        mats.append(0.5 * (H + H.T))
    out = np.stack(mats)
    out.setflags(write=False)
    return out


class WaveletBank:
    """J spectral kernels instantiated on one shift operator.

    Filter matrices are materialized at construction. ``frame_bounds`` and
    ``lipschitz_C`` are filled by the constructors through
    :func:`estimate_frame_bounds` and :func:`estimate_lipschitz`.
    """

    def __init__(self, family: WaveletFamily, kernels, shift: ShiftOperator):
        if len(kernels) < 1:
            raise ValueError("a bank needs at least one kernel")
        self.family = family
        self.kernels = list(kernels)
        self.shift = shift
        self.filter_matrices = _materialize(self.kernels, shift.spectrum)
        self.frame_bounds = None
        self.frame_null_lambda = None
        self.lipschitz_C = None

    @property
    def J(self) -> int:
        return len(self.kernels)

    @property
    def n(self) -> int:
        return self.shift.n

    @property
    def domain(self):
        return (min(k.domain[0] for k in self.kernels), max(k.domain[1] for k in self.kernels))

    def on_shift(self, shift: ShiftOperator) -> WaveletBank:
        """Instantiate the same kernels on another shift (e.g. a perturbed one).

        Frame bounds and the Lipschitz constant are properties of the kernels
        and carry over unchanged.
        """
        if shift.variant is not self.shift.variant:
            raise ValueError(f"bank expects a {self.shift.variant.value} shift")
        other = WaveletBank(self.family, self.kernels, shift)
        other.frame_bounds = self.frame_bounds
        other.frame_null_lambda = self.frame_null_lambda
        other.lipschitz_C = self.lipschitz_C
        return other

    def kernel_values(self, lam) -> np.ndarray:
        """``(J, len(lam))`` array of kernel values."""
        return np.stack([k(lam) for k in self.kernels])

    def __repr__(self):
        return f"WaveletBank({self.family.value}, J={self.J}, n={self.n})"


def _domain_for(spectrum: Spectrum, lo: float, hi: float):
    lam = spectrum.eigenvalues
    return (min(lo, float(lam[0])), max(hi, float(lam[-1])))


def _finalize(bank: WaveletBank, strict_frame=True) -> WaveletBank:
    estimate_frame_bounds(bank, DEFAULT_FRAME_GRID, strict=strict_frame)
    estimate_lipschitz(bank, DEFAULT_LIPSCHITZ_GRID)
    return bank


# --- monic cubic -----------------------------------------------------------


def cubic_coefficients(x1: float, x2: float, alpha: float, beta: float) -> np.ndarray:
    """Coefficients ``c0..c3`` of the C^1 cubic joining the two power-law tails."""
    M = np.array(
        [
            [1.0, x1, x1**2, x1**3],
            [1.0, x2, x2**2, x2**3],
            [0.0, 1.0, 2 * x1, 3 * x1**2],
            [0.0, 1.0, 2 * x2, 3 * x2**2],
        ]
    )
    rhs = np.array([1.0, 1.0, alpha / x1, -beta / x2])
    if np.linalg.cond(M) > 1e14:
        raise SingularCubicSystem(f"cubic system is singular for x1={x1}, x2={x2}")
    try:
        return np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularCubicSystem(str(exc)) from exc


def monic_cubic_generator(x1, x2, alpha=2.0, beta=2.0):
    """Return ``(g, g_prime, g_max)`` for the power-law and cubic generating kernel."""
    if not 0 < x1 < x2:
        raise DegenerateSpectrum(f"need 0 < x1 < x2, got x1={x1}, x2={x2}")
    c = cubic_coefficients(x1, x2, alpha, beta)
    cubic = np.polynomial.Polynomial(c)
    dcubic = cubic.deriv()

    def g(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        low = x <= x1
        high = x >= x2
        mid = ~(low | high)
        out[low] = (x[low] / x1) ** alpha
        out[high] = (x2 / x[high]) ** beta
        out[mid] = cubic(x[mid])
        return out

    def g_prime(x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        low = x <= x1
        high = x >= x2
        mid = ~(low | high)
        out[low] = alpha * x[low] ** (alpha - 1) / x1**alpha
        out[high] = -beta * x2**beta / x[high] ** (beta + 1)
        out[mid] = dcubic(x[mid])
        return out

    crit = [r.real for r in dcubic.roots() if abs(r.imag) < 1e-12 and x1 < r.real < x2]
    g_max = max([1.0] + [float(cubic(r)) for r in crit])
    return g, g_prime, g_max


def monic_cubic_bank(
    shift: ShiftOperator,
    J: int = 6,
    alpha: float = 2.0,
    beta: float = 2.0,
    K_ratio: float = 20.0,
) -> WaveletBank:
    """Monic cubic wavelets plus a low-pass scaling kernel (scale 1).

    ``shift`` is normally a normalized Laplacian. The band-pass scales are
    log-spaced so that the coarsest maps ``lam_max / K_ratio`` onto ``x2``
    and the finest maps ``lam_max`` onto ``x2``.
    """
    eig = shift.spectrum
    if J < 2:
        raise ValueError("J must be at least 2")
    if alpha <= 0 or beta <= 0 or K_ratio <= 1:
        raise ValueError("alpha, beta must be positive and K_ratio > 1")
    lam = eig.eigenvalues
    N = lam.size
    i1, i2 = N // 4, math.ceil(3 * N / 4)
    if i1 < 1:
        raise DegenerateSpectrum(f"too few eigenvalues ({N}) to place x1")
    x1, x2 = float(lam[i1 - 1]), float(lam[i2 - 1])
    if x2 - x1 <= 1e-9 * max(1.0, abs(x2)):
        raise DegenerateSpectrum(f"x1 == x2 == {x1}: spectrum too degenerate")
    g, g_prime, g_max = monic_cubic_generator(x1, x2, alpha, beta)

    lam_max = float(lam[-1])
    lam_min_design = lam_max / K_ratio
    scales = np.exp(np.linspace(np.log(x2 / lam_min_design), np.log(x2 / lam_max), J - 1))
    domain = _domain_for(eig, 0.0, float(lam[-1]))

    width = 0.6 * lam_min_design

    def scaling(x):
        return g_max * np.exp(-((x / width) ** 4))

    def scaling_prime(x):
        return -4.0 * g_max * x**3 / width**4 * np.exp(-((x / width) ** 4))

    kernels = [SpectralKernel(scaling, domain, scaling_prime, name="mc_scaling")]
    for j, t in enumerate(scales, start=2):
        kernels.append(
            SpectralKernel(
                lambda x, t=t: g(t * x),
                domain,
                lambda x, t=t: t * g_prime(t * x),
                name=f"mc_{j}",
            )
        )
    return _finalize(WaveletBank(WaveletFamily.MONIC_CUBIC, kernels, shift))


# --- tight Hann ------------------------------------------------------------


def tight_hann_bank(
    shift: ShiftOperator,
    J: int = 6,
    R: int = 3,
    overlap_coeffs=(0.5, 0.5),
    grid_size: int = DEFAULT_FRAME_GRID,
) -> WaveletBank:
    """Log-warped uniform translates of a Hann window plus a complementary
    scaling kernel that makes the frame tight on the evaluation grid."""
    if not J > R >= 2:
        raise ValueError("need J > R >= 2")
    eig = shift.spectrum
    lam = eig.eigenvalues
    lam2 = float(lam[1]) if lam.size > 1 else 0.0
    if lam2 <= 1e-10 * max(1.0, abs(float(lam[-1]))):
        raise DegenerateSpectrum(f"second eigenvalue {lam2} is not positive (disconnected graph?)")
    a0, a1 = map(float, overlap_coeffs)
    floor = lam2 / 2
    u_min, u_max = math.log(floor), math.log(float(lam[-1]))
    n_band = J - 1
    delta = (u_max - u_min) / n_band
    support = R * delta
    centers = u_min + delta * np.arange(n_band) + support / 2
    domain = _domain_for(eig, 0.0, float(lam[-1]))

    def warp(x):
        return np.log(np.maximum(x, floor))

    def window(v):
        inside = np.abs(v) <= support / 2
        return np.where(inside, a0 + a1 * np.cos(2 * np.pi * v / support), 0.0)

    def window_prime(v):
        inside = np.abs(v) <= support / 2
        return np.where(inside, -a1 * (2 * np.pi / support) * np.sin(2 * np.pi * v / support), 0.0)

    def band(x, c):
        return window(warp(x) - c)

    def band_prime(x, c):
        x = np.asarray(x, dtype=float)
        above = x > floor
        safe = np.where(above, x, 1.0)
        return np.where(above, window_prime(np.log(safe) - c) / safe, 0.0)

    def band_energy(x):
        return sum(band(x, c) ** 2 for c in centers)

    grid = np.union1d(np.linspace(domain[0], domain[1], grid_size), lam)
    level = float(np.max(band_energy(grid)))

    def scaling(x):
        # the translates sum to a constant inside the covered range; without the
        # snap, rounding noise there turns into sqrt(1e-16) ~ 1e-8
        gap = level - band_energy(x)
        return np.sqrt(np.where(gap > 1e-12 * level, gap, 0.0))

    kernels = [SpectralKernel(scaling, domain, None, name="th_scaling")]
    for j, c in enumerate(centers, start=2):
        kernels.append(
            SpectralKernel(
                lambda x, c=c: band(x, c),
                domain,
                lambda x, c=c: band_prime(x, c),
                name=f"th_{j}",
            )
        )
    return _finalize(WaveletBank(WaveletFamily.TIGHT_HANN, kernels, shift))


# --- diffusion -------------------------------------------------------------


def diffusion_bank(graph_or_shift, J: int = 6) -> WaveletBank:
    """``H_j = T^(2^(j-1)) (I - T^(2^(j-1)))`` on the lazy diffusion operator T.

    These kernels vanish at t = 0 and t = 1, so the lower frame bound is 0;
    it is recorded rather than raised.
    """
    if J < 1:
        raise ValueError("J must be at least 1")
    if isinstance(graph_or_shift, Graph):
        shift = build_shift(graph_or_shift, ShiftVariant.LAZY_DIFFUSION)
    else:
        shift = graph_or_shift
        if shift.variant is not ShiftVariant.LAZY_DIFFUSION:
            raise ValueError("diffusion bank needs the lazy diffusion operator")
    domain = _domain_for(shift.spectrum, 0.0, 1.0)
    kernels = []
    for j in range(1, J + 1):
        a = 2 ** (j - 1)
        kernels.append(
            SpectralKernel(
                lambda t, a=a: t**a * (1 - t**a),
                domain,
                lambda t, a=a: a * t ** (a - 1) - 2 * a * t ** (2 * a - 1),
                name=f"diff_{j}",
            )
        )
    return _finalize(WaveletBank(WaveletFamily.DIFFUSION, kernels, shift), strict_frame=False)


def build_bank(family: WaveletFamily | str, graph: Graph, J: int = 6, **kwargs) -> WaveletBank:
    """Build a bank of the given family on its default shift for ``graph``."""
    family = WaveletFamily(family)
    if family is WaveletFamily.DIFFUSION:
        return diffusion_bank(graph, J)
    shift = build_shift(graph, ShiftVariant.NORMALIZED_LAPLACIAN)
    if family is WaveletFamily.MONIC_CUBIC:
        return monic_cubic_bank(shift, J, **kwargs)
    return tight_hann_bank(shift, J, **kwargs)


# --- filtering -------------------------------------------------------------


def _check_scale(bank: WaveletBank, j: int):
    if not 1 <= j <= bank.J:
        raise ScaleOutOfRange(f"scale {j} outside 1..{bank.J}")


def apply_filter(bank: WaveletBank, j: int, x) -> np.ndarray:
    _check_scale(bank, j)
    x = np.asarray(x, dtype=float)
    if x.shape[0] != bank.n:
        raise DimensionMismatch(f"signal length {x.shape[0]} != {bank.n}")
    return bank.filter_matrices[j - 1] @ x


def chebyshev_coefficients(kernel: SpectralKernel, order: int) -> np.ndarray:
    lo, hi = kernel.domain
    half, mid = (hi - lo) / 2, (hi + lo) / 2
    return npcheb.chebinterpolate(lambda y: kernel(half * y + mid), order)


def chebyshev_apply(bank: WaveletBank, j: int, x, order: int) -> np.ndarray:
    """Filter ``x`` with a degree-``order`` Chebyshev expansion of kernel j.

    Uses only matrix-vector products with the shift; the spectrum is read
    solely to check that it lies inside the kernel domain.
    """
    _check_scale(bank, j)
    if order < 1:
        raise ValueError("order must be at least 1")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != bank.n:
        raise DimensionMismatch(f"signal length {x.shape[0]} != {bank.n}")
    kernel = bank.kernels[j - 1]
    lo, hi = kernel.domain
    lam = bank.shift.spectrum.eigenvalues
    tol = 1e-9 * (hi - lo)
    if lam[0] < lo - tol or lam[-1] > hi + tol:
        raise DomainMismatch(f"spectrum [{lam[0]}, {lam[-1]}] exceeds kernel domain [{lo}, {hi}]")
    coeffs = chebyshev_coefficients(kernel, order)
    half, mid = (hi - lo) / 2, (hi + lo) / 2
    S = bank.shift.matrix

    def scaled(v):
        return (S @ v - mid * v) / half

    t_prev, t_cur = x, scaled(x)
    out = coeffs[0] * t_prev + coeffs[1] * t_cur
    for c in coeffs[2:]:
        t_prev, t_cur = t_cur, 2 * scaled(t_cur) - t_prev
        out = out + c * t_cur
    return out


# --- frame and Lipschitz estimates ----------------------------------------


def _evaluation_grid(bank: WaveletBank, grid_size: int) -> np.ndarray:
    lo, hi = bank.domain
    return np.union1d(np.linspace(lo, hi, grid_size), bank.shift.spectrum.eigenvalues)


def estimate_frame_bounds(bank: WaveletBank, grid_size: int = DEFAULT_FRAME_GRID, strict=True):
    """Frame bounds ``(A, B)`` from ``sum_j h_j(lam)^2`` on grid and spectrum.

    With ``strict`` a vanishing lower bound raises :class:`ZeroFrameLowerBound`;
    otherwise ``A = 0`` is stored and the offending eigenvalue recorded in
    ``bank.frame_null_lambda``.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    grid = _evaluation_grid(bank, grid_size)
    energy = np.sum(bank.kernel_values(grid) ** 2, axis=0)
    i_min = int(np.argmin(energy))
    A, B = math.sqrt(max(float(energy[i_min]), 0.0)), math.sqrt(float(np.max(energy)))
    if A <= 1e-12:
        if strict:
            raise ZeroFrameLowerBound(f"frame lower bound vanishes at lambda={grid[i_min]}", grid[i_min])
        A = 0.0
        bank.frame_null_lambda = float(grid[i_min])
    bank.frame_bounds = (A, B)
    return A, B


def estimate_lipschitz(bank: WaveletBank, grid_size: int = DEFAULT_LIPSCHITZ_GRID) -> float:
    """Integral-Lipschitz constant ``max_j max_lam |lam h_j'(lam)|``."""
    if grid_size < 1000:
        raise ValueError("grid_size must be at least 1000")
    grid = _evaluation_grid(bank, grid_size)
    C = max(float(np.max(np.abs(grid * k.derivative(grid)))) for k in bank.kernels)
    bank.lipschitz_C = C
    return C


def dump_kernels(bank: WaveletBank, path, grid_size: int = 1000) -> None:
    lo, hi = bank.domain
    grid = np.linspace(lo, hi, grid_size)
    values = bank.kernel_values(grid)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lambda"] + [f"h_{j}" for j in range(1, bank.J + 1)])
        for i, lam in enumerate(grid):
            w.writerow([repr(float(lam))] + [repr(float(v)) for v in values[:, i]])
