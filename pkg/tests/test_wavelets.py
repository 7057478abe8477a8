import csv

import numpy as np
import pytest

from graphscatter.errors import (
    DegenerateSpectrum,
    DimensionMismatch,
    DomainMismatch,
    ScaleOutOfRange,
    ZeroFrameLowerBound,
)
from graphscatter.graph_core import (
    Graph,
    ShiftVariant,
    apply_permutation,
    build_shift,
    generate_small_world,
)
from graphscatter.wavelets import (
    SpectralKernel,
    WaveletBank,
    WaveletFamily,
    apply_filter,
    build_bank,
    chebyshev_apply,
    cubic_coefficients,
    diffusion_bank,
    dump_kernels,
    estimate_frame_bounds,
    estimate_lipschitz,
    monic_cubic_bank,
    monic_cubic_generator,
    tight_hann_bank,
)

FAMILIES = list(WaveletFamily)


def custom_bank(shift, *funcs, domain=(0.0, 2.0)):
    kernels = [SpectralKernel(f, domain) for f in funcs]
    return WaveletBank(WaveletFamily.TIGHT_HANN, kernels, shift)


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


class TestMonicCubic:
    def test_cubic_example(self):
        c = cubic_coefficients(1.0, 2.0, 2.0, 2.0)
        assert np.allclose(c, [-5, 11, -6, 1], atol=1e-12)
        s = np.polynomial.Polynomial(c)
        ds = s.deriv()
        assert np.allclose([s(1), s(2), ds(1), ds(2)], [1, 1, 2, -1], atol=1e-12)

    def test_generator_is_one_at_x1(self):
        g, _, _ = monic_cubic_generator(0.3, 1.1)
        assert g(np.array([0.3]))[0] == 1.0

    def test_generator_c1(self):
        g, gp, _ = monic_cubic_generator(0.4, 1.2, 2.0, 2.0)
        for x in (0.4, 1.2):
            lo, hi = np.array([x - 1e-9]), np.array([x + 1e-9])
            assert abs(g(lo)[0] - g(hi)[0]) < 1e-7
            assert abs(gp(lo)[0] - gp(hi)[0]) < 1e-6

    def test_generator_tails(self):
        g, _, g_max = monic_cubic_generator(1.0, 2.0)
        assert np.allclose(g(np.array([0.5, 4.0])), [0.25, 0.25])
        assert g_max >= 1.0

    def test_small_world_bank(self, banks):
        bank = banks[WaveletFamily.MONIC_CUBIC]
        A, B = bank.frame_bounds
        assert bank.J == 6 and A > 0 and B < 10

    def test_scaling_kernel_at_zero_matches_band_max(self, banks):
        bank = banks[WaveletFamily.MONIC_CUBIC]
        lam = np.linspace(*bank.domain, 4001)
        band_max = bank.kernel_values(lam)[1:].max()
        assert bank.kernels[0](np.array([0.0]))[0] == pytest.approx(band_max, rel=1e-3)

    def test_degenerate_spectrum(self):
        W = np.ones((8, 8)) - np.eye(8)
        with pytest.raises(DegenerateSpectrum):
            monic_cubic_bank(build_shift(Graph(W), ShiftVariant.NORMALIZED_LAPLACIAN))


class TestTightHann:
    def test_six_kernels(self, banks):
        assert banks[WaveletFamily.TIGHT_HANN].J == 6

    def test_tight_on_grid(self, banks):
        bank = banks[WaveletFamily.TIGHT_HANN]
        lam = np.linspace(*bank.domain, 1000)
        energy = np.sum(bank.kernel_values(lam) ** 2, axis=0)
        assert np.ptp(energy) <= 1e-9 * energy.max()
        A, B = bank.frame_bounds
        assert B / A <= 1 + 1e-6

    def test_values_at_lambda_max(self, banks, normalized_laplacian):
        bank = banks[WaveletFamily.TIGHT_HANN]
        v = bank.kernel_values(np.array([normalized_laplacian.spectrum.eigenvalues[-1]]))
        assert np.all(np.isfinite(v)) and np.all(v >= 0)

    def test_every_scale_live(self, banks):
        bank = banks[WaveletFamily.TIGHT_HANN]
        lam = bank.shift.spectrum.eigenvalues
        assert np.all(np.abs(bank.kernel_values(lam)).max(axis=1) > 0.1)

    def test_disconnected_graph(self):
        W = np.zeros((6, 6))
        W[0, 1] = W[1, 0] = W[1, 2] = W[2, 1] = W[3, 4] = W[4, 3] = W[4, 5] = W[5, 4] = 1
        with pytest.raises(DegenerateSpectrum):
            tight_hann_bank(build_shift(Graph(W), ShiftVariant.NORMALIZED_LAPLACIAN))

    def test_needs_j_above_r(self, normalized_laplacian):
        with pytest.raises(ValueError):
            tight_hann_bank(normalized_laplacian, J=3, R=3)


class TestDiffusion:
    def test_two_node_first_scale_vanishes(self):
        bank = diffusion_bank(Graph([[0, 1], [1, 0]]), J=2)
        assert np.allclose(bank.filter_matrices[0], 0, atol=1e-15)
        assert bank.shift.variant is ShiftVariant.LAZY_DIFFUSION

    def test_first_scale_lipschitz(self, banks):
        k = banks[WaveletFamily.DIFFUSION].kernels[0]
        t = np.linspace(0, 1, 2001)
        assert np.max(np.abs(t * k.derivative(t))) == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(k.derivative(t), 1 - 2 * t)

    def test_vanishes_at_one(self, banks):
        vals = banks[WaveletFamily.DIFFUSION].kernel_values(np.array([0.0, 1.0]))
        assert np.all(vals == 0)

    def test_zero_lower_frame_bound_recorded(self, banks):
        bank = banks[WaveletFamily.DIFFUSION]
        assert bank.frame_bounds[0] == 0.0
        assert bank.frame_null_lambda is not None


class TestApplyFilter:
    def test_zero(self, banks):
        for bank in banks.values():
            assert not np.any(apply_filter(bank, 2, np.zeros(100)))

    def test_eigenvector(self, banks):
        for bank in banks.values():
            sp = bank.shift.spectrum
            v = sp.eigenvectors[:, 40]
            h = bank.kernels[2](sp.eigenvalues[40:41])[0]
            assert np.allclose(apply_filter(bank, 3, v), h * v, atol=1e-12)

    def test_independent_oracle(self, rng):
        g = generate_small_world(10, 0.5, 0.2, 3)
        shift = build_shift(g, ShiftVariant.NORMALIZED_LAPLACIAN)
        bank = tight_hann_bank(shift)
        lam, V = np.linalg.eigh(shift.matrix)
        x = rng.standard_normal(10)
        for j in range(1, bank.J + 1):
            expected = V @ np.diag(bank.kernels[j - 1](lam)) @ V.T @ x
            assert np.allclose(apply_filter(bank, j, x), expected, atol=1e-10)

    def test_errors(self, banks):
        bank = banks[WaveletFamily.TIGHT_HANN]
        with pytest.raises(ScaleOutOfRange):
            apply_filter(bank, 0, np.zeros(100))
        with pytest.raises(ScaleOutOfRange):
            apply_filter(bank, 7, np.zeros(100))
        with pytest.raises(DimensionMismatch):
            apply_filter(bank, 1, np.zeros(5))


class TestChebyshev:
    def test_constant_kernel(self, normalized_laplacian, rng):
        bank = custom_bank(normalized_laplacian, lambda l: np.full_like(np.asarray(l, float), 2.5))
        x = rng.standard_normal(100)
        for order in (1, 3, 10):
            assert np.allclose(chebyshev_apply(bank, 1, x, order), 2.5 * x, atol=1e-12)

    def test_polynomial_reproduction(self, rng):
        g = generate_small_world(12, 0.5, 0.2, 5)
        shift = build_shift(g, ShiftVariant.NORMALIZED_LAPLACIAN)
        bank = custom_bank(shift, lambda l: 1 - 3 * l + l**3 - 0.2 * l**5)
        x = rng.standard_normal(12)
        assert np.allclose(chebyshev_apply(bank, 1, x, 12), apply_filter(bank, 1, x), atol=1e-8)

    def test_tight_hann_convergence(self, banks, rng):
        bank = banks[WaveletFamily.TIGHT_HANN]
        x = rng.standard_normal(100)
        for j in range(1, bank.J + 1):
            exact = apply_filter(bank, j, x)
            errs = [rel(chebyshev_apply(bank, j, x, o), exact) for o in (8, 16, 32)]
            assert errs[1] <= errs[0] + 1e-12 and errs[2] <= errs[1] + 1e-12

    def test_order_64_beats_order_8(self, banks, rng):
        x = rng.standard_normal(100)
        for bank in banks.values():
            for j in range(1, bank.J + 1):
                exact = apply_filter(bank, j, x)
                # 1e-12 covers the rounding floor of polynomial diffusion kernels
                assert rel(chebyshev_apply(bank, j, x, 64), exact) <= rel(chebyshev_apply(bank, j, x, 8), exact) + 1e-12

    def test_domain_mismatch(self, normalized_laplacian):
        bank = custom_bank(normalized_laplacian, lambda l: np.ones_like(l), domain=(0.0, 0.5))
        with pytest.raises(DomainMismatch):
            chebyshev_apply(bank, 1, np.ones(100), 4)


class TestFrameAndLipschitz:
    def test_unit_kernel(self, normalized_laplacian):
        bank = custom_bank(normalized_laplacian, lambda l: np.ones_like(l))
        assert estimate_frame_bounds(bank) == (1.0, 1.0)
        assert estimate_lipschitz(bank) == 0.0

    def test_zero_lower_bound_raises(self, normalized_laplacian):
        bank = custom_bank(normalized_laplacian, lambda l: l)
        with pytest.raises(ZeroFrameLowerBound) as info:
            estimate_frame_bounds(bank)
        assert info.value.lam == 0.0

    def test_grid_size_preconditions(self, banks):
        bank = banks[WaveletFamily.TIGHT_HANN]
        with pytest.raises(ValueError):
            estimate_frame_bounds(bank, 50)
        with pytest.raises(ValueError):
            estimate_lipschitz(bank, 500)

    def test_lipschitz_grid_refinement(self, small_world):
        for fam in FAMILIES:
            bank = build_bank(fam, small_world)
            c1 = estimate_lipschitz(bank, 1000)
            c2 = estimate_lipschitz(bank, 2000)
            assert abs(c1 - c2) <= 0.01 * c2

    def test_frame_inequality(self, banks, rng):
        X = rng.standard_normal((200, 100))
        for bank in banks.values():
            A, B = bank.frame_bounds
            energy = sum(np.linalg.norm(X @ H, axis=1) ** 2 for H in bank.filter_matrices)
            norms = np.linalg.norm(X, axis=1) ** 2
            assert np.all(A**2 * norms - 1e-6 <= energy)
            assert np.all(energy <= B**2 * norms + 1e-6)


class TestBankInvariants:
    def test_filters_symmetric(self, banks):
        for bank in banks.values():
            for H in bank.filter_matrices:
                assert np.max(np.abs(H - H.T)) <= 1e-9

    def test_filters_read_only(self, banks):
        with pytest.raises(ValueError):
            banks[WaveletFamily.TIGHT_HANN].filter_matrices[0, 0, 0] = 1.0

    def test_permutation_equivariance(self, small_world, rng):
        p = rng.permutation(100)
        g_p = apply_permutation(small_world, p)
        for fam in FAMILIES:
            a, b = build_bank(fam, small_world), build_bank(fam, g_p)
            for Ha, Hb in zip(a.filter_matrices, b.filter_matrices):
                assert np.max(np.abs(Hb - Ha[np.ix_(p, p)])) <= 1e-9

    def test_derivatives_match_finite_differences(self, banks, rng):
        for bank in banks.values():
            lo, hi = bank.domain
            pts = rng.uniform(lo + 0.01 * (hi - lo), hi - 0.01 * (hi - lo), 100)
            for k in bank.kernels:
                if not k.has_analytic_derivative:
                    continue
                assert np.allclose(k.derivative(pts), k.finite_difference(pts), rtol=1e-4, atol=1e-6)

    def test_on_shift_keeps_kernels_and_bounds(self, banks, small_world):
        bank = banks[WaveletFamily.MONIC_CUBIC]
        W = small_world.weights * 1.5
        other = bank.on_shift(build_shift(Graph(W), ShiftVariant.NORMALIZED_LAPLACIAN))
        assert other.kernels == bank.kernels
        assert other.frame_bounds == bank.frame_bounds and other.lipschitz_C == bank.lipschitz_C
        # uniform scaling leaves the normalized Laplacian unchanged
        assert np.allclose(other.filter_matrices, bank.filter_matrices, atol=1e-12)

    def test_on_shift_requires_same_variant(self, banks, small_world):
        with pytest.raises(ValueError):
            banks[WaveletFamily.MONIC_CUBIC].on_shift(build_shift(small_world, ShiftVariant.LAPLACIAN))


def test_dump_kernels(banks, tmp_path):
    bank = banks[WaveletFamily.TIGHT_HANN]
    dump_kernels(bank, tmp_path / "k.csv")
    rows = list(csv.reader(open(tmp_path / "k.csv")))
    assert rows[0] == ["lambda", "h_1", "h_2", "h_3", "h_4", "h_5", "h_6"]
    assert len(rows) == 1001
    lam = float(rows[500][0])
    assert float(rows[500][3]) == bank.kernels[2](np.array([lam]))[0]
