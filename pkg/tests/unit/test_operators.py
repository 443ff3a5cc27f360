"""
Tests for level structures, sampling schemes and measurement operators.
"""

import math

import numpy as np
import pytest
from scipy.linalg import hadamard

from kawlab.common.errors import ArgumentError, ConfigError, SizeError
from kawlab.core.operators import (
    LevelStructure,
    MeasurementOperator,
    SamplingScheme,
    count_vanishing_level_patterns,
    draw_multilevel_scheme,
    dyadic_levels,
    fourier_budgets,
    kernel_basis,
    kernel_projectors,
    local_coherence,
    random_sparse_in_levels,
    random_unit,
    walsh_budgets,
)


def _decay_budgets(s, nu, C):
    """Fourier budgets from a decay matrix, iterated until the total settles."""
    s = np.asarray(s, dtype=float)
    r = s.size
    n = 2 ** (r - 1)
    sizes = np.asarray([1] + [2 ** (k - 1) for k in range(1, r)])
    k, l = np.meshgrid(np.arange(r), np.arange(r), indexing="ij")
    decay = np.where(l < k, 2.0 ** (l - k), np.where(l > k, 2.0 ** (-3.0 * (l - k)), 1.0))
    effective = decay @ s
    total = n
    while True:
        factor = (math.log(n) ** 3 * math.log(2 * total) * math.log(2 * s.sum()) ** 2
                  + math.log(n) * math.log(1 / nu))
        budgets = np.minimum(sizes, np.ceil(C * effective * factor - 1e-12)).astype(int)
        if budgets.sum() == total:
            return tuple(int(v) for v in budgets)
        total = int(budgets.sum())


def _naive_coherence(kind, r):
    """mu_{k,l} from the explicit N x N matrix U H* on dyadic levels."""
    n = 2 ** (r - 1)
    if kind == "fourier":
        signed = np.where(np.arange(n) <= n // 2, np.arange(n), np.arange(n) - n)
        rows = sorted(range(n), key=lambda j: (abs(signed[j]), signed[j] < 0))
        j = np.arange(n)
        U = (np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n))[rows]
    else:
        W = hadamard(n) / np.sqrt(n)
        changes = np.count_nonzero(np.diff(np.sign(W), axis=1), axis=1)
        U = W[np.argsort(changes)]
    haar = np.zeros((n, n))
    haar[0] = 1 / np.sqrt(n)
    row = 1
    while row < n:
        width = n // row
        for k in range(row):
            haar[row + k, k * width:k * width + width // 2] = 1 / np.sqrt(width)
            haar[row + k, k * width + width // 2:(k + 1) * width] = -1 / np.sqrt(width)
        row *= 2
    G = np.abs(U @ haar.T) ** 2
    bounds = [(0, 1)] + [(2 ** (k - 1), 2 ** k) for k in range(1, r)]
    return np.asarray([[G[a:b, c:d].max() for c, d in bounds] for a, b in bounds])


class TestLevelStructure:

    def test_dyadic_levels(self):
        assert dyadic_levels(1) == (1,)
        assert dyadic_levels(4) == (1, 2, 4, 8)

    def test_weights(self):
        levels = LevelStructure.dyadic(3, [1, 1, 2])
        assert levels.weights == pytest.approx((2.0, 2.0, math.sqrt(2.0)))

    def test_empty_level_gets_sentinel_weight(self):
        levels = LevelStructure.dyadic(3, [1, 1, 0])
        assert levels.weights[2] == pytest.approx(math.sqrt(2 * 4))
        assert LevelStructure.dyadic(3, [1, 1, 0], empty_level_weight=5.0).weights[2] == 5.0

    def test_weight_vector_is_constant_per_level(self):
        w = LevelStructure.dyadic(3, [1, 1, 2]).weight_vector()
        assert w.shape == (4,)
        assert w[2] == w[3]

    def test_sparsity_larger_than_level_rejected(self):
        with pytest.raises(ArgumentError):
            LevelStructure.dyadic(3, [2, 1, 1])

    def test_vanishing_patterns(self):
        result = count_vanishing_level_patterns(3)
        assert result.count == 2
        assert sorted(result.patterns) == [(0, 1, 1), (0, 1, 2)]


class TestSampling:

    def test_budgets_are_met_per_band(self, small_levels):
        scheme = draw_multilevel_scheme((1, 1, 2, 3), small_levels.sampling_levels, seed=3)
        assert scheme.counts_per_level() == (1, 1, 2, 3)
        assert scheme.m == 7
        assert len(set(scheme.omega.tolist())) == 7

    def test_same_seed_same_scheme(self, small_levels):
        a = draw_multilevel_scheme((1, 1, 1, 2), small_levels.sampling_levels, seed=11)
        b = draw_multilevel_scheme((1, 1, 1, 2), small_levels.sampling_levels, seed=11)
        assert np.array_equal(a.omega, b.omega)

    def test_budget_above_band_size_rejected(self, small_levels):
        with pytest.raises(ArgumentError):
            draw_multilevel_scheme((1, 1, 3, 1), small_levels.sampling_levels, seed=0)

    def test_scheme_text_uses_one_based_indices(self, small_levels):
        scheme = draw_multilevel_scheme((1, 1, 2, 4), small_levels.sampling_levels, seed=0)
        text = scheme.to_text()
        assert text.splitlines()[0] == "OMEGA r=4 seed=0"
        assert text.splitlines()[1:] == [str(i) for i in range(1, 9)]
        assert np.array_equal(SamplingScheme.from_text(text).omega, np.arange(8))

    def test_bad_scheme_header(self):
        with pytest.raises(ConfigError):
            SamplingScheme.from_text("1\n2\n")

    def test_walsh_budgets_clip_to_band(self, small_levels):
        budgets = walsh_budgets([1, 1, 1, 1], small_levels.sampling_levels, nu=0.5, C=1.0)
        assert budgets == tuple(small_levels.sampling_sizes)

    @pytest.mark.parametrize("C", [1.0, 1e-3, 3e-3, 1e-2])
    def test_fourier_budgets_match_decay_matrix(self, C):
        s = (1, 1, 1, 2, 2)
        assert fourier_budgets(s, dyadic_levels(5), 0.5, C) == _decay_budgets(s, 0.5, C)

    def test_fourier_budgets_values(self):
        s = (1, 1, 1, 2, 2)
        assert fourier_budgets(s, dyadic_levels(5), 0.5, 1.0) == (1, 1, 2, 4, 8)
        assert fourier_budgets(s, dyadic_levels(5), 0.5, 1e-3) == (1, 1, 1, 2, 2)

    def test_empty_level_is_not_sampled(self):
        levels = LevelStructure.dyadic(4, [1, 1, 1, 0])
        assert walsh_budgets(levels.local_sparsities, levels.sampling_levels, nu=0.5)[-1] == 0


class TestMeasurementOperator:

    def test_full_walsh_is_isometry(self, full_walsh, rng):
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.linalg.norm(full_walsh.apply(x)) == pytest.approx(np.linalg.norm(x))
        assert full_walsh.sigma_min() == pytest.approx(1.0)

    def test_adjoint(self, small_fourier, rng):
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        y = rng.standard_normal(small_fourier.m) + 1j * rng.standard_normal(small_fourier.m)
        lhs = np.vdot(y, small_fourier.apply(x))
        rhs = np.vdot(small_fourier.adjoint(y), x)
        assert abs(lhs - rhs) <= 1e-12

    def test_structured_matches_dense(self, small_fourier, rng):
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.allclose(small_fourier.to_dense() @ x, small_fourier.apply(x), atol=1e-13)

    def test_pinv_is_right_inverse(self, small_fourier, rng):
        y = rng.standard_normal(small_fourier.m) + 1j * rng.standard_normal(small_fourier.m)
        assert np.allclose(small_fourier.apply(small_fourier.pinv_apply(y)), y, atol=1e-12)

    def test_scaled_scheme_applies_level_weights(self, small_levels):
        scheme = draw_multilevel_scheme((1, 1, 1, 2), small_levels.sampling_levels, seed=7)
        A = MeasurementOperator.from_scheme("fourier", scheme, scaled=True)
        assert sorted(A.d.tolist()) == pytest.approx([1.0, 1.0, math.sqrt(2.0), math.sqrt(2.0), math.sqrt(2.0)])

    def test_text_form(self, small_fourier, rng):
        B = MeasurementOperator.from_text(small_fourier.to_text())
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        assert np.allclose(B.apply(x), small_fourier.apply(x), atol=1e-14)
        assert small_fourier.to_text().startswith(f"OPERATOR kind=fourier n=8 m={small_fourier.m}")

    def test_row_count_mismatch(self):
        with pytest.raises(SizeError):
            MeasurementOperator.from_text("OPERATOR kind=walsh n=4 m=2\n1 1.0\n")

    def test_dense_operator(self, rng):
        M = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        A = MeasurementOperator.dense(M)
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert np.allclose(A.apply(x), M @ x)
        assert np.allclose(A.adjoint(A.apply(x)), M.conj().T @ M @ x)


class TestKernel:

    def test_projectors_split_the_space(self, small_fourier, rng):
        proj = kernel_projectors(small_fourier)
        x = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        k, c = proj.project_kernel(x), proj.project_cokernel(x)
        assert np.allclose(k + c, x)
        assert np.linalg.norm(small_fourier.apply(k)) <= 1e-12
        assert abs(np.vdot(k, c)) <= 1e-12

    def test_kernel_basis_dimension(self, small_fourier):
        basis = kernel_basis(small_fourier)
        assert basis.shape == (8, 8 - small_fourier.m)
        assert np.max(np.abs(small_fourier.apply(basis.T))) <= 1e-12

    def test_random_unit_lies_in_subspace(self, small_fourier, rng):
        proj = kernel_projectors(small_fourier)
        z = random_unit(proj.project_kernel, rng, 8)
        assert np.linalg.norm(z) == pytest.approx(1.0)
        assert np.linalg.norm(small_fourier.apply(z)) <= 1e-12

    def test_random_sparse_in_levels(self, rng):
        levels = LevelStructure.dyadic(4, [1, 0, 2, 1])
        c = random_sparse_in_levels(levels, rng)
        nonzero = [np.count_nonzero(c[lo:hi]) for lo, hi in levels.sparsity_bounds]
        assert nonzero == [1, 0, 2, 1]
        assert 0.2 <= np.linalg.norm(c) <= 1.0

    def test_all_empty_levels_rejected(self, rng):
        with pytest.raises(ArgumentError):
            random_sparse_in_levels(LevelStructure.dyadic(3), rng)


class TestCoherence:

    @pytest.mark.parametrize("kind", ["fourier", "walsh"])
    @pytest.mark.parametrize("r", [5, 7])
    def test_matches_full_matrix(self, kind, r):
        expected = _naive_coherence(kind, r)
        levels = LevelStructure.dyadic(r)
        assert np.allclose(local_coherence(kind, levels), expected, atol=1e-12)
        assert np.allclose(local_coherence(kind, levels, block=8), expected, atol=1e-12)

    def test_walsh_haar_is_block_diagonal(self):
        levels = LevelStructure.dyadic(5)
        mu = local_coherence("walsh", levels)
        sizes = np.asarray(levels.sampling_sizes)
        assert np.allclose(np.diag(mu) * sizes, 1.0, atol=1e-12)
        off = mu - np.diag(np.diag(mu))
        assert np.max(off) <= 1e-12
