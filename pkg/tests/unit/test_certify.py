"""
Tests for RIPL certification, rNSP helpers and kernel proximity.
"""

import itertools
import math

import numpy as np
import pytest

from kawlab.common.errors import ArgumentError, SizeError
from kawlab.core.certify import (
    kernel_proximity,
    ripl_constant,
    ripl_orders,
    rnsp_constants_from_rip,
    rnsp_falsify,
    rnsp_sides,
)
from kawlab.core.operators import LevelStructure, MeasurementOperator, kernel_basis


def _kernel_threshold(k, s):
    """Largest rho violated on the kernel line of k, with its support, over every support of size s."""
    mag = np.abs(k)
    best, best_support = -1.0, None
    for support in itertools.combinations(range(mag.size), s):
        inside = np.zeros(mag.size, dtype=bool)
        inside[list(support)] = True
        ratio = np.linalg.norm(mag[inside]) * math.sqrt(s) / mag[~inside].sum()
        if ratio > best:
            best, best_support = ratio, np.asarray(support)
    return best, best_support


class TestRipl:

    def test_orders_are_clipped_to_level_size(self, small_levels):
        assert ripl_orders(small_levels) == (1, 1, 2, 4)

    def test_full_walsh_haar_is_isometry(self, full_walsh, small_levels):
        cert = ripl_constant(full_walsh, "haar", small_levels)
        assert cert.delta <= 1e-12
        assert cert.certifies()
        assert cert.method == "exhaustive"
        assert cert.supports_checked == 1

    def test_subsampled_operator_has_positive_delta(self, small_fourier, small_levels):
        cert = ripl_constant(small_fourier, "haar", small_levels, t=(1, 1, 1, 1))
        assert cert.supports_checked == 1 * 1 * 2 * 4
        assert cert.delta > 0
        assert cert.worst[0][0] == cert.delta

    def test_sampled_mode_is_seeded(self, small_fourier, small_levels):
        a = ripl_constant(small_fourier, "haar", small_levels, t=(1, 1, 1, 2), mode="sampled:5", seed=3)
        b = ripl_constant(small_fourier, "haar", small_levels, t=(1, 1, 1, 2), mode=("sampled", 5), seed=3)
        assert a.delta == b.delta
        assert a.method == "sampled:5"

    def test_cap_rejects_large_enumeration(self, small_fourier, small_levels):
        with pytest.raises(SizeError):
            ripl_constant(small_fourier, "haar", small_levels, t=(1, 1, 1, 2), cap=3)

    def test_bad_order(self, small_fourier, small_levels):
        with pytest.raises(ArgumentError):
            ripl_constant(small_fourier, "haar", small_levels, t=(1, 1, 3, 1))
        with pytest.raises(ArgumentError):
            ripl_constant(small_fourier, "haar", small_levels, t=(1, 1))

    def test_report_carries_checks(self, small_fourier, small_levels):
        report = ripl_constant(small_fourier, "haar", small_levels, t=(1, 1, 1, 1)).to_report()
        assert report.get("delta") is not None
        assert [c.name for c in report.checks] == ["delta_is_worst"]


class TestRnsp:

    def test_constants_at_zero(self):
        assert rnsp_constants_from_rip(0.0) == (0.0, 1.0)

    def test_constants_grow_with_delta(self):
        rho_a, gamma_a = rnsp_constants_from_rip(0.1)
        rho_b, gamma_b = rnsp_constants_from_rip(0.5)
        assert rho_a < rho_b < 1
        assert gamma_a < gamma_b

    def test_out_of_range_delta(self):
        with pytest.raises(ArgumentError):
            rnsp_constants_from_rip(4 / math.sqrt(41))

    def test_sides_on_sparse_vector(self, full_walsh):
        x = np.zeros(8, dtype=complex)
        x[2] = 3.0
        w = rnsp_sides(full_walsh, x, 1, 0.5, 1.0)
        assert w.lhs == pytest.approx(3.0)
        assert w.rhs == pytest.approx(3.0)
        assert w.support.tolist() == [2]

    def test_isometry_has_no_witness(self, full_walsh):
        assert rnsp_falsify(full_walsh, 1, 1.0, 1.0, budget=8, iterations=50) is None

    def test_kernel_vector_is_a_witness(self, small_fourier):
        found = rnsp_falsify(small_fourier, 1, 0.01, 1.0)
        assert found is not None
        assert found.margin > 0

    @pytest.mark.parametrize("seed", [0, 1])
    @pytest.mark.parametrize("s", [2, 3])
    @pytest.mark.parametrize("factor", [0.5, 0.9, 1.1, 2.0])
    def test_agrees_with_support_enumeration(self, seed, s, factor):
        # one-dimensional kernel and a huge gamma: violations live on the kernel line
        M = np.random.default_rng(seed).standard_normal((11, 12))
        A = MeasurementOperator.dense(M)
        k = kernel_basis(A)[:, 0]
        threshold, support = _kernel_threshold(k, s)
        rho, gamma = factor * threshold, 1e6
        found = rnsp_falsify(A, s, rho, gamma, budget=100, iterations=100, seed=seed)
        if factor < 1:
            assert found is not None
            assert found.support.tolist() == support.tolist()
            x = found.x
            rest = np.ones(12, dtype=bool)
            rest[found.support] = False
            lhs = np.linalg.norm(x[found.support])
            rhs = rho / math.sqrt(s) * np.abs(x[rest]).sum() + gamma * np.linalg.norm(M @ x)
            assert lhs > rhs
        else:
            assert found is None

    def test_injective_operator_with_large_gamma_has_no_witness(self):
        M = np.random.default_rng(5).standard_normal((12, 12))
        gamma = 1.01 / np.linalg.svd(M, compute_uv=False)[-1]
        assert rnsp_falsify(MeasurementOperator.dense(M), 2, 0.1, gamma, budget=100, iterations=100) is None

    def test_bad_order(self, full_walsh):
        with pytest.raises(ArgumentError):
            rnsp_falsify(full_walsh, 0, 0.5, 1.0)


class TestKernelProximity:

    def test_kernel_direction_has_zero_ratio(self, small_fourier):
        z = kernel_basis(small_fourier)[:, 0]
        x = np.zeros(8, dtype=complex)
        result = kernel_proximity(small_fourier, x, x + z)
        assert result.signal_gap == pytest.approx(1.0)
        assert result.measurement_gap <= 1e-12
        assert result.ratio <= 1e-12

    def test_equal_signals(self, small_fourier):
        x = np.ones(8)
        assert kernel_proximity(small_fourier, x, x).ratio == 0.0

    def test_shape_checked(self, small_fourier):
        with pytest.raises(SizeError):
            kernel_proximity(small_fourier, np.zeros(4), np.zeros(4))

    def test_isometry_has_unit_ratio(self, full_walsh, rng):
        x = rng.standard_normal(8)
        assert kernel_proximity(full_walsh, np.zeros(8), x).ratio == pytest.approx(1.0)
