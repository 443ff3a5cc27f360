"""
Tests for optimality constants, fiber partitions and the demo constructions.
"""

import numpy as np
import pytest

from kawlab.common.errors import ArgumentError, SizeError
from kawlab.common.models import TrainConfig
from kawlab.core.operators import kernel_basis
from kawlab.core.optimal_maps import (
    FiberPartition,
    demo_not_optimal,
    destabilize_demo,
    dl_vs_cs_demo,
    empirical_minimizer_network,
    half_band_budgets,
    hausdorff,
    lambda_sensitivity_demo,
    optimality_constant,
)


class TestHausdorff:

    def test_points(self):
        assert hausdorff([np.zeros(2)], [np.array([3.0, 4.0])]) == pytest.approx(5.0)

    def test_subset_is_one_sided(self):
        X = [np.zeros(1), np.ones(1)]
        assert hausdorff(X, X[:1]) == pytest.approx(1.0)
        assert hausdorff(X, X) == 0.0

    def test_empty_set(self):
        with pytest.raises(ArgumentError):
            hausdorff([], [np.zeros(1)])


class TestFiberPartition:

    def test_groups_by_distance(self):
        Y = [[0.0], [1e-12], [1.0]]
        partition = FiberPartition.from_points(Y, tau=1e-9)
        assert partition.groups == [[0, 1], [2]]
        assert partition.lookup(np.array([1.0])) == 1
        assert partition.lookup(np.array([0.5])) is None

    def test_chained_fibers_rejected(self):
        with pytest.raises(ArgumentError):
            FiberPartition.from_points([[0.0], [0.6], [1.2]], tau=1.0)


class TestOptimalityConstant:

    @pytest.fixture
    def pair_domain(self, small_fourier, rng):
        x = small_fourier.pinv_apply(rng.standard_normal(small_fourier.m) + 0j)
        z = 0.8 * kernel_basis(small_fourier)[:, 0]
        return [x, x + z], z

    def test_ambient_pair_is_half_the_gap(self, small_fourier, pair_domain):
        domain, z = pair_domain
        result = optimality_constant(small_fourier, domain)
        assert len(result.partition) == 1
        assert result.c_opt == pytest.approx(np.linalg.norm(z) / 2, rel=1e-6)
        assert result.sup_error(domain) <= result.c_opt * (1 + 1e-6)

    def test_restricted_pair_is_the_gap(self, small_fourier, pair_domain):
        domain, z = pair_domain
        result = optimality_constant(small_fourier, domain, codomain="restricted")
        assert result.c_opt == pytest.approx(np.linalg.norm(z))

    def test_separated_domain_is_exact(self, full_walsh, rng):
        domain = [rng.standard_normal(8) for _ in range(3)]
        result = optimality_constant(full_walsh, domain)
        assert result.c_opt <= 1e-12
        assert np.allclose(result.witness(full_walsh.apply(domain[1])), domain[1])
        assert len(result.witness_rows()) == 3

    def test_unknown_codomain(self, full_walsh):
        with pytest.raises(ArgumentError):
            optimality_constant(full_walsh, [np.zeros(8)], codomain="sparse")

    def test_domain_cap(self, full_walsh):
        with pytest.raises(SizeError):
            optimality_constant(full_walsh, [np.zeros(8)] * 5, cap=4)

    def test_empirical_minimizer_averages_shared_fibers(self, small_fourier, pair_domain):
        domain, z = pair_domain
        R = empirical_minimizer_network(small_fourier, domain)
        expected = domain[0] + z / 2
        assert np.allclose(R(small_fourier.apply(domain[0])), expected, atol=1e-8)


class TestDemos:

    def test_not_optimal(self, small_fourier):
        report = demo_not_optimal(small_fourier, K=3, seed=2)
        assert report.get_float("c_opt") == pytest.approx(0.25)
        assert report.failed_checks() == []

    def test_not_optimal_trained(self, small_fourier):
        report = demo_not_optimal(small_fourier, K=3, seed=2, train_cfg=TrainConfig(epochs=60), hidden=(16,))
        assert report.failed_checks() == []
        assert report.get_float("trained_epochs") >= 1
        assert report.get_float("trained_sup_error") >= report.get_float("c_opt") - 1e-9
        assert report.get_float("trained_sup_error") >= 0.5 - report.get_float("trained_fit") - 1e-9

    def test_not_optimal_delta_range(self, small_fourier):
        with pytest.raises(ArgumentError):
            demo_not_optimal(small_fourier, delta=0.3)

    @pytest.mark.parametrize("kind", ["fourier", "walsh"])
    def test_lambda_sensitivity(self, kind):
        report = lambda_sensitivity_demo(kind=kind, N=8, K=3, seed=1)
        assert report.failed_checks() == []

    def test_half_band_budgets(self):
        assert half_band_budgets(4) == (1, 1, 1, 2)

    def test_destabilize(self):
        report = destabilize_demo(r=4, gamma=0.1, K=3, seed=0, trials=8)
        assert report.failed_checks() == []
        assert report.get_float("lipschitz_after") >= 9.0

    def test_destabilize_trained(self):
        report = destabilize_demo(r=4, gamma=0.1, K=3, seed=0, trials=8,
                                  train_cfg=TrainConfig(epochs=80), hidden=(16,))
        assert report.failed_checks() == []
        assert report.get_float("inverse_gamma") == pytest.approx(10.0)
        fits = report.get_float("trained_fit_x1") + report.get_float("trained_fit_added")
        floor = (report.get_float("z1_norm") - fits) / report.get_float("az1_norm")
        assert report.get_float("trained_lipschitz") >= floor - 1e-6
        # the constructive minimizer is reported next to the trained one
        assert report.get_float("lipschitz_after") >= 9.0

    @pytest.mark.slow
    def test_dl_vs_cs(self):
        report = dl_vs_cs_demo(r=6, k=0, s=[0, 1, 1, 1, 1, 1], C=2.0, seed=0, trials=4)
        assert report.failed_checks() == []
        # M1 plus 0 and z, each measured once
        assert report.get_float("measurement_set_size") == 8

    @pytest.mark.slow
    def test_dl_vs_cs_trained(self):
        report = dl_vs_cs_demo(r=6, k=0, s=[0, 1, 1, 1, 1, 1], C=2.0, seed=0, trials=4,
                               train_cfg=TrainConfig(epochs=100), hidden=(32,))
        assert report.failed_checks() == []
        floor = (report.get_float("z_norm") - 2 * report.get_float("trained_fit")) / report.get_float("az_norm")
        assert report.get_float("trained_lipschitz") >= floor - 1e-9
        assert report.get_float("net_lipschitz") >= 0.95 * 4.0
