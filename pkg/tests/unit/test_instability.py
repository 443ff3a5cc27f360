"""
Tests for instability probes: witnesses, attacks, Monte Carlo and tumours.
"""

import math

import numpy as np
import pytest

from kawlab.common.errors import ArgumentError, SizeError
from kawlab.core.instability import (
    ProbeReport,
    _estimate,
    ReconstructionMap,
    adversarial_search,
    ball_certificate,
    consistency_residual,
    destabilizing_pair,
    empirical_lipschitz,
    falsewitness,
    lipschitz_lower_bound,
    mc_instability_probability,
    nullspace_perp_noise,
    overperformance_domain,
    tumor_signal,
    wilson_interval,
)
from kawlab.core.operators import LevelStructure, MeasurementOperator, kernel_basis, kernel_projectors


@pytest.fixture
def low_pass():
    """Fourier operator on N = 16 keeping the six lowest frequencies."""
    return MeasurementOperator.structured("fourier", 16, np.arange(6))


@pytest.fixture
def cokernel_signal(small_fourier, rng):
    y = rng.standard_normal(small_fourier.m) + 1j * rng.standard_normal(small_fourier.m)
    return small_fourier.pinv_apply(y)


class TestLipschitzFormula:

    def test_value(self):
        assert lipschitz_lower_bound(1.0, 0.1, 0.1) == pytest.approx(8.0)

    def test_vacuous_values_pass_through(self):
        assert lipschitz_lower_bound(0.1, 0.1, 0.5) < 0

    def test_eta_must_be_positive(self):
        with pytest.raises(ArgumentError):
            lipschitz_lower_bound(1.0, 0.0, 0.1)

    def test_eps_below_eta(self):
        with pytest.raises(ArgumentError):
            lipschitz_lower_bound(1.0, 0.2, 0.1)


class TestFalseWitness:

    def test_kernel_detail_fools_pinv(self, small_fourier, cokernel_signal):
        z = kernel_basis(small_fourier)[:, 0]
        w = falsewitness(cokernel_signal, cokernel_signal + z, small_fourier,
                         ReconstructionMap.pinv(small_fourier), eta=1e-6)
        assert w.d1 == pytest.approx(1.0)
        assert w.d2 <= 1e-12
        assert w.hypothesis_holds
        assert w.false_positive is False
        assert w.false_negative is True

    def test_without_map_only_measures(self, small_fourier, rng):
        x = rng.standard_normal(8)
        w = falsewitness(x, x + 1.0, small_fourier)
        assert w.false_positive is None
        assert not w.hypothesis_holds

    def test_shape_checked(self, small_fourier):
        with pytest.raises(SizeError):
            falsewitness(np.zeros(4), np.zeros(4), small_fourier)


class TestEmpiricalLipschitz:

    def test_pinv_of_isometry_is_one_lipschitz(self, full_walsh, rng):
        y = rng.standard_normal(8) + 1j * rng.standard_normal(8)
        est = empirical_lipschitz(ReconstructionMap.pinv(full_walsh), y, 1e-2, trials=20)
        assert est.value == pytest.approx(1.0, rel=1e-8)
        assert np.linalg.norm(est.perturbation) <= 1e-2 * (1 + 1e-12)

    def test_samples_radii_inside_the_ball(self):
        # identity inside radius 1/2, saturating outside: the sphere alone sees 1/2
        def clip(y):
            nrm = np.linalg.norm(y)
            return y if nrm <= 0.5 else 0.5 * y / nrm

        R = ReconstructionMap(clip, 4, 4, None, "clip")
        est = empirical_lipschitz(R, np.zeros(4), 1.0, trials=100, seed=3)
        assert est.value == pytest.approx(1.0, rel=1e-12)
        assert np.linalg.norm(est.perturbation) <= 0.5

    def test_gradient_check_on_linear_map(self, rng):
        M = rng.standard_normal((4, 3)) + 1j * rng.standard_normal((4, 3))
        R = ReconstructionMap.from_linear(M)
        assert R.check_gradient(np.ones(3)) <= 1e-6

    def test_bad_eps(self, full_walsh):
        with pytest.raises(ArgumentError):
            empirical_lipschitz(ReconstructionMap.pinv(full_walsh), np.zeros(8), 0.0)


class TestBallsAndNoise:

    def test_ball_radius_scales_with_sigma_min(self, small_fourier, cokernel_signal):
        cert = ball_certificate(small_fourier, cokernel_signal, cokernel_signal, r1=0.1, eta=0.01)
        assert cert.r2 == pytest.approx(small_fourier.sigma_min() * 0.1)
        assert cert.bound is None
        assert not cert.existence_only

    def test_ball_needs_cokernel_center(self, small_fourier):
        x = kernel_basis(small_fourier)[:, 0]
        with pytest.raises(ArgumentError):
            ball_certificate(small_fourier, x, x, r1=0.1, eta=0.01)

    def test_nullspace_perp_noise(self, small_fourier):
        v = nullspace_perp_noise(small_fourier, 0.3, seed=5)
        assert np.linalg.norm(v) == pytest.approx(0.3)
        assert np.linalg.norm(kernel_projectors(small_fourier).project_kernel(v)) <= 1e-12

    def test_noise_needs_fourier(self, full_walsh):
        with pytest.raises(ArgumentError):
            nullspace_perp_noise(full_walsh, 1.0)


class TestAdversarialSearch:

    def test_pgd_stays_in_ball(self, small_fourier, cokernel_signal):
        R = ReconstructionMap.pinv(small_fourier)
        result = adversarial_search(R, small_fourier, cokernel_signal, 0.05, steps=20, space="measurement")
        assert result.method == "pgd"
        assert np.linalg.norm(result.perturbation) <= 0.05
        assert result.history == sorted(result.history)
        assert result.objective > 0

    def test_spsa_on_gradient_free_map(self, full_walsh, rng):
        R = ReconstructionMap(full_walsh.pinv_apply, 8, 8, name="blackbox")
        x = rng.standard_normal(8) + 0j
        result = adversarial_search(R, full_walsh, x, 0.1, steps=10, space="signal")
        assert result.method == "spsa"
        assert np.linalg.norm(result.perturbation) <= 0.1

    def test_pgd_needs_gradient(self, full_walsh):
        R = ReconstructionMap(full_walsh.pinv_apply, 8, 8)
        with pytest.raises(ArgumentError):
            adversarial_search(R, full_walsh, np.zeros(8), 0.1, method="pgd")

    def test_bad_space(self, full_walsh):
        with pytest.raises(ArgumentError):
            adversarial_search(ReconstructionMap.pinv(full_walsh), full_walsh, np.zeros(8), 0.1, space="image")


class TestMonteCarlo:

    def test_wilson_interval_contains_estimate(self):
        low, high = wilson_interval(50, 100)
        assert low < 0.5 < high
        assert 0.5 - low == pytest.approx(high - 0.5)

    def test_wilson_interval_at_zero(self):
        low, high = wilson_interval(0, 10)
        assert low == 0.0
        assert 0 < high < 0.5

    def test_wilson_bad_counts(self):
        with pytest.raises(ArgumentError):
            wilson_interval(11, 10)

    def test_too_few_trials(self, small_fourier, cokernel_signal):
        with pytest.raises(ArgumentError):
            mc_instability_probability(ReconstructionMap.pinv(small_fourier), small_fourier,
                                       cokernel_signal, np.zeros(8), 0.1, 0.01, trials=50)

    def test_seeded_runs_agree(self, small_fourier, cokernel_signal):
        R = ReconstructionMap.pinv(small_fourier)
        z = 0.5 * kernel_basis(small_fourier)[:, 0] + 0.1 * cokernel_signal
        a = mc_instability_probability(R, small_fourier, cokernel_signal, z, 0.05, 0.01, trials=100, seed=9)
        b = mc_instability_probability(R, small_fourier, cokernel_signal, z, 0.05, 0.01, trials=100, seed=9)
        assert a.estimates().keys() == b.estimates().keys()
        for key, est in a.estimates().items():
            assert est.successes == b.estimates()[key].successes
            assert est.trials == 100
            assert est.low <= est.p <= est.high


class TestTumour:

    def test_hidden_tumour_is_invisible(self, low_pass):
        t = tumor_signal(low_pass, width=4, center=3, norm=0.4)
        assert np.linalg.norm(t.z) == pytest.approx(0.4)
        assert t.measurement_norm <= 1e-12
        assert not set(t.band.tolist()) & set(range(6))

    def test_leakage_makes_it_visible(self):
        A = MeasurementOperator.structured("fourier", 16, np.arange(14))
        t = tumor_signal(A, width=4, center=3, norm=0.4, leakage=1e-3)
        assert 0 < t.measurement_norm < 0.4

    def test_needs_fourier(self, full_walsh):
        with pytest.raises(ArgumentError):
            tumor_signal(full_walsh, width=2)


class TestConstructions:

    def test_overperformance_domain(self):
        levels = LevelStructure.dyadic(4, [0, 1, 1, 1])
        base = [np.zeros(8), np.ones(8)]
        result = overperformance_domain(levels, 0, 4.0, base)
        assert len(result.domain) == 4
        assert result.kappa == pytest.approx(0.0625)
        assert np.linalg.norm(result.z1) == pytest.approx(1.0)
        assert result.predicted_network_lipschitz(0.5) == pytest.approx(2.0)

    def test_overperformance_needs_vanishing_level(self):
        with pytest.raises(ArgumentError):
            overperformance_domain(LevelStructure.dyadic(3, [1, 1, 1]), 0, 4.0, [np.ones(4)])

    def test_destabilizing_pair(self, small_fourier, rng):
        xs = [rng.standard_normal(8) + 0j for _ in range(2)]
        pair = destabilizing_pair(small_fourier, xs, 0.1, seed=2)
        assert np.linalg.norm(pair.z1) == pytest.approx(0.1)
        assert np.linalg.norm(pair.z2) == pytest.approx(0.025)
        assert np.linalg.norm(small_fourier.apply(pair.z1)) <= 0.1 ** 2 / 2 + 1e-10
        assert pair.beta == pytest.approx(0.01 / (2 * small_fourier.norm()))

    def test_destabilizing_pair_gamma_range(self, small_fourier):
        with pytest.raises(ArgumentError):
            destabilizing_pair(small_fourier, [np.zeros(8)], 1.5)

    def test_pinv_is_consistent(self, small_fourier, rng):
        X = [rng.standard_normal(8) for _ in range(3)]
        assert consistency_residual(ReconstructionMap.pinv(small_fourier), small_fourier, X) <= 1e-12


class TestProbeReport:

    def test_round_trip_verifies_checks(self, tmp_path, small_fourier, cokernel_signal):
        z = kernel_basis(small_fourier)[:, 0]
        w = falsewitness(cokernel_signal, cokernel_signal + z, small_fourier,
                         ReconstructionMap.pinv(small_fourier), eta=1e-6)
        report = ProbeReport().add_lipschitz_formula(1.0, 0.1, 0.2).add_witness(w)
        path = tmp_path / "probe.report"
        report.save(path)
        loaded = ProbeReport.load(path)
        assert loaded.get_float("lipschitz_lower") == pytest.approx(4.5)
        assert {c.name for c in loaded.checks} >= {"lipschitz_formula", "witness_z_norm", "false_negative"}

    def test_estimate_checks(self):
        report = ProbeReport().add_estimate("p_test", _estimate(30, 100))
        assert report.get_float("p_test") == pytest.approx(0.3)
        assert math.isclose(report.get_float("p_test_trials"), 100)
