"""
Tests for the transform kernels and small dense linear algebra.
"""

import itertools

import numpy as np
import pytest

from kawlab.common.errors import SizeError
from kawlab.core.tensor_linalg import (
    INVERSE,
    TRANSFORMS,
    dft,
    fwht_sequency,
    haar_dwt,
    min_enclosing_ball,
    naive_dft_matrix,
    realify_matrix,
    stack_complex,
    svd_small,
    transform_matrix,
    unstack_complex,
)


class TestTransforms:

    def test_dft_delta_maps_to_constant(self):
        out = dft([1, 0, 0, 0])
        assert np.allclose(out, 0.5, atol=1e-15)

    def test_dft_constant_maps_to_scaled_delta(self):
        out = dft([1, 1, 1, 1])
        assert np.allclose(out, [2, 0, 0, 0], atol=1e-15)

    def test_fwht_rows_in_sequency_order(self):
        assert np.allclose(fwht_sequency([1, 0, 0, 0]), 0.5, atol=1e-15)
        assert np.allclose(fwht_sequency([1, -1, 1, -1]), [0, 0, 0, 2], atol=1e-15)

    def test_haar_constant_has_only_scaling_coefficient(self):
        assert np.allclose(haar_dwt([1, 1, 1, 1]), [2, 0, 0, 0], atol=1e-15)

    @pytest.mark.parametrize("kind", sorted(TRANSFORMS))
    def test_roundtrip_and_norm(self, kind, rng):
        fn = TRANSFORMS[kind]
        for n in (2, 16, 1024):
            x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
            fx = fn(x)
            assert np.max(np.abs(fn(fx, INVERSE) - x)) <= 1e-12
            assert abs(np.linalg.norm(fx) - np.linalg.norm(x)) <= 1e-12 * np.linalg.norm(x)

    def test_batched_input_transforms_last_axis(self, rng):
        x = rng.standard_normal((3, 8)) + 0j
        batched = dft(x)
        for row, out in zip(x, batched):
            assert np.allclose(dft(row), out, atol=1e-14)

    def test_dft_matches_naive_matrix(self):
        for n in (2, 8, 64):
            assert np.max(np.abs(transform_matrix("fourier", n) - naive_dft_matrix(n))) <= 1e-10

    def test_non_power_of_two_is_size_error(self):
        with pytest.raises(SizeError):
            dft(np.ones(6))
        with pytest.raises(SizeError):
            haar_dwt(np.ones(3))


class TestRealification:

    def test_stack_and_unstack(self):
        z = np.array([1 + 2j, -3 + 0.5j])
        v = stack_complex(z)
        assert np.allclose(v, [1, -3, 2, 0.5])
        assert np.allclose(unstack_complex(v), z)

    def test_realified_matrix_acts_like_complex_matrix(self, rng):
        M = rng.standard_normal((3, 4)) + 1j * rng.standard_normal((3, 4))
        x = rng.standard_normal(4) + 1j * rng.standard_normal(4)
        assert np.allclose(realify_matrix(M) @ stack_complex(x), stack_complex(M @ x), atol=1e-13)


def _smallest_support_ball(points):
    """Smallest circumscribed ball over every support subset that contains all points."""
    real = np.array([np.concatenate([p.real, p.imag]) for p in points])
    best = None
    for size in range(2, len(real) + 1):
        for subset in itertools.combinations(range(len(real)), size):
            base = real[subset[0]]
            V = real[list(subset[1:])] - base
            G = V @ V.T
            lam = np.linalg.solve(2 * G, np.diag(G))
            center = base + lam @ V
            radius = np.linalg.norm(center - base)
            if np.all(np.linalg.norm(real - center, axis=1) <= radius * (1 + 1e-9)):
                if best is None or radius < best[1]:
                    best = (center, radius)
    return best


class TestMinEnclosingBall:

    def test_two_points_closed_form(self):
        ball = min_enclosing_ball([np.array([0, 0j]), np.array([2, 0j])])
        assert np.allclose(ball.center, [1, 0])
        assert ball.radius == pytest.approx(1.0)

    def test_contains_every_point(self, rng):
        pts = [rng.standard_normal(5) + 1j * rng.standard_normal(5) for _ in range(12)]
        ball = min_enclosing_ball(pts)
        assert max(np.linalg.norm(p - ball.center) for p in pts) <= ball.radius + 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_support_enumeration(self, seed):
        rng = np.random.default_rng(seed)
        pts = [rng.standard_normal(3) + 1j * rng.standard_normal(3) for _ in range(5)]
        center, radius = _smallest_support_ball(pts)
        ball = min_enclosing_ball(pts)
        assert ball.radius == pytest.approx(radius, rel=1e-6)
        assert np.allclose(np.concatenate([ball.center.real, ball.center.imag]), center, atol=1e-3)

    def test_equilateral_triangle(self):
        pts = [np.array([np.exp(2j * np.pi * k / 3)]) for k in range(3)]
        ball = min_enclosing_ball(pts)
        assert ball.radius == pytest.approx(1.0, rel=1e-6)
        assert abs(ball.center[0]) <= 1e-5


class TestSvd:

    def test_singular_values_match_eigenvalues(self, rng):
        M = rng.standard_normal((4, 6)) + 1j * rng.standard_normal((4, 6))
        result = svd_small(M)
        eig = np.sort(np.linalg.eigvalsh(M @ M.conj().T))[::-1]
        assert np.allclose(result.s ** 2, eig)
        assert np.all(np.diff(result.s) <= 0)
        assert np.allclose((result.u * result.s) @ result.vh, M)

    def test_size_cap(self):
        with pytest.raises(SizeError):
            svd_small(np.zeros((257, 1)))
