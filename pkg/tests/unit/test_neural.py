"""
Tests for networks: exact constructions, gradients, training and file format.
"""

import numpy as np
import pytest

from kawlab.common.errors import ArgumentError, SizeError
from kawlab.common.models import TrainConfig
from kawlab.core.instability import ReconstructionMap
from kawlab.core.neural import (
    Network,
    NetworkReconstructor,
    build_mlp,
    build_unet,
    corrected_decoder_matrix,
    corrected_decoder_network,
    decode_network,
    encode_network,
    gradient_check,
    identity_relu_gadget,
    interpolatory_network,
    load_network,
    multi_mask_pairs,
    piecewise_poly_signals,
    pinv_decoder_network,
    plateau_network,
    save_network,
    summary,
    train,
    train_multi_mask,
    train_regularized,
    training_error,
)


def _pairs(A, rng, count=3):
    xs = [rng.standard_normal(A.n) + 1j * rng.standard_normal(A.n) for _ in range(count)]
    return [(A.apply(x), x) for x in xs]


class TestConstructions:

    def test_identity_gadget(self, rng):
        net = Network(identity_relu_gadget(3), 3)
        x = rng.standard_normal(3)
        assert np.allclose(net.forward(x), x)

    def test_gadget_dimension(self):
        with pytest.raises(ArgumentError):
            identity_relu_gadget(0)

    @pytest.mark.parametrize("depth", [2, 4])
    def test_pinv_decoder_network(self, small_fourier, rng, depth):
        R = NetworkReconstructor(pinv_decoder_network(small_fourier, depth=depth))
        y = rng.standard_normal(small_fourier.m) + 1j * rng.standard_normal(small_fourier.m)
        assert np.allclose(R(y), small_fourier.pinv_apply(y), atol=1e-12)

    def test_pinv_decoder_width(self, small_fourier):
        with pytest.raises(ArgumentError):
            pinv_decoder_network(small_fourier, width=3)

    def test_corrected_decoder_matrix(self, small_fourier, rng):
        y_hat = rng.standard_normal(small_fourier.m) + 0j
        target = rng.standard_normal(8) + 0j
        C = corrected_decoder_matrix(small_fourier, 1, y_hat, target)
        assert np.allclose(C @ y_hat, target)
        y = rng.standard_normal(small_fourier.m) + 0j
        y[1] = 0
        assert np.allclose(C @ y, small_fourier.pinv_apply(y))

    def test_corrected_decoder_network(self, small_fourier, rng):
        y_hat = rng.standard_normal(small_fourier.m) + 1j * rng.standard_normal(small_fourier.m)
        target = rng.standard_normal(8) + 0j
        R = NetworkReconstructor(corrected_decoder_network(small_fourier, 0, y_hat, target))
        assert np.allclose(R(y_hat), target, atol=1e-10)
        y = np.zeros(small_fourier.m, dtype=complex)
        y[2] = 1.0
        assert np.allclose(R(y), small_fourier.pinv_apply(y), atol=1e-10)

    def test_interpolatory_network_hits_pairs(self, small_fourier, rng):
        pairs = _pairs(small_fourier, rng, 4)
        R = NetworkReconstructor(interpolatory_network(pairs))
        for y, x in pairs:
            assert np.allclose(R(y), x, atol=1e-8)

    def test_interpolatory_width_is_twice_the_pairs(self, small_fourier, rng):
        pairs = _pairs(small_fourier, rng, 5)
        net = interpolatory_network(pairs, seed=2)
        assert net.layers[0].params["W"].shape == (10, 2 * small_fourier.m)
        assert net.layers[-1].params["W"].shape == (16, 10)
        R = NetworkReconstructor(net)
        for y, x in pairs:
            assert np.allclose(R(y), x, atol=1e-8)

    def test_conflicting_pairs_rejected(self, small_fourier):
        y = np.ones(small_fourier.m)
        with pytest.raises(ArgumentError):
            interpolatory_network([(y, np.zeros(8)), (y, np.ones(8))])

    def test_plateau_network_is_flat_near_inputs(self, small_fourier, rng):
        pairs = _pairs(small_fourier, rng, 3)
        R = NetworkReconstructor(plateau_network(pairs, seed=1))
        for y, x in pairs:
            assert np.allclose(R(y), x, atol=1e-10)
            nudge = 1e-7 * (rng.standard_normal(small_fourier.m) + 1j * rng.standard_normal(small_fourier.m))
            assert np.allclose(R(y + nudge), x, atol=1e-10)

    def test_plateau_single_pair_is_constant(self, small_fourier, rng):
        (y, x), = _pairs(small_fourier, rng, 1)
        R = NetworkReconstructor(plateau_network([(y, x)]))
        assert np.allclose(R(np.zeros(small_fourier.m)), x)

    def test_plateau_margin_range(self, small_fourier, rng):
        with pytest.raises(ArgumentError):
            plateau_network(_pairs(small_fourier, rng), margin=0.5)


class TestGradients:

    def test_mlp_gradient_check(self, rng):
        net = build_mlp(4, [6], 2, seed=3)
        Y, X = rng.standard_normal((5, 4)), rng.standard_normal((5, 2))
        assert gradient_check(net, Y, X) <= 1e-4

    def test_reconstructor_vjp(self, small_fourier, rng):
        R = ReconstructionMap.from_network(NetworkReconstructor(pinv_decoder_network(small_fourier)))
        y = rng.standard_normal(small_fourier.m) + 1j * rng.standard_normal(small_fourier.m)
        assert R.check_gradient(y) <= 1e-5

    def test_unet_shapes(self, small_fourier, rng):
        net = build_unet(small_fourier, channels=(2, 2, 2))
        assert net.n_in == 2 * small_fourier.m
        assert net.n_out == 16
        assert net.forward(rng.standard_normal((3, net.n_in))).shape == (3, 16)
        assert "frozen" in summary(net)

    def test_unet_needs_n_divisible_by_four(self):
        from kawlab.core.operators import MeasurementOperator
        with pytest.raises(SizeError):
            build_unet(MeasurementOperator.structured("fourier", 2, [0]))


class TestTraining:

    @pytest.fixture
    def dataset(self, rng):
        return rng.standard_normal((6, 4)), rng.standard_normal((6, 2))

    def test_zero_lambda_matches_plain_training(self, dataset):
        Y, X = dataset
        net = build_mlp(4, [8], 2, seed=0)
        cfg = TrainConfig(epochs=20)
        plain = train(net, Y, X, cfg)
        regularized = train_regularized(net, Y, X, 0.0, "weight_norm", cfg)
        assert plain.losses == regularized.losses

    def test_caller_network_untouched(self, dataset):
        Y, X = dataset
        net = build_mlp(4, [8], 2, seed=0)
        before = net.forward(Y)
        train(net, Y, X, TrainConfig(epochs=5))
        assert np.array_equal(net.forward(Y), before)

    def test_training_reduces_loss(self, dataset):
        Y, X = dataset
        result = train(build_mlp(4, [16], 2, seed=0), Y, X, TrainConfig(epochs=200))
        assert result.losses[-1] < result.losses[0]
        assert result.delta == pytest.approx(training_error(result.net, Y, X))
        assert result.loss_csv().startswith("epoch,loss\n1,")

    def test_negative_lambda(self, dataset):
        with pytest.raises(ArgumentError):
            train_regularized(build_mlp(4, [8], 2), *dataset, -1.0)

    def test_mismatched_set(self):
        with pytest.raises(SizeError):
            train(build_mlp(4, [8], 2), np.zeros((3, 4)), np.zeros((2, 2)))

    def test_multi_mask_pairs(self, small_fourier, full_walsh):
        from kawlab.core.operators import MeasurementOperator
        other = MeasurementOperator.structured("fourier", 8, [0, 1, 2])
        images = np.ones((3, 8))
        Y, X = multi_mask_pairs(images, [small_fourier, other])
        assert Y.shape == (6, 16)
        assert X.shape == (6, 16)

    def test_multi_mask_training(self, small_fourier):
        from kawlab.core.operators import MeasurementOperator
        full = MeasurementOperator.structured("fourier", 8, np.arange(8))
        other = MeasurementOperator.structured("fourier", 8, [0, 1, 2])
        images = piecewise_poly_signals(2, 8, seed=0).astype(complex)
        net = build_unet(full, channels=(2, 2, 2), seed=0)
        result = train_multi_mask(net, images, [small_fourier, other], TrainConfig(epochs=30))
        assert len(result.losses) == 30
        assert result.losses[-1] <= result.losses[0]

    def test_multi_mask_needs_masks(self):
        with pytest.raises(ArgumentError):
            multi_mask_pairs(np.ones((1, 8)), [])


class TestData:

    def test_signals_are_seeded(self):
        a = piecewise_poly_signals(3, 16, seed=4)
        assert a.shape == (3, 16)
        assert np.array_equal(a, piecewise_poly_signals(3, 16, seed=4))

    def test_bad_sizes(self):
        with pytest.raises(ArgumentError):
            piecewise_poly_signals(0, 16)


class TestSerialization:

    def test_encode_decode(self, small_fourier, rng):
        net = build_unet(small_fourier, channels=(2, 2, 2), seed=2)
        restored = decode_network(encode_network(net))
        Y = rng.standard_normal((2, net.n_in))
        assert np.array_equal(restored.forward(Y), net.forward(Y))

    def test_save_and_load(self, tmp_path, rng):
        net = build_mlp(4, [5], 2, seed=1)
        path = tmp_path / "net.bin"
        save_network(net, path)
        x = rng.standard_normal(4)
        assert np.array_equal(load_network(path).forward(x), net.forward(x))
