"""
Feedforward networks over the layer zoo, complex I/O adapters and builders.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from kawlab.common.errors import ArgumentError, SizeError
from kawlab.core.operators import MeasurementOperator
from kawlab.core.tensor_linalg import realify_matrix, stack_complex, unstack_complex

from .layers import (
    Conv1d,
    Dense,
    Layer,
    LeakyReLU,
    MaxPool2,
    ReLU,
    Reshape,
    SkipConcat,
    TransposeConv1d,
)

logger = logging.getLogger(__name__)

Gradients = List[Dict[str, np.ndarray]]


class Network:
    """
    Psi = layer_L o ... o layer_1 acting on real vectors of length ``n_in``.

    Shapes are propagated once at construction, so a mis-chained layer list
    fails here rather than on first use.
    """

    def __init__(self, layers: Sequence[Layer], n_in: int):
        self.layers: List[Layer] = list(layers)
        self.n_in = int(n_in)
        self.shapes = self._propagate_shapes()
        if len(self.shapes[-1]) != 1:
            raise SizeError(f"network output must be a vector, got per-sample shape {self.shapes[-1]}")
        self.n_out = self.shapes[-1][0]

    def _propagate_shapes(self) -> List[Tuple[int, ...]]:
        shapes = [(self.n_in,)]
        for i, layer in enumerate(self.layers):
            if isinstance(layer, SkipConcat):
                if not 0 <= layer.source < i:
                    raise SizeError(f"layer {i} concatenates from layer {layer.source}, which does not precede it")
                shapes.append(layer.concat_shape(shapes[-1], shapes[layer.source + 1]))
            else:
                shapes.append(layer.output_shape(shapes[-1]))
        return shapes

    # evaluation

    def _as_batch(self, y) -> Tuple[np.ndarray, bool]:
        arr = np.asarray(y, dtype=float)
        single = arr.ndim == 1
        arr = arr[None, :] if single else arr
        if arr.ndim != 2 or arr.shape[1] != self.n_in:
            raise SizeError(f"network expects inputs of length {self.n_in}, got shape {np.shape(y)}")
        return arr, single

    def forward_tape(self, y) -> Tuple[np.ndarray, list]:
        """Batch forward pass keeping activations and layer caches."""
        x, _ = self._as_batch(y)
        acts = [x]
        caches = []
        for layer in self.layers:
            if isinstance(layer, SkipConcat):
                out, cache = layer.forward(acts[-1], acts[layer.source + 1])
            else:
                out, cache = layer.forward(acts[-1])
            acts.append(out)
            caches.append(cache)
        return acts[-1], caches

    def forward(self, y) -> np.ndarray:
        arr, single = self._as_batch(y)
        out, _ = self.forward_tape(arr)
        return out[0] if single else out

    __call__ = forward

    def backward(self, caches: list, grad_out: np.ndarray) -> Tuple[np.ndarray, Gradients]:
        """Reverse pass; returns d/d(input) and per-layer parameter gradients."""
        extra: Dict[int, np.ndarray] = {}
        grads: Gradients = [{} for _ in self.layers]
        grad = grad_out
        for i in range(len(self.layers) - 1, -1, -1):
            if i + 1 in extra:
                grad = grad + extra.pop(i + 1)
            layer = self.layers[i]
            grad, pgrads = layer.backward(caches[i], grad)
            if isinstance(layer, SkipConcat):
                key = layer.source + 1
                skip = pgrads.pop("skip")
                extra[key] = extra[key] + skip if key in extra else skip
            grads[i] = pgrads
        return grad, grads

    def gradients(self, Y, X) -> Tuple[float, Gradients]:
        """Loss (1/B) sum_j 1/2 ||x_j - Psi(y_j)||^2 and its parameter gradients."""
        Y, _ = self._as_batch(Y)
        X = np.asarray(X, dtype=float).reshape(Y.shape[0], -1)
        if X.shape[1] != self.n_out:
            raise SizeError(f"targets have length {X.shape[1]}, network outputs {self.n_out}")
        out, caches = self.forward_tape(Y)
        resid = out - X
        loss = 0.5 * float(np.sum(resid ** 2)) / Y.shape[0]
        _, grads = self.backward(caches, resid / Y.shape[0])
        return loss, grads

    def input_vjp(self, y, v) -> np.ndarray:
        """Gradient of <v, Psi(y)> with respect to y."""
        arr, single = self._as_batch(y)
        out, caches = self.forward_tape(arr)
        v = np.asarray(v, dtype=float).reshape(out.shape)
        grad, _ = self.backward(caches, v)
        return grad[0] if single else grad

    # parameters

    def parameters(self) -> List[Tuple[int, str, np.ndarray]]:
        """Trainable (layer index, name, array) triples in a fixed order."""
        return [(i, name, arr) for i, layer in enumerate(self.layers) if layer.trainable
                for name, arr in layer.params.items()]

    @property
    def n_params(self) -> int:
        return int(sum(arr.size for _, _, arr in self.parameters()))

    def copy(self) -> "Network":
        return Network([layer.copy() for layer in self.layers], self.n_in)

    def __repr__(self):
        return f"Network(n_in={self.n_in}, n_out={self.n_out}, layers={len(self.layers)})"


class NetworkReconstructor:
    """
    A network viewed as a map C^m -> C^n through [re, im] stacking.

    With ``zero_fill`` set, measurements are first placed at the sampled
    positions of a length-N vector (unsampled entries zero).
    """

    def __init__(self, net: Network, zero_fill: Optional[MeasurementOperator] = None, name: str = "network"):
        self.net = net
        self.zero_fill = zero_fill
        self.name = name
        if net.n_out % 2:
            raise SizeError("complex reconstruction needs an even output length")
        self.n = net.n_out // 2
        self.m = zero_fill.m if zero_fill is not None else net.n_in // 2

    def _input(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        if y.shape[-1] != self.m:
            raise SizeError(f"reconstructor expects {self.m} measurements, got {y.shape[-1]}")
        if self.zero_fill is not None:
            y = zero_filled(self.zero_fill, y)
        return stack_complex(y)

    def __call__(self, y) -> np.ndarray:
        return unstack_complex(self.net.forward(self._input(y)))

    def vjp(self, y, v) -> np.ndarray:
        """Complex gradient of Re<v, Psi(y)> with respect to y."""
        g = self.net.input_vjp(self._input(y), stack_complex(np.asarray(v, dtype=complex)))
        g = unstack_complex(g)
        if self.zero_fill is not None:
            g = g[..., self.zero_fill.rows]
        return g


def zero_filled(A: MeasurementOperator, y) -> np.ndarray:
    """Length-N vector carrying y at A's sampled transform positions, zero elsewhere."""
    if not A.is_structured:
        raise ArgumentError("zero filling needs a subsampled transform operator")
    y = np.asarray(y, dtype=complex)
    full = np.zeros(y.shape[:-1] + (A.n,), dtype=complex)
    full[..., A.rows] = y
    return full


def complex_training_pairs(A: MeasurementOperator, signals: Sequence, zero_fill: bool = False,
                           measure: Optional[Callable] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Stacked (Y, X) arrays for training on y = A x."""
    X = np.asarray(signals, dtype=complex)
    Y = A.apply(X) if measure is None else measure(X)
    if zero_fill:
        Y = zero_filled(A, Y)
    return stack_complex(Y), stack_complex(X)


def build_mlp(n_in: int, widths: Sequence[int], n_out: int, seed: int = 0, activation: str = "relu") -> Network:
    rng = np.random.default_rng(seed)
    layers: List[Layer] = []
    prev = n_in
    for width in widths:
        layers.append(Dense.init(prev, width, rng))
        layers.append(ReLU() if activation == "relu" else LeakyReLU(0.2))
        prev = width
    layers.append(Dense.init(prev, n_out, rng))
    return Network(layers, n_in)


def _front_end(A: MeasurementOperator, front: str) -> np.ndarray:
    eye = np.eye(A.m, dtype=complex)
    if front == "pinv":
        mat = A.pinv_apply(eye).T
    elif front == "adjoint":
        mat = A.adjoint(eye).T
    else:
        raise ArgumentError(f"front end must be 'pinv' or 'adjoint', got {front!r}")
    return realify_matrix(mat)


def build_unet(A: MeasurementOperator, channels: Sequence[int] = (4, 8, 16), seed: int = 0,
               front: str = "adjoint", alpha: float = 0.2) -> Network:
    """
    Reduced three-scale U-net f(y) = phi(A* y).

    A frozen dense layer maps stacked y to the stacked image A* y (or A^+ y),
    which is reshaped to (2, N) re/im channels before the encoder. The decoder
    mirrors it with transpose convolutions and skip concatenations; the image
    channels are concatenated once more ahead of the final 1x1 convolution.
    """
    c0, c1, c2 = channels
    n = A.n
    if n % 4:
        raise SizeError(f"U-net needs N divisible by 4, got {n}")
    rng = np.random.default_rng(seed)
    layers: List[Layer] = []

    def add(layer: Layer) -> int:
        layers.append(layer)
        return len(layers) - 1

    def block(c_in: int, c_out: int) -> int:
        add(Conv1d.init(c_in, c_out, rng))
        add(LeakyReLU(alpha))
        add(Conv1d.init(c_out, c_out, rng))
        return add(LeakyReLU(alpha))

    add(Dense(_front_end(A, front), trainable=False))
    image = add(Reshape((2, n)))
    skip1 = block(2, c0)
    add(MaxPool2())
    skip2 = block(c0, c1)
    add(MaxPool2())
    block(c1, c2)
    add(TransposeConv1d.init(c2, c1, rng))
    add(LeakyReLU(alpha))
    add(SkipConcat(skip2))
    add(Conv1d.init(2 * c1, c1, rng))
    add(LeakyReLU(alpha))
    add(TransposeConv1d.init(c1, c0, rng))
    add(LeakyReLU(alpha))
    add(SkipConcat(skip1))
    add(Conv1d.init(2 * c0, c0, rng))
    add(LeakyReLU(alpha))
    add(SkipConcat(image))
    add(Conv1d.init(c0 + 2, 2, rng, kernel=1))
    add(Reshape((2 * n,)))
    net = Network(layers, 2 * A.m)
    logger.info(f"Built U-net N={n} m={A.m} channels={tuple(channels)} params={net.n_params}")
    return net


def gradient_check(net: Network, Y, X, probes: int = 10, step: float = 1e-5, seed: int = 0) -> float:
    """
    Largest relative error between backprop and central differences over
    ``probes`` random trainable parameter entries.
    """
    _, grads = net.gradients(Y, X)
    params = net.parameters()
    if not params:
        return 0.0
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(probes):
        li, name, arr = params[rng.integers(len(params))]
        flat = arr.reshape(-1)
        j = int(rng.integers(flat.size))
        saved = flat[j]
        flat[j] = saved + step
        plus, _ = net.gradients(Y, X)
        flat[j] = saved - step
        minus, _ = net.gradients(Y, X)
        flat[j] = saved
        numeric = (plus - minus) / (2 * step)
        analytic = grads[li][name].reshape(-1)[j]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, err)
    return worst
