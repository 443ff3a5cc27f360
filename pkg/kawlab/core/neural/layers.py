"""
Layer zoo with hand-written reverse-mode passes.

Tensors are batch-first: dense layers see (B, features), convolutional layers
see (B, channels, length). ``forward`` returns the output together with the
tape entry ``backward`` needs; layers hold no per-call state, so a network can
be evaluated concurrently.
"""

from typing import Dict, List, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from kawlab.common.errors import ArgumentError, SizeError

Shape = Tuple[int, ...]

TAG_DENSE = 1
TAG_RELU = 2
TAG_LEAKY_RELU = 3
TAG_CONV1D = 4
TAG_TRANSPOSE_CONV1D = 5
TAG_MAXPOOL = 6
TAG_SKIP_CONCAT = 7
TAG_RESHAPE = 8


class Layer:
    """Base class. Subclasses set ``tag`` and fill ``params``."""

    tag = 0
    trainable = False

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}

    def output_shape(self, shape: Shape) -> Shape:
        return shape

    def forward(self, x: np.ndarray):
        raise NotImplementedError

    def backward(self, cache, grad: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        raise NotImplementedError

    def config(self) -> List[float]:
        """Scalar settings written by the serializer ahead of the tensors."""
        return []

    def copy(self) -> "Layer":
        clone = self.__class__.__new__(self.__class__)
        clone.__dict__.update(self.__dict__)
        clone.params = {k: v.copy() for k, v in self.params.items()}
        return clone

    def __repr__(self):
        shapes = ", ".join(f"{k}{tuple(v.shape)}" for k, v in self.params.items())
        return f"{self.__class__.__name__}({shapes})"


class Dense(Layer):
    """y = x W^T + b. ``trainable=False`` freezes a fixed linear stage."""

    tag = TAG_DENSE

    def __init__(self, weight, bias=None, trainable: bool = True):
        super().__init__()
        weight = np.array(weight, dtype=float)
        if weight.ndim != 2:
            raise SizeError(f"dense weight must be a matrix, got shape {weight.shape}")
        bias = np.zeros(weight.shape[0]) if bias is None else np.array(bias, dtype=float)
        if bias.shape != (weight.shape[0],):
            raise SizeError(f"bias shape {bias.shape} does not match {weight.shape[0]} outputs")
        self.params = {"W": weight, "b": bias}
        self.trainable = trainable

    @classmethod
    def init(cls, n_in: int, n_out: int, rng: np.random.Generator, trainable: bool = True) -> "Dense":
        """He-normal weights, zero bias."""
        return cls(rng.standard_normal((n_out, n_in)) * np.sqrt(2.0 / n_in), None, trainable)

    @property
    def n_in(self) -> int:
        return self.params["W"].shape[1]

    @property
    def n_out(self) -> int:
        return self.params["W"].shape[0]

    def output_shape(self, shape):
        if shape != (self.n_in,):
            raise SizeError(f"dense layer expects ({self.n_in},), got {shape}")
        return (self.n_out,)

    def config(self):
        return [float(self.trainable)]

    def forward(self, x):
        return x @ self.params["W"].T + self.params["b"], x

    def backward(self, cache, grad):
        x = cache
        grads = {"W": grad.T @ x, "b": grad.sum(axis=0)} if self.trainable else {}
        return grad @ self.params["W"], grads


class ReLU(Layer):
    tag = TAG_RELU

    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, 0.0), mask

    def backward(self, cache, grad):
        return np.where(cache, grad, 0.0), {}


class LeakyReLU(Layer):
    tag = TAG_LEAKY_RELU

    def __init__(self, alpha: float = 0.2):
        super().__init__()
        if not 0 <= alpha < 1:
            raise ArgumentError(f"leaky slope must lie in [0, 1), got {alpha}")
        self.alpha = float(alpha)

    def config(self):
        return [self.alpha]

    def forward(self, x):
        mask = x > 0
        return np.where(mask, x, self.alpha * x), mask

    def backward(self, cache, grad):
        return np.where(cache, grad, self.alpha * grad), {}


PADDING_MODES = ("symmetric", "zeros")


def _pad(x: np.ndarray, p: int, mode: str) -> np.ndarray:
    if p == 0:
        return x
    if mode == "symmetric" and p > x.shape[-1]:
        raise SizeError(f"symmetric padding {p} exceeds signal length {x.shape[-1]}")
    return np.pad(x, ((0, 0), (0, 0), (p, p)), mode="symmetric" if mode == "symmetric" else "constant")


def _unpad_grad(g: np.ndarray, p: int, length: int, mode: str) -> np.ndarray:
    if p == 0:
        return g
    out = g[:, :, p:p + length].copy()
    if mode == "symmetric":
        # mirrored copies fold back onto the edge samples they replicate
        out[:, :, :p] += g[:, :, :p][..., ::-1]
        out[:, :, length - p:] += g[:, :, p + length:][..., ::-1]
    return out


def _conv_forward(x, W, b, stride, mode):
    k = W.shape[2]
    xp = _pad(x, k // 2, mode)
    windows = sliding_window_view(xp, k, axis=2)[:, :, ::stride, :]
    out = np.einsum("bclk,ock->bol", windows, W) + b[None, :, None]
    return out, (windows, x.shape[-1])


def _conv_backward(cache, grad, W, stride, mode):
    windows, length = cache
    k = W.shape[2]
    p = k // 2
    gW = np.einsum("bol,bclk->ock", grad, windows)
    gb = grad.sum(axis=(0, 2))
    gwin = np.einsum("bol,ock->bclk", grad, W)
    n_out = gwin.shape[2]
    gp = np.zeros(windows.shape[:2] + (length + 2 * p,))
    for kk in range(k):
        gp[:, :, kk:kk + stride * (n_out - 1) + 1:stride] += gwin[..., kk]
    return _unpad_grad(gp, p, length, mode), gW, gb


class Conv1d(Layer):
    """1-D convolution with odd kernel, 'same' padding and optional stride."""

    tag = TAG_CONV1D
    trainable = True

    def __init__(self, weight, bias=None, stride: int = 1, padding: str = "symmetric"):
        super().__init__()
        weight = np.array(weight, dtype=float)
        if weight.ndim != 3 or weight.shape[2] % 2 == 0:
            raise SizeError(f"conv kernel must be (out, in, odd k), got {weight.shape}")
        if padding not in PADDING_MODES:
            raise ArgumentError(f"padding must be one of {PADDING_MODES}, got {padding!r}")
        if stride < 1:
            raise ArgumentError(f"stride must be positive, got {stride}")
        bias = np.zeros(weight.shape[0]) if bias is None else np.array(bias, dtype=float)
        self.params = {"W": weight, "b": bias}
        self.stride = int(stride)
        self.padding = padding

    @classmethod
    def init(cls, c_in: int, c_out: int, rng: np.random.Generator, kernel: int = 3,
             stride: int = 1, padding: str = "symmetric") -> "Conv1d":
        w = rng.standard_normal((c_out, c_in, kernel)) * np.sqrt(2.0 / (c_in * kernel))
        return cls(w, None, stride, padding)

    def config(self):
        return [float(self.stride), float(PADDING_MODES.index(self.padding))]

    def output_shape(self, shape):
        c_out, c_in, k = self.params["W"].shape
        if len(shape) != 2 or shape[0] != c_in:
            raise SizeError(f"conv expects ({c_in}, L), got {shape}")
        return (c_out, (shape[1] - 1) // self.stride + 1)

    def forward(self, x):
        return _conv_forward(x, self.params["W"], self.params["b"], self.stride, self.padding)

    def backward(self, cache, grad):
        gx, gW, gb = _conv_backward(cache, grad, self.params["W"], self.stride, self.padding)
        return gx, {"W": gW, "b": gb}


class TransposeConv1d(Conv1d):
    """Zero-insertion upsampling by ``stride`` followed by a zero-padded convolution."""

    tag = TAG_TRANSPOSE_CONV1D

    def __init__(self, weight, bias=None, stride: int = 2):
        super().__init__(weight, bias, stride, "zeros")

    @classmethod
    def init(cls, c_in: int, c_out: int, rng: np.random.Generator, kernel: int = 3,
             stride: int = 2) -> "TransposeConv1d":
        w = rng.standard_normal((c_out, c_in, kernel)) * np.sqrt(2.0 / (c_in * kernel))
        return cls(w, None, stride)

    def output_shape(self, shape):
        c_out, c_in, _ = self.params["W"].shape
        if len(shape) != 2 or shape[0] != c_in:
            raise SizeError(f"transpose conv expects ({c_in}, L), got {shape}")
        return (c_out, shape[1] * self.stride)

    def forward(self, x):
        up = np.zeros(x.shape[:2] + (x.shape[2] * self.stride,))
        up[:, :, ::self.stride] = x
        return _conv_forward(up, self.params["W"], self.params["b"], 1, "zeros")

    def backward(self, cache, grad):
        gup, gW, gb = _conv_backward(cache, grad, self.params["W"], 1, "zeros")
        return gup[:, :, ::self.stride], {"W": gW, "b": gb}


class MaxPool2(Layer):
    tag = TAG_MAXPOOL

    def output_shape(self, shape):
        if len(shape) != 2 or shape[1] % 2:
            raise SizeError(f"max pool needs (C, even L), got {shape}")
        return (shape[0], shape[1] // 2)

    def forward(self, x):
        b, c, length = x.shape
        pairs = x.reshape(b, c, length // 2, 2)
        idx = np.argmax(pairs, axis=-1)[..., None]
        return np.take_along_axis(pairs, idx, axis=-1)[..., 0], (idx, x.shape)

    def backward(self, cache, grad):
        idx, shape = cache
        out = np.zeros(shape[:2] + (shape[2] // 2, 2))
        np.put_along_axis(out, idx, grad[..., None], axis=-1)
        return out.reshape(shape), {}


class SkipConcat(Layer):
    """
    Channel concatenation with the output of layer ``source``.

    The network feeds the stored activation in and routes the second half of
    the gradient back to it.
    """

    tag = TAG_SKIP_CONCAT

    def __init__(self, source: int):
        super().__init__()
        self.source = int(source)

    def config(self):
        return [float(self.source)]

    def concat_shape(self, shape: Shape, skip_shape: Shape) -> Shape:
        if len(shape) != 2 or len(skip_shape) != 2 or shape[1] != skip_shape[1]:
            raise SizeError(f"cannot concatenate {shape} with skip {skip_shape}")
        return (shape[0] + skip_shape[0], shape[1])

    def forward(self, x, skip=None):
        if skip is None:
            raise ArgumentError("skip concatenation needs the source activation")
        return np.concatenate([x, skip], axis=1), x.shape[1]

    def backward(self, cache, grad):
        split = cache
        return grad[:, :split], {"skip": grad[:, split:]}


class Reshape(Layer):
    tag = TAG_RESHAPE

    def __init__(self, shape: Sequence[int]):
        super().__init__()
        self.shape = tuple(int(s) for s in shape)

    def config(self):
        return [float(len(self.shape))] + [float(s) for s in self.shape]

    def output_shape(self, shape):
        if int(np.prod(shape)) != int(np.prod(self.shape)):
            raise SizeError(f"cannot reshape {shape} to {self.shape}")
        return self.shape

    def forward(self, x):
        return x.reshape((x.shape[0],) + self.shape), x.shape

    def backward(self, cache, grad):
        return grad.reshape(cache), {}


def build_layer(tag: int, config: Sequence[float], params: Dict[str, np.ndarray]) -> Layer:
    """Inverse of (tag, config, params) used by the serializer."""
    cfg = [int(round(v)) for v in config]
    if tag == TAG_DENSE:
        return Dense(params["W"], params["b"], trainable=bool(cfg[0]) if cfg else True)
    if tag == TAG_RELU:
        return ReLU()
    if tag == TAG_LEAKY_RELU:
        return LeakyReLU(config[0])
    if tag == TAG_CONV1D:
        return Conv1d(params["W"], params["b"], cfg[0], PADDING_MODES[cfg[1]])
    if tag == TAG_TRANSPOSE_CONV1D:
        return TransposeConv1d(params["W"], params["b"], cfg[0])
    if tag == TAG_MAXPOOL:
        return MaxPool2()
    if tag == TAG_SKIP_CONCAT:
        return SkipConcat(cfg[0])
    if tag == TAG_RESHAPE:
        return Reshape(cfg[1:1 + cfg[0]])
    raise SizeError(f"unknown layer tag {tag}")


PARAM_NAMES: Dict[int, Tuple[str, ...]] = {
    TAG_DENSE: ("W", "b"),
    TAG_CONV1D: ("W", "b"),
    TAG_TRANSPOSE_CONV1D: ("W", "b"),
}


def param_names(tag: int) -> Tuple[str, ...]:
    return PARAM_NAMES.get(tag, ())


def layer_kind(layer: Layer) -> str:
    return {
        TAG_DENSE: "dense",
        TAG_RELU: "relu",
        TAG_LEAKY_RELU: "leaky_relu",
        TAG_CONV1D: "conv1d",
        TAG_TRANSPOSE_CONV1D: "transpose_conv1d",
        TAG_MAXPOOL: "maxpool",
        TAG_SKIP_CONCAT: "skip_concat",
        TAG_RESHAPE: "reshape",
    }.get(layer.tag, "unknown")


