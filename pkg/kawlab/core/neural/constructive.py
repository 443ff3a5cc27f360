"""
Explicit ReLU networks with known outputs.

All networks act on [re, im] stacked vectors. Linear maps pass through the
ReLU layers by the identity rho(y) - rho(-y) = y, so the decoders here are
exact up to the rounding of their final matrix product.
"""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import solve_triangular

from kawlab.common.errors import ArgumentError, SizeError
from kawlab.core.operators import MeasurementOperator
from kawlab.core.tensor_linalg import realify_matrix, stack_complex

from .layers import Dense, Layer, ReLU
from .network import Network

logger = logging.getLogger(__name__)

MIN_SEPARATION = 1e-10
DIRECTION_DRAWS = 100


def identity_relu_gadget(dim: int) -> List[Layer]:
    """[Dense([I; -I]), ReLU, Dense([I, -I])]: the identity on R^dim."""
    if dim < 1:
        raise ArgumentError(f"gadget dimension must be positive, got {dim}")
    eye = np.eye(dim)
    return [Dense(np.vstack([eye, -eye]), trainable=False), ReLU(), Dense(np.hstack([eye, -eye]), trainable=False)]


def _linear_relu_network(M: np.ndarray, depth: int, width: Optional[int]) -> Network:
    """Depth-``depth`` ReLU network computing the real matrix M exactly."""
    n_out, n_in = M.shape
    width = 2 * n_in if width is None else int(width)
    if depth < 2:
        raise ArgumentError(f"depth must be at least 2, got {depth}")
    if width < 2 * n_in:
        raise ArgumentError(f"hidden width {width} below the required {2 * n_in} (twice the stacked input)")
    split = np.zeros((width, n_in))
    split[:n_in] = np.eye(n_in)
    split[n_in:2 * n_in] = -np.eye(n_in)
    layers: List[Layer] = [Dense(split), ReLU()]
    carry = np.zeros((width, width))
    carry[:2 * n_in, :2 * n_in] = np.eye(2 * n_in)
    for _ in range(depth - 2):
        layers += [Dense(carry.copy()), ReLU()]
    merge = np.zeros((n_in, width))
    merge[:, :n_in] = np.eye(n_in)
    merge[:, n_in:2 * n_in] = -np.eye(n_in)
    layers.append(Dense(M @ merge))
    return Network(layers, n_in)


def pinv_decoder_network(A: MeasurementOperator, depth: int = 2, width: Optional[int] = None) -> Network:
    """
    Psi(y) = A^+ y as a ReLU network of ``depth`` dense layers.

    Hidden widths must be at least 4m (twice the stacked measurement length).
    """
    pinv = A.pinv_apply(np.eye(A.m, dtype=complex)).T
    return _linear_relu_network(realify_matrix(pinv), depth, width)


def corrected_decoder_matrix(A: MeasurementOperator, i: int, y_hat, target) -> np.ndarray:
    """
    C = A^+ P_{i^c} + (1/y_hat_i) (target - A^+ P_{i^c} y_hat) e_i^T.

    C y_hat = target, and C y = A^+ y whenever y_i = 0.
    """
    y_hat = np.asarray(y_hat, dtype=complex)
    target = np.asarray(target, dtype=complex)
    if y_hat.shape != (A.m,) or target.shape != (A.n,):
        raise SizeError(f"need y_hat in C^{A.m} and target in C^{A.n}")
    if not 0 <= i < A.m:
        raise ArgumentError(f"sampled index {i} outside 0..{A.m - 1}")
    if abs(y_hat[i]) == 0:
        raise ArgumentError(f"y_hat vanishes at the chosen index {i}")
    pinv = A.pinv_apply(np.eye(A.m, dtype=complex)).T
    keep = np.ones(A.m)
    keep[i] = 0.0
    base = pinv * keep[None, :]
    C = base.copy()
    C[:, i] = (target - base @ y_hat) / y_hat[i]
    return C


def corrected_decoder_network(A: MeasurementOperator, i: int, y_hat, target, depth: int = 2,
                              width: Optional[int] = None) -> Network:
    """ReLU network sending y_hat to ``target`` and agreeing with A^+ off coordinate i."""
    return _linear_relu_network(realify_matrix(corrected_decoder_matrix(A, i, y_hat, target)), depth, width)


def _dedupe(Y: np.ndarray, X: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    _, first, inverse = np.unique(Y, axis=0, return_index=True, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    for j, group in enumerate(inverse):
        if not np.array_equal(X[j], X[first[group]]):
            raise ArgumentError(f"input {j} coincides with another input but has a different target")
    keep = np.sort(first)
    return Y[keep], X[keep]


def interpolatory_network(pairs: Sequence[Tuple], seed: int = 0, max_points: int = 64) -> Network:
    """
    One-hidden-layer ReLU network of width 2M with Psi(y_j) = x_j for every pair.

    Inputs are projected on a random direction a with well separated values
    t_1 < ... < t_M. Hidden unit k is rho(a.y - b_k) with b_1 = t_1 - 1 and
    b_k = t_{k-1}, so the M x M design matrix is lower triangular with a
    positive diagonal and the outer weights come from one triangular solve.
    The M ridges appear twice: the first copy drives the real part of the
    output, the second the imaginary part.
    """
    if not pairs:
        raise ArgumentError("need at least one interpolation pair")
    Y = stack_complex(np.asarray([p[0] for p in pairs], dtype=complex))
    X = stack_complex(np.asarray([p[1] for p in pairs], dtype=complex))
    Y, X = _dedupe(Y, X)
    M = Y.shape[0]
    if M > max_points:
        raise SizeError(f"{M} interpolation points exceed the cap {max_points}")

    rng = np.random.default_rng(seed)
    for _ in range(DIRECTION_DRAWS):
        a = rng.standard_normal(Y.shape[1])
        a /= np.linalg.norm(a)
        t = Y @ a
        order = np.argsort(t, kind="stable")
        if M == 1 or np.min(np.diff(t[order])) > MIN_SEPARATION:
            break
    else:
        raise ArgumentError("could not find a direction separating the inputs")

    ts = t[order]
    b = np.concatenate([[ts[0] - 1.0], ts[:-1]])
    design = np.maximum(ts[:, None] - b[None, :], 0.0)
    coeffs = solve_triangular(design, X[order], lower=True)
    half = X.shape[1] // 2
    outer = np.zeros((X.shape[1], 2 * M))
    outer[:half, :M] = coeffs[:, :half].T
    outer[half:, M:] = coeffs[:, half:].T
    hidden = Dense(np.outer(np.ones(2 * M), a), -np.concatenate([b, b]))
    net = Network([hidden, ReLU(), Dense(outer)], Y.shape[1])
    logger.debug(f"Interpolatory network through {M} points, min separation {np.min(np.diff(ts)) if M > 1 else 0:.3e}")
    return net


def plateau_network(pairs: Sequence[Tuple], margin: float = 0.25, direction=None, seed: int = 0,
                    max_points: int = 64) -> Network:
    """
    One-hidden-layer ReLU network that is flat around every training input.

    Inputs are ordered along a unit direction a (``direction``, a measurement
    vector, or a random one). Between consecutive projections t_k < t_{k+1}
    the output ramps linearly from x_k to x_{k+1} over the middle
    1 - 2 margin of the gap, so Psi(y) = x_k whenever a.y lies within
    margin (t_{k+1} - t_k) of t_k on the right and margin (t_k - t_{k-1}) on
    the left; outside the extreme inputs the output stays constant.
    """
    if not pairs:
        raise ArgumentError("need at least one training pair")
    if not 0 <= margin < 0.5:
        raise ArgumentError(f"margin must lie in [0, 1/2), got {margin}")
    Y = stack_complex(np.asarray([p[0] for p in pairs], dtype=complex))
    X = stack_complex(np.asarray([p[1] for p in pairs], dtype=complex))
    Y, X = _dedupe(Y, X)
    M, d = Y.shape
    if M > max_points:
        raise SizeError(f"{M} points exceed the cap {max_points}")
    if M == 1:
        return Network([Dense(np.zeros((1, d))), ReLU(), Dense(np.zeros((X.shape[1], 1)), X[0])], d)

    if direction is not None:
        a = stack_complex(np.asarray(direction, dtype=complex))
        if a.shape != (d,) or np.linalg.norm(a) == 0:
            raise ArgumentError(f"direction must be a nonzero vector of {d // 2} measurements")
        a = a / np.linalg.norm(a)
        draws = [a]
    else:
        rng = np.random.default_rng(seed)
        draws = (rng.standard_normal(d) for _ in range(DIRECTION_DRAWS))
    for a in draws:
        a = a / np.linalg.norm(a)
        t = Y @ a
        order = np.argsort(t, kind="stable")
        if np.min(np.diff(t[order])) > MIN_SEPARATION:
            break
    else:
        raise ArgumentError("direction does not separate the inputs")

    ts, xs = t[order], X[order]
    gaps = np.diff(ts)
    lo = ts[:-1] + margin * gaps
    slope = 1.0 / ((1 - 2 * margin) * gaps)
    weight = np.repeat(slope, 2)[:, None] * a[None, :]
    bias = -np.repeat(slope * lo, 2) - np.tile([0.0, 1.0], M - 1)
    steps = np.diff(xs, axis=0)
    out = np.empty((X.shape[1], 2 * (M - 1)))
    out[:, 0::2] = steps.T
    out[:, 1::2] = -steps.T
    logger.debug(f"Plateau network through {M} points, smallest gap {gaps.min():.3e}")
    return Network([Dense(weight, bias), ReLU(), Dense(out, xs[0])], d)
