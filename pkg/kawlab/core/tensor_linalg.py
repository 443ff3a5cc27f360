"""
Unitary transform kernels and small dense linear algebra.

All transforms act on the last axis, so a 2-D input is a batch of signals.
Lengths must be powers of two.
"""

import logging
from typing import NamedTuple, Sequence

import numpy as np

from kawlab.common.constants import MAX_SVD_DIM, MAX_TRANSFORM_LENGTH, MEB_MAX_STEPS, MEB_TOLERANCE
from kawlab.common.errors import ArgumentError, SizeError
from kawlab.common.helpers import require_power_of_two

logger = logging.getLogger(__name__)

FORWARD = "forward"
INVERSE = "inverse"


def _check_direction(direction: str) -> None:
    if direction not in (FORWARD, INVERSE):
        raise ArgumentError(f"direction must be 'forward' or 'inverse', got {direction!r}")


def _prepare(x) -> np.ndarray:
    arr = np.array(x, dtype=complex)
    if arr.ndim == 0:
        raise SizeError("transform input must have at least one axis")
    n = arr.shape[-1]
    require_power_of_two(n)
    if n > MAX_TRANSFORM_LENGTH:
        raise SizeError(f"length {n} exceeds {MAX_TRANSFORM_LENGTH}")
    return arr


def bit_reverse_permutation(n: int) -> np.ndarray:
    """Index permutation k -> bit-reversal of k over log2(n) bits."""
    require_power_of_two(n)
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def sequency_permutation(n: int) -> np.ndarray:
    """perm[k] = natural-order Hadamard row that has k sign changes."""
    k = np.arange(n)
    gray = k ^ (k >> 1)
    return bit_reverse_permutation(n)[gray]


def dft(x, direction: str = FORWARD) -> np.ndarray:
    """Unitary DFT (1/sqrt(N) both ways) by iterative radix-2 decimation in time."""
    _check_direction(direction)
    a = _prepare(x)
    n = a.shape[-1]
    batch = a.shape[:-1]
    sign = -1.0 if direction == FORWARD else 1.0
    a = a[..., bit_reverse_permutation(n)]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / size)
        blocks = a.reshape(batch + (n // size, size))
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        a = np.concatenate([even + odd, even - odd], axis=-1).reshape(batch + (n,))
        size *= 2
    return a / np.sqrt(n)


def _hadamard_natural(a: np.ndarray) -> np.ndarray:
    n = a.shape[-1]
    batch = a.shape[:-1]
    h = 1
    while h < n:
        blocks = a.reshape(batch + (n // (2 * h), 2, h))
        top = blocks[..., 0, :]
        bottom = blocks[..., 1, :]
        a = np.stack([top + bottom, top - bottom], axis=-2).reshape(batch + (n,))
        h *= 2
    return a


def fwht_sequency(x, direction: str = FORWARD) -> np.ndarray:
    """Unitary Walsh-Hadamard transform with rows in ascending sign-change order."""
    _check_direction(direction)
    a = _prepare(x)
    n = a.shape[-1]
    perm = sequency_permutation(n)
    if direction == FORWARD:
        return _hadamard_natural(a)[..., perm] / np.sqrt(n)
    scattered = np.empty_like(a)
    scattered[..., perm] = a
    return _hadamard_natural(scattered) / np.sqrt(n)


def haar_dwt(x, direction: str = FORWARD) -> np.ndarray:
    """
    Full-depth orthonormal Haar transform.

    Output layout is [scaling, coarsest detail, ..., finest details], so the
    dyadic sparsity level l (1-based) occupies indices [2^(l-2), 2^(l-1)).
    """
    _check_direction(direction)
    a = _prepare(x)
    n = a.shape[-1]
    s = np.sqrt(0.5)
    if direction == FORWARD:
        approx = a
        details = []
        while approx.shape[-1] > 1:
            even = approx[..., 0::2]
            odd = approx[..., 1::2]
            details.append((even - odd) * s)
            approx = (even + odd) * s
        return np.concatenate([approx] + details[::-1], axis=-1)

    approx = a[..., :1]
    width = 1
    while width < n:
        detail = a[..., width:2 * width]
        out = np.empty(a.shape[:-1] + (2 * width,), dtype=complex)
        out[..., 0::2] = (approx + detail) * s
        out[..., 1::2] = (approx - detail) * s
        approx = out
        width *= 2
    return approx


TRANSFORMS = {
    "fourier": dft,
    "walsh": fwht_sequency,
    "haar": haar_dwt,
}


def transform_matrix(kind: str, n: int) -> np.ndarray:
    """Explicit N x N matrix of a transform (columns are images of basis vectors)."""
    if kind == "identity":
        return np.eye(n, dtype=complex)
    try:
        fn = TRANSFORMS[kind]
    except KeyError:
        raise ArgumentError(f"unknown transform kind {kind!r}") from None
    return fn(np.eye(n, dtype=complex)).T


def naive_dft_matrix(n: int) -> np.ndarray:
    j = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(j, j) / n) / np.sqrt(n)


class SVDResult(NamedTuple):
    u: np.ndarray
    s: np.ndarray
    vh: np.ndarray


def svd_small(matrix) -> SVDResult:
    """Thin SVD of a desk-scale dense matrix; singular values descending."""
    m = np.atleast_2d(np.asarray(matrix, dtype=complex))
    if m.ndim != 2:
        raise SizeError(f"expected a matrix, got shape {m.shape}")
    if max(m.shape) > MAX_SVD_DIM:
        raise SizeError(f"matrix {m.shape} exceeds the {MAX_SVD_DIM}x{MAX_SVD_DIM} cap")
    u, s, vh = np.linalg.svd(m, full_matrices=False)
    return SVDResult(u, s, vh)


def stack_complex(x) -> np.ndarray:
    """C^n -> R^{2n} as [re, im] along the last axis."""
    arr = np.asarray(x)
    return np.concatenate([arr.real, arr.imag], axis=-1).astype(float)


def unstack_complex(v) -> np.ndarray:
    arr = np.asarray(v, dtype=float)
    n = arr.shape[-1]
    if n % 2:
        raise SizeError(f"stacked vector must have even length, got {n}")
    return arr[..., : n // 2] + 1j * arr[..., n // 2:]


def realify_matrix(m) -> np.ndarray:
    """Real 2m x 2n matrix acting on stacked vectors like m acts on complex ones."""
    m = np.asarray(m, dtype=complex)
    return np.block([[m.real, -m.imag], [m.imag, m.real]])


class Ball(NamedTuple):
    center: np.ndarray
    radius: float


def min_enclosing_ball(points: Sequence, tol: float = MEB_TOLERANCE, max_steps: int = MEB_MAX_STEPS) -> Ball:
    """
    Smallest ball containing a finite point set in C^n.

    Closed form for one or two points; otherwise Frank-Wolfe with away steps on
    the dual simplex problem. The returned radius is the exact maximum distance
    from the returned center, so containment holds by construction.
    """
    if len(points) == 0:
        raise ArgumentError("min_enclosing_ball needs at least one point")
    pts = np.array([np.asarray(p, dtype=complex).ravel() for p in points])
    if len(pts) == 1:
        return Ball(pts[0].copy(), 0.0)
    if len(pts) == 2:
        center = 0.5 * (pts[0] + pts[1])
        return Ball(center, float(0.5 * np.linalg.norm(pts[0] - pts[1])))

    real = stack_complex(pts)
    k = len(real)
    sq = np.einsum("ij,ij->i", real, real)

    # start from an approximate diameter pair
    a = int(np.argmax(np.sum((real - real[0]) ** 2, axis=1)))
    b = int(np.argmax(np.sum((real - real[a]) ** 2, axis=1)))
    u = np.zeros(k)
    u[a] += 0.5
    u[b] += 0.5

    target = (1.0 + tol) ** 2 - 1.0
    steps = 0
    while steps < max_steps:
        center = u @ real
        dist = sq - 2 * real @ center + center @ center
        phi = float(u @ dist)
        if phi <= 1e-300:
            break
        far = int(np.argmax(dist))
        delta_plus = dist[far] / phi - 1.0
        support = np.flatnonzero(u > 0)
        near = int(support[np.argmin(dist[support])])
        delta_minus = 1.0 - dist[near] / phi
        if max(delta_plus, delta_minus) <= target:
            break
        if delta_plus >= delta_minus:
            lam = delta_plus / (2.0 * (1.0 + delta_plus))
            u *= 1.0 - lam
            u[far] += lam
        else:
            lam = min(delta_minus / (2.0 * (1.0 - delta_minus)), u[near] / (1.0 - u[near]))
            u *= 1.0 + lam
            u[near] -= lam
            u[near] = max(u[near], 0.0)
        steps += 1
    else:
        logger.warning(f"min_enclosing_ball hit the {max_steps}-step cap")

    center_real = u @ real
    center = unstack_complex(center_real)
    radius = float(np.max(np.linalg.norm(pts - center, axis=1)))
    logger.debug(f"min_enclosing_ball: {k} points, {steps} steps, radius {radius:.3e}")
    return Ball(center, radius)
