"""
Synthetic training signals: piecewise polynomials with Heaviside jumps.
"""

from typing import Optional

import numpy as np

from kawlab.common.errors import ArgumentError

JUMPS = 3


def piecewise_poly_signals(K: int, N: int, seed: int = 0, smooth: bool = False,
                           rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """
    K signals p(t) = c (t - a1)(t - a2)(t - a3) + b + sum_i d_i h(t - s_i) on
    np.linspace(0, 1, N), returned as a (K, N) real array.

    c ~ U[0, 10); b, a_i, s_i ~ U[0, 1); d_i ~ U[-1/2, 1/2). ``smooth`` forces
    every d_i to zero.
    """
    if K < 1 or N < 2:
        raise ArgumentError(f"need K >= 1 and N >= 2, got K={K}, N={N}")
    rng = rng or np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, N)
    out = np.empty((K, N))
    for k in range(K):
        c = rng.uniform(0.0, 10.0)
        b = rng.uniform(0.0, 1.0)
        a = rng.uniform(0.0, 1.0, size=3)
        s = rng.uniform(0.0, 1.0, size=JUMPS)
        d = rng.uniform(-0.5, 0.5, size=JUMPS)
        if smooth:
            d[:] = 0.0
        signal = c * (t - a[0]) * (t - a[1]) * (t - a[2]) + b
        signal += np.sum(d[:, None] * np.heaviside(t[None, :] - s[:, None], 1.0), axis=0)
        out[k] = signal
    return out
