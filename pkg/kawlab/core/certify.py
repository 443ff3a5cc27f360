"""
Kernel-awareness certification at desk scale.

RIP-in-levels constants are computed by enumerating level supports (or a
declared number of sampled supports); the rNSP is probed by a falsifier that
searches for sparse vectors close to N(A).
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np

from kawlab.common.constants import ENUMERATION_CAP, RNSP_ITERATIONS, SUPPORT_BLOCK
from kawlab.common.errors import ArgumentError, SizeError
from kawlab.common.helpers import block_rng, parallel_map
from kawlab.common.report import Report
from kawlab.core.cs_solver import as_transform
from kawlab.core.operators import LevelStructure, MeasurementOperator, kernel_basis, kernel_projectors

logger = logging.getLogger(__name__)

WORST_KEPT = 10


def ripl_orders(levels: LevelStructure, r: Optional[int] = None) -> Tuple[int, ...]:
    """t_l = min(M_l - M_{l-1}, 2 ceil(4 r s_l))."""
    r = levels.r if r is None else r
    return tuple(min(hi - lo, 2 * math.ceil(4 * r * sl))
                 for (lo, hi), sl in zip(levels.sparsity_bounds, levels.local_sparsities))


@dataclass
class RiplCertificate:
    t: Tuple[int, ...]
    delta: float
    worst_support: np.ndarray
    method: str
    supports_checked: int
    worst: List[Tuple[float, Tuple[int, ...]]] = field(default_factory=list)

    def certifies(self, bound: float = 0.5) -> bool:
        return self.delta <= bound

    def to_report(self) -> Report:
        report = Report("ripl-certificate")
        report.set("t", " ".join(str(v) for v in self.t))
        report.set("delta", self.delta)
        report.set("method", self.method)
        report.set("supports_checked", self.supports_checked)
        report.set("worst_support", " ".join(str(int(i) + 1) for i in self.worst_support))
        report.add_table("worst_supports", ["rank", "delta", "support"],
                         [[rank, d, " ".join(str(i + 1) for i in sup)] for rank, (d, sup) in enumerate(self.worst, 1)])
        if self.worst:
            report.add_check("delta_is_worst", "key(delta)", "==", "colmax(worst_supports, delta)", 0.0)
        return report


def _support_count(levels: LevelStructure, t: Sequence[int]) -> int:
    return math.prod(math.comb(hi - lo, tl) for (lo, hi), tl in zip(levels.sparsity_bounds, t))


def _enumerate_supports(levels: LevelStructure, t: Sequence[int]) -> Iterator[Tuple[int, ...]]:
    per_level = [itertools.combinations(range(lo, hi), tl) for (lo, hi), tl in zip(levels.sparsity_bounds, t)]
    for combo in itertools.product(*per_level):
        yield tuple(i for part in combo for i in part)


def _block_deltas(gram: np.ndarray, supports: np.ndarray) -> List[Tuple[float, Tuple[int, ...]]]:
    sub = gram[supports[:, :, None], supports[:, None, :]]
    eig = np.linalg.eigvalsh(sub)
    deltas = np.maximum(eig[:, -1] - 1.0, 1.0 - eig[:, 0])
    order = np.argsort(-deltas, kind="stable")[:WORST_KEPT]
    return [(float(deltas[i]), tuple(int(v) for v in supports[i])) for i in order]


def ripl_constant(A: MeasurementOperator, H, levels: LevelStructure, t: Optional[Sequence[int]] = None,
                  mode: Union[str, Tuple[str, int]] = "exhaustive", seed: int = 0,
                  cap: int = ENUMERATION_CAP) -> RiplCertificate:
    """
    delta_{t,M} of A H*: max over level supports S of the Gram deviation
    max(sigma_max^2 - 1, 1 - sigma_min^2) of the columns in S.

    ``mode`` is "exhaustive" or ("sampled", n) / "sampled:n".
    """
    H = as_transform(H)
    t = tuple(ripl_orders(levels) if t is None else t)
    if len(t) != levels.r:
        raise ArgumentError(f"need one order per level, got {len(t)} for {levels.r}")
    for (lo, hi), tl in zip(levels.sparsity_bounds, t):
        if not 0 <= tl <= hi - lo:
            raise ArgumentError(f"order {tl} does not fit a level of size {hi - lo}")
    if isinstance(mode, str) and mode.startswith("sampled:"):
        mode = ("sampled", int(mode.split(":", 1)[1]))

    B = A.apply(H.adjoint(np.eye(A.n, dtype=complex))).T
    gram = B.conj().T @ B
    k = sum(t)
    if k == 0:
        return RiplCertificate(t, 0.0, np.zeros(0, dtype=np.int64), "exhaustive", 0)

    total = _support_count(levels, t)
    if mode == "exhaustive":
        if total > cap:
            raise SizeError(f"{total} supports exceed the enumeration cap {cap}; use sampled mode")
        supports = np.asarray(list(_enumerate_supports(levels, t)), dtype=np.int64)
        blocks = [supports[i:i + SUPPORT_BLOCK] for i in range(0, len(supports), SUPPORT_BLOCK)]
        method, checked = "exhaustive", total
    else:
        kind, trials = mode
        if kind != "sampled" or trials < 1:
            raise ArgumentError(f"unknown certification mode {mode!r}")

        def draw(block: int, count: int) -> np.ndarray:
            rng = block_rng(seed, block)
            rows = []
            for _ in range(count):
                rows.append(np.concatenate([np.sort(rng.choice(np.arange(lo, hi), size=tl, replace=False))
                                            for (lo, hi), tl in zip(levels.sparsity_bounds, t)]))
            return np.asarray(rows, dtype=np.int64)

        blocks = [draw(b, min(SUPPORT_BLOCK, trials - start))
                  for b, start in enumerate(range(0, trials, SUPPORT_BLOCK))]
        method, checked = f"sampled:{trials}", trials

    results = parallel_map(lambda blk: _block_deltas(gram, blk), blocks)
    merged = sorted((item for res in results for item in res), key=lambda it: -it[0])[:WORST_KEPT]
    delta, worst = merged[0]
    logger.info(f"RIPL delta={delta:.4f} over {checked} supports ({method}), t={t}")
    return RiplCertificate(t, delta, np.asarray(worst, dtype=np.int64), method, checked, merged)


def rnsp_constants_from_rip(delta: float) -> Tuple[float, float]:
    """
    (rho, gamma) of the rNSP of order s implied by a RIP constant delta of
    order 2s (Foucart-Rauhut). Valid for delta < 4 / sqrt(41).
    """
    if not 0 <= delta < 4 / math.sqrt(41):
        raise ArgumentError(f"delta = {delta} outside [0, 4/sqrt(41))")
    denom = math.sqrt(1 - delta ** 2) - delta / 4
    return delta / denom, math.sqrt(1 + delta) / denom


class RnspWitness(NamedTuple):
    x: np.ndarray
    support: np.ndarray
    lhs: float
    rhs: float

    @property
    def margin(self) -> float:
        return self.lhs - self.rhs


def rnsp_sides(A: MeasurementOperator, x, s: int, rho: float, gamma: float) -> RnspWitness:
    """Both sides of the rNSP inequality at x for its worst support (the s largest entries)."""
    x = np.asarray(x, dtype=complex)
    mag = np.abs(x)
    support = np.sort(np.argsort(-mag, kind="stable")[:s])
    mask = np.ones(x.size, dtype=bool)
    mask[support] = False
    lhs = float(np.linalg.norm(x[support]))
    rhs = float(rho / math.sqrt(s) * np.sum(mag[mask]) + gamma * np.linalg.norm(A.apply(x)))
    return RnspWitness(x, support, lhs, rhs)


def _normalize(v: np.ndarray) -> Optional[np.ndarray]:
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 1e-14 else None


def rnsp_falsify(A: MeasurementOperator, s: int, rho: float, gamma: float, budget: int = 200,
                 iterations: int = RNSP_ITERATIONS, seed: int = 0, margin: float = 1e-9) -> Optional[RnspWitness]:
    """
    Search for x violating ||P_S x|| <= rho/sqrt(s) ||P_S^c x||_1 + gamma ||A x||.

    Kernel basis vectors are tried first; then, for up to ``budget`` supports,
    projected subgradient descent on the unit sphere from a kernel-aligned
    start. None means no violation was found, not that none exists.
    """
    n = A.n
    if not 1 <= s <= n:
        raise ArgumentError(f"s must lie in 1..{n}, got {s}")
    scale = rho / math.sqrt(s)

    def accept(x) -> Optional[RnspWitness]:
        w = rnsp_sides(A, x, s, rho, gamma)
        return w if w.margin > margin * max(1.0, np.linalg.norm(x)) else None

    basis = kernel_basis(A) if n <= 1024 else np.zeros((n, 0))
    for j in range(basis.shape[1]):
        found = accept(basis[:, j])
        if found is not None:
            logger.info(f"rNSP witness from kernel basis vector {j}")
            return found

    project_kernel = kernel_projectors(A).project_kernel
    rng = np.random.default_rng(seed)
    if math.comb(n, s) <= budget:
        supports = [np.asarray(c) for c in itertools.combinations(range(n), s)]
    else:
        supports = [np.sort(rng.choice(n, size=s, replace=False)) for _ in range(budget)]

    for support in supports:
        inside = np.zeros(n, dtype=bool)
        inside[support] = True
        start = np.zeros(n, dtype=complex)
        start[support] = rng.standard_normal(s) + 1j * rng.standard_normal(s)
        x = _normalize(project_kernel(start))
        if x is None or not np.any(np.abs(x[inside]) > 0):
            x = _normalize(start)
        best = accept(x)
        if best is not None:
            return best
        for it in range(1, iterations + 1):
            Ax = A.apply(x)
            nAx = np.linalg.norm(Ax)
            g = np.zeros(n, dtype=complex)
            if nAx > 0:
                g += gamma * A.adjoint(Ax) / nAx
            outside = ~inside
            mag = np.abs(x[outside])
            g[outside] += scale * np.divide(x[outside], mag, out=np.zeros_like(x[outside]), where=mag > 0)
            n_in = np.linalg.norm(x[inside])
            if n_in > 0:
                g[inside] -= x[inside] / n_in
            step = 0.5 / math.sqrt(it)
            x_next = _normalize(x - step * g)
            if x_next is None:
                break
            x = x_next
            if it % 50 == 0 or it == iterations:
                found = accept(x)
                if found is not None:
                    logger.info(f"rNSP witness after {it} iterations on support {support.tolist()}")
                    return found
    return None


class KernelProximity(NamedTuple):
    measurement_gap: float
    signal_gap: float
    ratio: float


def kernel_proximity(A: MeasurementOperator, x, x_prime) -> KernelProximity:
    """(||A(x - x')||, ||x - x'||, ratio); ratio is 0 when x = x'."""
    diff = np.asarray(x_prime, dtype=complex) - np.asarray(x, dtype=complex)
    if diff.shape != (A.n,):
        raise SizeError(f"signals have shape {diff.shape}, operator expects ({A.n},)")
    signal_gap = float(np.linalg.norm(diff))
    measurement_gap = float(np.linalg.norm(A.apply(diff)))
    ratio = measurement_gap / signal_gap if signal_gap > 0 else 0.0
    return KernelProximity(measurement_gap, signal_gap, ratio)
