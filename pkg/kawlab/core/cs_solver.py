"""
Sparse-regularization decoders.

QCBP:  minimize ||W H z||_1  subject to  ||A z - y||_2 <= eta
LASSO: minimize 1/2 ||A z - y||^2 + lambda ||W H z||_1

Both are solved in the coefficient variable c = H z (H unitary), so the
operator seen by the iterations is B = A H*.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Optional, Sequence

import numpy as np

from kawlab.common.constants import RECOVERY_C, RECOVERY_D
from kawlab.common.errors import ArgumentError, ConvergenceError, SizeError
from kawlab.common.models import SolverOptions
from kawlab.core.operators import LevelStructure, MeasurementOperator
from kawlab.core.tensor_linalg import FORWARD, INVERSE, haar_dwt

logger = logging.getLogger(__name__)


class AnalysisTransform:
    """Orthonormal sparsifying transform H (Haar or identity)."""

    def __init__(self, kind: str = "haar"):
        if kind not in ("haar", "identity"):
            raise ArgumentError(f"analysis transform must be 'haar' or 'identity', got {kind!r}")
        self.kind = kind

    def apply(self, x):
        x = np.asarray(x, dtype=complex)
        return haar_dwt(x, FORWARD) if self.kind == "haar" else x.copy()

    def adjoint(self, c):
        c = np.asarray(c, dtype=complex)
        return haar_dwt(c, INVERSE) if self.kind == "haar" else c.copy()

    def __repr__(self):
        return f"AnalysisTransform({self.kind!r})"


def as_transform(H) -> AnalysisTransform:
    if isinstance(H, AnalysisTransform):
        return H
    return AnalysisTransform(H or "identity")


def weighted_l1_norm(c, weights=None) -> float:
    mag = np.abs(np.asarray(c))
    if weights is None:
        return float(mag.sum())
    return float(np.sum(np.asarray(weights) * mag))


def soft_threshold(c: np.ndarray, thresholds) -> np.ndarray:
    """Complex soft-thresholding on the modulus; phase is preserved."""
    mag = np.abs(c)
    shrink = np.maximum(mag - thresholds, 0.0)
    scale = np.divide(shrink, mag, out=np.zeros_like(mag), where=mag > 0)
    return c * scale


def project_ball(u: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    diff = u - center
    dist = np.linalg.norm(diff)
    if dist <= radius:
        return u
    return center + diff * (radius / dist)


def power_method(forward, adjoint, n: int, iterations: int) -> float:
    """Estimate ||B|| from `iterations` steps of B*B power iteration."""
    v = np.ones(n, dtype=complex) + 1j * np.linspace(0.0, 1.0, n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iterations):
        w = adjoint(forward(v))
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        est = np.sqrt(nrm)
        v = w / nrm
    return float(est)


@dataclass
class QcbpProblem:
    A: MeasurementOperator
    y: np.ndarray
    eta: float
    H: AnalysisTransform
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=complex)
        self.H = as_transform(self.H)
        if self.eta < 0:
            raise ArgumentError(f"eta must be nonnegative, got {self.eta}")
        if self.y.shape != (self.A.m,):
            raise SizeError(f"y has shape {self.y.shape}, operator expects ({self.A.m},)")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (self.A.n,):
                raise SizeError(f"weights must have length {self.A.n}")


@dataclass
class SolverReport:
    x_hat: np.ndarray
    iterations: int
    primal_residual: float
    objective: float
    feasibility_gap: float

    CSV_HEADER = "iterations,primal_residual,objective,feasibility_gap"

    def to_csv_row(self) -> str:
        return f"{self.iterations},{self.primal_residual:.17g},{self.objective:.17g},{self.feasibility_gap:.17g}"

    def to_csv(self) -> str:
        return self.CSV_HEADER + "\n" + self.to_csv_row() + "\n"


def _finalize_feasibility(A: MeasurementOperator, z: np.ndarray, y: np.ndarray, eta: float) -> np.ndarray:
    """Pull A z onto the constraint ball along the range of A."""
    residual = A.apply(z) - y
    nrm = np.linalg.norm(residual)
    if nrm <= eta:
        return z
    return z - A.pinv_apply(residual * (1.0 - eta / nrm))


def _dual_objective(Bt, q: np.ndarray, y: np.ndarray, eta: float, w: np.ndarray) -> float:
    """
    QCBP dual value -Re<q, y> - eta ||q|| after scaling q into |B* q| <= w.

    Returns -inf when no scaling makes q dual feasible.
    """
    g = np.abs(Bt(q))
    if np.any(g[w <= 0] > 0):
        return -np.inf
    ratio = float(np.max(g[w > 0] / w[w > 0])) if np.any(w > 0) else 0.0
    q = q / max(1.0, ratio)
    return float(-np.real(np.vdot(q, y)) - eta * np.linalg.norm(q))


def qcbp_weighted(problem: QcbpProblem, opts: Optional[SolverOptions] = None) -> SolverReport:
    """
    Weighted QCBP by the Chambolle-Pock primal-dual iteration.

    Stops when both primal and dual residuals are below tol (1 + ||y||), or
    when the feasibility-projected iterate and the scaled dual iterate close
    the duality gap to gap_tol (1 + objective). At max_iter a gap within
    objective_tol is still accepted; otherwise ConvergenceError carries the
    last iterate.
    """
    opts = opts or SolverOptions()
    A, H, y, eta = problem.A, problem.H, problem.y, float(problem.eta)
    n = A.n
    w = problem.weights if problem.weights is not None else np.ones(n)

    def B(c):
        return A.apply(H.adjoint(c))

    def Bt(q):
        return H.apply(A.adjoint(q))

    L = power_method(B, Bt, n, opts.power_iterations)
    if L == 0:
        raise ArgumentError("operator A H* is zero")
    sigma = tau = opts.step_safety / L
    scale = 1.0 + np.linalg.norm(y)
    tol = opts.tol * scale

    def certificate(c, q):
        z = _finalize_feasibility(A, H.adjoint(c), y, eta)
        objective = weighted_l1_norm(H.apply(z), w)
        gap = objective - _dual_objective(Bt, q, y, eta, w)
        return z, objective, gap / (1.0 + abs(objective))

    c = H.apply(A.pinv_apply(y))
    c_bar = c.copy()
    q = np.zeros(A.m, dtype=complex)
    primal_res = dual_res = np.inf
    rel_gap = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        v = q + sigma * B(c_bar)
        q_new = v - sigma * project_ball(v / sigma, y, eta)
        c_new = soft_threshold(c - tau * Bt(q_new), tau * w)
        checked = it % opts.check_every == 0 or it == opts.max_iter
        if checked:
            dc, dq = c - c_new, q - q_new
            primal_res = float(np.linalg.norm(dc / tau - Bt(dq)))
            dual_res = float(np.linalg.norm(dq / sigma - B(dc)))
        c_bar = 2.0 * c_new - c
        c, q = c_new, q_new
        if primal_res <= tol and dual_res <= tol:
            break
        if checked:
            _, _, rel_gap = certificate(c, q)
            if rel_gap <= opts.gap_tol:
                logger.debug(f"QCBP duality gap {rel_gap:.2e} after {it} iterations")
                break
    else:
        if rel_gap > opts.objective_tol:
            z = H.adjoint(c)
            raise ConvergenceError(
                f"QCBP did not converge in {opts.max_iter} iterations "
                f"(primal {primal_res:.2e}, dual {dual_res:.2e}, target {tol:.2e}, gap {rel_gap:.2e})",
                last_iterate=z, iterations=opts.max_iter)
        logger.warning(f"QCBP residuals stalled (primal {primal_res:.2e}); accepting duality gap {rel_gap:.2e}")

    z = _finalize_feasibility(A, H.adjoint(c), y, eta)
    gap = float(np.linalg.norm(A.apply(z) - y) - eta)
    if gap > opts.feasibility_rel_tol * scale:
        raise ConvergenceError(f"QCBP iterate infeasible by {gap:.2e}", last_iterate=z, iterations=it)
    objective = weighted_l1_norm(H.apply(z), w)
    logger.debug(f"QCBP converged in {it} iterations, objective {objective:.6g}")
    return SolverReport(z, it, max(primal_res, dual_res), objective, max(gap, 0.0))


def lasso(A: MeasurementOperator, H, y, lam: float, weights=None,
          opts: Optional[SolverOptions] = None) -> SolverReport:
    """FISTA with adaptive restart; stops on the proximal-gradient fixed-point residual."""
    if lam < 0:
        raise ArgumentError(f"lambda must be nonnegative, got {lam}")
    opts = opts or SolverOptions()
    H = as_transform(H)
    y = np.asarray(y, dtype=complex)
    n = A.n
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)

    def B(c):
        return A.apply(H.adjoint(c))

    def Bt(q):
        return H.apply(A.adjoint(q))

    L = power_method(B, Bt, n, opts.power_iterations) / opts.step_safety
    step = 1.0 / (L * L)

    def objective(c):
        return 0.5 * float(np.linalg.norm(B(c) - y) ** 2) + lam * weighted_l1_norm(c, w)

    c = np.zeros(n, dtype=complex)
    v = c.copy()
    t = 1.0
    res = np.inf
    it = 0
    for it in range(1, opts.max_iter + 1):
        c_new = soft_threshold(v - step * Bt(B(v) - y), step * lam * w)
        fixed = soft_threshold(c_new - step * Bt(B(c_new) - y), step * lam * w)
        res = float(np.linalg.norm(fixed - c_new))
        if res <= opts.tol:
            c = c_new
            break
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        if np.real(np.vdot(v - c_new, c_new - c)) > 0:
            t_new = 1.0
            v = c_new
        else:
            v = c_new + ((t - 1.0) / t_new) * (c_new - c)
        c, t = c_new, t_new
    else:
        raise ConvergenceError(f"LASSO did not converge in {opts.max_iter} iterations (residual {res:.2e})",
                               last_iterate=H.adjoint(c), iterations=opts.max_iter)

    z = H.adjoint(c)
    return SolverReport(z, it, res, objective(c), float(np.linalg.norm(A.apply(z) - y)))


class LevelsTermError(NamedTuple):
    sigma: float
    support: np.ndarray


def best_levels_term_error(z, levels: LevelStructure, weighted: bool = True) -> LevelsTermError:
    """
    sigma_{s,M}(z): weighted l1 mass left after keeping the s_l largest entries
    of each level (ties broken toward the lower index).
    """
    z = np.asarray(z, dtype=complex)
    if z.shape != (levels.n,):
        raise SizeError(f"z has shape {z.shape}, levels expect ({levels.n},)")
    mag = np.abs(z)
    w = levels.weight_vector() if weighted else np.ones(levels.n)
    keep = []
    for (lo, hi), sl in zip(levels.sparsity_bounds, levels.local_sparsities):
        if sl:
            order = np.argsort(-mag[lo:hi], kind="stable")
            keep.extend((lo + order[:sl]).tolist())
    support = np.asarray(sorted(keep), dtype=np.int64)
    mask = np.ones(levels.n, dtype=bool)
    mask[support] = False
    return LevelsTermError(float(np.sum(w[mask] * mag[mask])), support)


def cs_decoder_phi(A: MeasurementOperator, H, y, M2: Sequence, levels: Optional[LevelStructure] = None,
                   opts: Optional[SolverOptions] = None) -> SolverReport:
    """QCBP with eta set to the exact distance from y to the finite set M2."""
    if len(M2) == 0:
        raise ArgumentError("M2 must be nonempty")
    y = np.asarray(y, dtype=complex)
    eta = min(float(np.linalg.norm(y - np.asarray(z))) for z in M2)
    weights = levels.weight_vector() if levels is not None else None
    return qcbp_weighted(QcbpProblem(A, y, eta, as_transform(H), weights), opts)


@dataclass
class RecoveryBoundReport:
    lhs: float
    rhs: float
    sigma: float
    eta: float
    holds: bool
    C: float = RECOVERY_C
    D: float = RECOVERY_D


def recovery_bound_check(x, x_hat, levels: LevelStructure, eta: float, H="haar") -> RecoveryBoundReport:
    """||x - x_hat|| <= (1 + r^(1/4)) (C sigma / sqrt(r s) + D eta)."""
    H = as_transform(H)
    x = np.asarray(x, dtype=complex)
    lhs = float(np.linalg.norm(x - np.asarray(x_hat, dtype=complex)))
    sigma = best_levels_term_error(H.apply(x), levels).sigma
    r, s = levels.r, max(levels.total_sparsity, 1)
    rhs = (1 + r ** 0.25) * (RECOVERY_C * sigma / np.sqrt(r * s) + RECOVERY_D * eta)
    return RecoveryBoundReport(lhs, float(rhs), sigma, float(eta), lhs <= rhs)


def _serialized_key(x: np.ndarray) -> tuple:
    arr = np.asarray(x, dtype=complex).ravel()
    return tuple(v for pair in zip(arr.real.tolist(), arr.imag.tolist()) for v in pair)


def data_consistent_select(S: Iterable, y, A: MeasurementOperator) -> np.ndarray:
    """argmin over S of ||A x - y||; exact ties go to the lexicographically smallest element."""
    candidates = [np.asarray(x, dtype=complex) for x in S]
    if not candidates:
        raise ArgumentError("candidate set must be nonempty")
    y = np.asarray(y, dtype=complex)
    scored = [(float(np.linalg.norm(A.apply(x) - y)), _serialized_key(x), i) for i, x in enumerate(candidates)]
    best = min(scored)
    return candidates[best[2]]
