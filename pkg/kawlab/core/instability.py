"""
Instability probes for reconstruction maps.

Everything here treats a reconstruction map as a black box y -> x_hat, with an
optional vector-Jacobian product. Probes return plain results; ProbeReport
writes them as a self-verifying report whose stored inequalities are
re-checked on load.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm as normal_dist

from kawlab.common.constants import SPSA_ALPHA, SPSA_GAMMA, TRIAL_BLOCK, TUMOR_NORM, cs_lipschitz_cap
from kawlab.common.errors import ArgumentError, SizeError, WitnessError
from kawlab.common.helpers import block_rng, parallel_map, real_inner, trial_blocks
from kawlab.common.models import SolverOptions
from kawlab.common.report import Report
from kawlab.core.cs_solver import QcbpProblem, as_transform, qcbp_weighted
from kawlab.core.operators import (
    LevelStructure,
    MeasurementOperator,
    frequency_order,
    kernel_projectors,
)
from kawlab.core.tensor_linalg import INVERSE, dft

logger = logging.getLogger(__name__)

Metric = Callable[[np.ndarray, np.ndarray], float]


def _l2(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)))


def _l1(a, b) -> float:
    return float(np.sum(np.abs(np.asarray(a) - np.asarray(b))))


def _linf(a, b) -> float:
    diff = np.abs(np.asarray(a) - np.asarray(b))
    return float(diff.max()) if diff.size else 0.0


METRICS: Dict[str, Metric] = {"l2": _l2, "l1": _l1, "linf": _linf}


def get_metric(metric: Union[str, Metric]) -> Metric:
    if callable(metric):
        return metric
    try:
        return METRICS[metric]
    except KeyError:
        raise ArgumentError(f"unknown metric {metric!r}; choose from {sorted(METRICS)}") from None


def _unit(v: np.ndarray) -> Optional[np.ndarray]:
    nrm = np.linalg.norm(v)
    return v / nrm if nrm > 0 else None


def _complex_normal(rng: np.random.Generator, size, std: float = 1.0) -> np.ndarray:
    return std * (rng.standard_normal(size) + 1j * rng.standard_normal(size))


class ReconstructionMap:
    """
    A map C^m -> C^n with an optional vector-Jacobian product.

    ``vjp(y, v)`` returns g with Re<g, dy> = Re<v, dPsi(y)[dy]>, i.e. the
    gradient of y -> Re<v, Psi(y)>.
    """

    def __init__(self, evaluator: Callable[[np.ndarray], np.ndarray], m: int, n: int,
                 vjp: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None, name: str = "map"):
        self.evaluator = evaluator
        self.vjp = vjp
        self.m = int(m)
        self.n = int(n)
        self.name = name

    @property
    def has_gradient(self) -> bool:
        return self.vjp is not None

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=complex)
        if y.shape[-1] != self.m:
            raise SizeError(f"{self.name} expects {self.m} measurements, got {y.shape[-1]}")
        return np.asarray(self.evaluator(y), dtype=complex)

    @classmethod
    def from_linear(cls, matrix, name: str = "linear") -> "ReconstructionMap":
        M = np.atleast_2d(np.asarray(matrix, dtype=complex))
        return cls(lambda y: y @ M.T, M.shape[1], M.shape[0], lambda y, v: v @ M.conj(), name)

    @classmethod
    def from_network(cls, reconstructor, name: Optional[str] = None) -> "ReconstructionMap":
        """Wrap a NetworkReconstructor (or anything with __call__, vjp, m, n)."""
        return cls(reconstructor, reconstructor.m, reconstructor.n, reconstructor.vjp,
                   name or getattr(reconstructor, "name", "network"))

    @classmethod
    def from_solver(cls, A: MeasurementOperator, H="haar", eta: float = 0.0,
                    levels: Optional[LevelStructure] = None, opts: Optional[SolverOptions] = None,
                    name: str = "qcbp") -> "ReconstructionMap":
        """Weighted QCBP decoder with a fixed eta; no gradient."""
        H = as_transform(H)
        weights = levels.weight_vector() if levels is not None else None

        def solve(y):
            return qcbp_weighted(QcbpProblem(A, y, eta, H, weights), opts).x_hat

        return cls(solve, A.m, A.n, None, name)

    @classmethod
    def pinv(cls, A: MeasurementOperator) -> "ReconstructionMap":
        return cls(A.pinv_apply, A.m, A.n, lambda y, v: _pinv_vjp(A, v), "pinv")

    def check_gradient(self, y, probes: int = 10, step: float = 1e-5, seed: int = 0) -> float:
        """Largest relative error of the VJP against central differences along random directions."""
        if self.vjp is None:
            raise ArgumentError(f"{self.name} has no gradient to check")
        y = np.asarray(y, dtype=complex)
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(probes):
            d = _unit(_complex_normal(rng, self.m))
            v = _complex_normal(rng, self.n)
            numeric = (real_inner(v, self(y + step * d)) - real_inner(v, self(y - step * d))) / (2 * step)
            analytic = real_inner(self.vjp(y, v), d)
            worst = max(worst, abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6))
        return worst


def _pinv_vjp(A: MeasurementOperator, v: np.ndarray) -> np.ndarray:
    if A.is_structured:
        return A.apply(v) / A.d ** 2
    return v @ np.linalg.pinv(A.to_dense()).conj()


def lipschitz_lower_bound(d_xxp: float, eta: float, eps: float) -> float:
    """(d(x, x') - 2 eta) / eps; values <= 0 are vacuous."""
    if eta <= 0:
        raise ArgumentError(f"eta must be positive, got {eta}")
    if eps < eta:
        raise ArgumentError(f"eps = {eps} must be at least eta = {eta}")
    return float((Fraction(d_xxp) - 2 * Fraction(eta)) / Fraction(eps))


@dataclass
class LipschitzEstimate:
    value: float
    perturbation: np.ndarray
    evaluations: int


def empirical_lipschitz(R: ReconstructionMap, y, eps: float, trials: int = 100, seed: int = 0,
                        seeds: Sequence = (), refine_steps: int = 50,
                        metric: Union[str, Metric] = "l2") -> LipschitzEstimate:
    """
    Lower bound on L^eps(R, y): the largest quotient d(R(y + d), R(y)) / ||d||
    over random d, half on the sphere ||d|| = eps and half at a uniform
    radius in (0, eps], the supplied ``seeds`` (scaled into the
    ball when longer than eps), and, if R has a gradient, a normalized
    gradient ascent on the sphere started from the best of those.
    """
    if eps <= 0:
        raise ArgumentError(f"eps must be positive, got {eps}")
    if trials < 1:
        raise ArgumentError(f"trials must be >= 1, got {trials}")
    dist = get_metric(metric)
    y = np.asarray(y, dtype=complex)
    base = R(y)
    evaluations = 1

    def quotient(d) -> float:
        nonlocal evaluations
        evaluations += 1
        return dist(R(y + d), base) / float(np.linalg.norm(d))

    candidates = []
    for s in seeds:
        s = np.asarray(s, dtype=complex)
        nrm = np.linalg.norm(s)
        if nrm > 0:
            candidates.append(s * min(1.0, eps / nrm))
    rng = np.random.default_rng(seed)
    for i in range(trials):
        radius = eps if i % 2 == 0 else eps * (1.0 - rng.uniform())
        candidates.append(radius * _unit(_complex_normal(rng, R.m)))

    best_q, best_d = -1.0, candidates[0]
    for d in candidates:
        q = quotient(d)
        if q > best_q:
            best_q, best_d = q, d

    if R.has_gradient and refine_steps > 0:
        d = best_d * (eps / np.linalg.norm(best_d))
        q = quotient(d)
        if q > best_q:
            best_q, best_d = q, d
        for _ in range(refine_steps):
            out = R(y + d)
            g = _unit(R.vjp(y + d, out - base))
            if g is None:
                break
            improved = False
            for t in (None, 1.0, 0.1):
                direction = g if t is None else d / eps + t * g
                step = _unit(direction)
                if step is None:
                    continue
                trial = eps * step
                qt = quotient(trial)
                if qt > best_q:
                    best_q, best_d, d, improved = qt, trial, trial, True
                    break
            if not improved:
                break
    logger.debug(f"{R.name}: empirical L^eps={best_q:.6g} at eps={eps:g} after {evaluations} evaluations")
    return LipschitzEstimate(float(max(best_q, 0.0)), best_d, evaluations)


@dataclass
class FalseWitness:
    """z = x' - x and e = A z, plus what R does with them when R is given."""

    x: np.ndarray
    x_prime: np.ndarray
    z: np.ndarray
    e: np.ndarray
    d1: float
    d2: float
    eta: Optional[float] = None
    positive_reconstruction: Optional[np.ndarray] = None
    negative_reconstruction: Optional[np.ndarray] = None
    false_positive: Optional[bool] = None
    false_negative: Optional[bool] = None

    @property
    def hypothesis_holds(self) -> bool:
        return self.eta is not None and self.d2 <= self.eta


def falsewitness(x, x_prime, A: MeasurementOperator, R: Optional[ReconstructionMap] = None,
                 eta: Optional[float] = None, metric: Union[str, Metric] = "l2") -> FalseWitness:
    """
    With R and eta given, flags whether d(R(Ax + e), x + z) <= eta (a false
    positive: the detail z appears) and d(R(Ax' - e), x) <= eta (a false
    negative: z disappears).
    """
    dist = get_metric(metric)
    x = np.asarray(x, dtype=complex)
    x_prime = np.asarray(x_prime, dtype=complex)
    if x.shape != (A.n,) or x_prime.shape != (A.n,):
        raise SizeError(f"signals must have shape ({A.n},)")
    z = x_prime - x
    e = A.apply(z)
    w = FalseWitness(x, x_prime, z, e, dist(np.zeros_like(z), z), dist(np.zeros_like(e), e), eta)
    if R is not None and eta is not None:
        y, y_prime = A.apply(x), A.apply(x_prime)
        w.positive_reconstruction = R(y + e)
        w.negative_reconstruction = R(y_prime - e)
        w.false_positive = dist(w.positive_reconstruction, x + z) <= eta
        w.false_negative = dist(w.negative_reconstruction, x) <= eta
    return w


@dataclass
class BallCertificate:
    r1: float
    r2: float
    sigma_min: float
    bound: Optional[float]
    existence_only: bool


def ball_certificate(A: MeasurementOperator, x, x_prime, r1: float, eta: float,
                     eps: Optional[float] = None, hypotheses_verified: bool = True) -> BallCertificate:
    """
    Measurement-ball radius r2 = sigma_min(A) r1 around Ax for a signal ball
    of radius r1 around x in N(A)^perp.

    The eta-conditions over the ball are the caller's to establish; without
    them the radius is reported as existence-only.
    """
    x = np.asarray(x, dtype=complex)
    kernel_part = kernel_projectors(A).project_kernel(x)
    if np.linalg.norm(kernel_part) > 1e-8 * max(np.linalg.norm(x), 1e-300):
        raise ArgumentError("x is not in the orthogonal complement of N(A)")
    if r1 <= 0:
        raise ArgumentError(f"r1 must be positive, got {r1}")
    smin = A.sigma_min()
    bound = None
    if eps is not None:
        gap = max(_l2(x_prime, x) - r1, 0.0)
        bound = (gap - 2 * eta) / eps
    return BallCertificate(float(r1), float(smin * r1), float(smin), bound, not hypotheses_verified)


def nullspace_perp_noise(A: MeasurementOperator, target_norm: float, seed: int = 0,
                         std: float = math.sqrt(10.0)) -> np.ndarray:
    """
    v = alpha A* e with e Gaussian in re/im (variance 10 each) and alpha set
    so that ||v|| = target_norm; v lies in N(A)^perp.
    """
    if A.kind != "fourier" or not np.allclose(A.d, 1.0):
        raise ArgumentError("null-space-orthogonal noise needs an unscaled subsampled Fourier operator")
    if target_norm < 0:
        raise ArgumentError(f"target norm must be nonnegative, got {target_norm}")
    rng = np.random.default_rng(seed)
    while True:
        v = A.adjoint(std * rng.standard_normal(A.m) + 1j * std * rng.standard_normal(A.m))
        nrm = np.linalg.norm(v)
        if nrm > 0:
            return v * (target_norm / nrm)


@dataclass
class AttackResult:
    perturbation: np.ndarray
    objective: float
    method: str
    space: str
    evaluations: int
    history: List[float] = field(default_factory=list)


def _project_radius(r: np.ndarray, radius: float) -> np.ndarray:
    nrm = np.linalg.norm(r)
    if nrm <= radius:
        return r
    r = r * (radius / nrm)
    # rounding can leave ||r|| a few ulps above the radius
    while np.linalg.norm(r) > radius:
        r = r * (1 - 1e-15)
    return r


def adversarial_search(R: ReconstructionMap, A: MeasurementOperator, x, radius: float, steps: int = 100,
                       seed: int = 0, space: str = "signal", method: Optional[str] = None,
                       witnesses: Sequence = (), restarts: int = 1) -> AttackResult:
    """
    Maximize ||R(A(x + r)) - x||^2 over ||r|| <= radius (space "signal"), or
    ||R(Ax + r) - x||^2 (space "measurement").

    Projected normalized gradient ascent when R has a gradient, SPSA
    otherwise. Known witnesses are evaluated first and used as starting
    points, so the result is never worse than the best of them.
    """
    if radius <= 0:
        raise ArgumentError(f"radius must be positive, got {radius}")
    if space not in ("signal", "measurement"):
        raise ArgumentError(f"attack space must be 'signal' or 'measurement', got {space!r}")
    method = method or ("pgd" if R.has_gradient else "spsa")
    if method == "pgd" and not R.has_gradient:
        raise ArgumentError(f"{R.name} has no gradient; use method 'spsa'")
    if method not in ("pgd", "spsa"):
        raise ArgumentError(f"unknown attack method {method!r}")
    x = np.asarray(x, dtype=complex)
    y = A.apply(x)
    dim = A.n if space == "signal" else A.m
    evaluations = 0

    def measure(r):
        return A.apply(x + r) if space == "signal" else y + r

    def objective(r) -> float:
        nonlocal evaluations
        evaluations += 1
        diff = R(measure(r)) - x
        return float(np.real(np.vdot(diff, diff)))

    def gradient(r) -> np.ndarray:
        yr = measure(r)
        g = 2 * R.vjp(yr, R(yr) - x)
        return A.adjoint(g) if space == "signal" else g

    rng = np.random.default_rng(seed)
    starts = [_project_radius(np.asarray(w, dtype=complex), radius) for w in witnesses]
    for _ in range(max(restarts, 1)):
        starts.append(_project_radius(radius * _unit(_complex_normal(rng, dim)), radius))

    best_r = np.zeros(dim, dtype=complex)
    best_f = objective(best_r)
    history = [best_f]
    for start in starts:
        f = objective(start)
        if f > best_f:
            best_r, best_f = start, f
    history.append(best_f)

    for start in starts:
        r = start
        if method == "pgd":
            alpha = 2.5 * radius / max(steps, 1)
            for _ in range(steps):
                g = _unit(gradient(r))
                if g is None:
                    break
                r = _project_radius(r + alpha * g, radius)
                f = objective(r)
                if f > best_f:
                    best_r, best_f = r, f
                history.append(best_f)
        else:
            a0 = 0.1 * radius
            c0 = 1e-3 * max(float(np.linalg.norm(x)), 1.0)
            for t in range(1, steps + 1):
                a_t = a0 / (t + 10) ** SPSA_ALPHA
                c_t = c0 / t ** SPSA_GAMMA
                delta = rng.choice([-1.0, 1.0], size=dim) + 1j * rng.choice([-1.0, 1.0], size=dim)
                ghat = (objective(r + c_t * delta) - objective(r - c_t * delta)) / (2 * c_t) * delta
                g = _unit(ghat)
                if g is None:
                    continue
                r = _project_radius(r + a_t * g, radius)
                f = objective(r)
                if f > best_f:
                    best_r, best_f = r, f
                history.append(best_f)
    logger.info(f"{method} attack on {R.name} ({space} space): objective {best_f:.6g} at radius {radius:g}")
    return AttackResult(best_r, best_f, method, space, evaluations, history)


@dataclass
class Estimate:
    successes: int
    trials: int
    low: float
    high: float

    @property
    def p(self) -> float:
        return self.successes / self.trials if self.trials else 0.0

    @property
    def width(self) -> float:
        return self.high - self.low


def wilson_interval(successes: int, trials: int, confidence: float = 0.95) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ArgumentError(f"trials must be positive, got {trials}")
    if not 0 <= successes <= trials:
        raise ArgumentError(f"successes {successes} outside 0..{trials}")
    z = float(normal_dist.ppf(0.5 + confidence / 2))
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _estimate(successes: int, trials: int) -> Estimate:
    lo, hi = wilson_interval(successes, trials)
    return Estimate(int(successes), int(trials), lo, hi)


@dataclass
class MonteCarloResult:
    lipschitz: Estimate
    false_positive: Estimate
    false_negative: Estimate
    conditional: Estimate
    bound: float
    eps: float
    seed: int
    noise_std: float

    def estimates(self) -> Dict[str, Estimate]:
        return {"p_lipschitz": self.lipschitz, "p_false_positive": self.false_positive,
                "p_false_negative": self.false_negative, "p_conditional": self.conditional}


def mc_instability_probability(R: ReconstructionMap, A: MeasurementOperator, x, z, eta: float,
                               noise_std: float, trials: int = 1000, seed: int = 0,
                               eps: Optional[float] = None, generic_std: Optional[float] = None,
                               metric: Union[str, Metric] = "l2",
                               block_size: int = TRIAL_BLOCK) -> MonteCarloResult:
    """
    Estimates, over generic noise e ~ CN(0, noise_std^2) per component:

      p_lipschitz       P(L^eps(R, Ax + e) >= (d(x, x + z) - 2 eta) / eps), tested with the
                        perturbation Az (a lower bound on L^eps)
      p_false_positive  P(d(R(Ax + e), x + z) <= eta)
      p_false_negative  P(d(R(A(x + z) + e), x) <= eta)
      p_conditional     P(d(R(Ax + Az + e2), x + z) <= eta) with the damaging part Az fixed and
                        generic e2 ~ CN(0, generic_std^2)

    Trials run in fixed blocks, each with its own seed stream, so results do
    not depend on the worker count.
    """
    if trials < 100:
        raise ArgumentError(f"need at least 100 trials, got {trials}")
    dist = get_metric(metric)
    x = np.asarray(x, dtype=complex)
    z = np.asarray(z, dtype=complex)
    y = A.apply(x)
    damage = A.apply(z)
    damage_norm = float(np.linalg.norm(damage))
    eps = eps if eps is not None else max(damage_norm, eta)
    bound = lipschitz_lower_bound(dist(x, x + z), eta, eps)
    generic_std = noise_std if generic_std is None else generic_std
    sigma = noise_std / math.sqrt(2)
    sigma2 = generic_std / math.sqrt(2)

    def run_block(args) -> Tuple[int, int, int, int]:
        block, rows = args
        rng = block_rng(seed, block)
        counts = [0, 0, 0, 0]
        for _ in rows:
            e = _complex_normal(rng, A.m, sigma)
            e2 = _complex_normal(rng, A.m, sigma2)
            base = R(y + e)
            if 0 < damage_norm <= eps:
                q = dist(R(y + e + damage), base) / damage_norm
                counts[0] += q >= bound
            counts[1] += dist(base, x + z) <= eta
            counts[2] += dist(R(y + damage + e), x) <= eta
            counts[3] += dist(R(y + damage + e2), x + z) <= eta
        return tuple(counts)

    blocks = list(enumerate(trial_blocks(trials, block_size)))
    totals = np.sum(np.asarray(parallel_map(run_block, blocks), dtype=np.int64), axis=0)
    result = MonteCarloResult(_estimate(totals[0], trials), _estimate(totals[1], trials),
                              _estimate(totals[2], trials), _estimate(totals[3], trials),
                              bound, float(eps), seed, float(noise_std))
    logger.info(", ".join(f"{k}={v.p:.3f} [{v.low:.3f}, {v.high:.3f}]" for k, v in result.estimates().items()))
    return result


@dataclass
class TumorSignal:
    z: np.ndarray
    norm: float
    measurement_norm: float
    support_width: int
    band: np.ndarray


def _high_band(sampled: np.ndarray, width: int, strict: bool) -> np.ndarray:
    """Highest contiguous run of ``width`` ordered positions (unsampled ones only when strict)."""
    n = sampled.size
    for end in range(n, width - 1, -1):
        band = np.arange(end - width, end)
        if not strict or not sampled[band].any():
            return band
    raise ArgumentError(f"no unsampled band of width {width}")


def tumor_signal(A: MeasurementOperator, width: int = 16, center: Optional[int] = None,
                 norm: float = TUMOR_NORM, leakage: float = 0.0, seed: int = 0) -> TumorSignal:
    """
    A localized detail z = F* c with c on a contiguous high-frequency band.

    With ``leakage = 0`` the band avoids every sampled row, so Az vanishes; a
    positive leakage lets the band overlap sampled rows with their
    coefficients scaled by ``leakage``. The Hann-windowed band is modulated
    to centre z at sample ``center``.
    """
    if A.kind != "fourier":
        raise ArgumentError("tumour signals are built for Fourier operators")
    n = A.n
    if A.m >= n and leakage == 0:
        raise ArgumentError("every frequency is sampled")
    if not 1 <= width <= n:
        raise ArgumentError(f"band width must lie in 1..{n}, got {width}")
    sampled = np.zeros(n, dtype=bool)
    sampled[A.rows] = True
    band = _high_band(sampled, width, strict=leakage == 0)
    rng = np.random.default_rng(seed)
    center = int(rng.integers(n)) if center is None else int(center) % n

    bins = frequency_order(n)[band]
    window = np.hanning(width + 2)[1:-1]
    weights = np.where(sampled[band], leakage, 1.0) * window
    coeffs = np.zeros(n, dtype=complex)
    coeffs[bins] = weights * np.exp(-2j * np.pi * bins * center / n)
    z = dft(coeffs, INVERSE)
    nrm = np.linalg.norm(z)
    if nrm == 0:
        raise ArgumentError("tumour band carries no energy")
    z = z * (norm / nrm)
    mag = np.abs(z)
    support_width = int(np.count_nonzero(mag >= 0.05 * mag.max()))
    measurement_norm = float(np.linalg.norm(A.apply(z)))
    logger.info(f"Tumour: ||z||={norm:g}, ||Az||={measurement_norm:.3e}, width {support_width} samples")
    return TumorSignal(z, float(norm), measurement_norm, support_width, band)


@dataclass
class OverperformanceDomain:
    domain: List[np.ndarray]
    z: np.ndarray
    z1: np.ndarray
    kappa: float
    p: float
    cs_lipschitz_cap: float

    def predicted_network_lipschitz(self, eps: float) -> float:
        """1/eps for eps >= 1/p."""
        if eps < 1 / self.p:
            raise ArgumentError(f"prediction holds for eps >= 1/p = {1 / self.p:g}")
        return 1 / eps


def overperformance_domain(levels: LevelStructure, k: int, p: float, base_domain: Sequence,
                           seed: int = 0, H="haar") -> OverperformanceDomain:
    """
    M1~ = M1 u {0, z} with z = z1 + (kappa / ||z2||) z2, z1 = H* c for a unit c
    supported in sparsity level k (0-based, s_k = 0), z2 the first nonzero
    element of M1 and kappa = (1 - 2/p) / (2p).
    """
    if not 0 <= k < levels.r:
        raise ArgumentError(f"level index {k} outside 0..{levels.r - 1}")
    if levels.local_sparsities[k] != 0:
        raise ArgumentError(f"level {k} is not vanishing (s = {levels.local_sparsities[k]})")
    if p <= 2:
        raise ArgumentError(f"p must exceed 2, got {p}")
    H = as_transform(H)
    base = [np.asarray(v, dtype=complex) for v in base_domain]
    z2 = next((v for v in base if np.linalg.norm(v) > 0), None)
    if z2 is None:
        raise ArgumentError("base domain needs a nonzero element")
    lo, hi = levels.sparsity_bounds[k]
    rng = np.random.default_rng(seed)
    c = np.zeros(levels.n, dtype=complex)
    c[lo:hi] = _unit(_complex_normal(rng, hi - lo))
    z1 = H.adjoint(c)
    kappa = (1 - 2 / p) / (2 * p)
    z = z1 + (kappa / np.linalg.norm(z2)) * z2
    domain = base + [np.zeros(levels.n, dtype=complex), z]
    return OverperformanceDomain(domain, z, z1, kappa, float(p), cs_lipschitz_cap(levels.r))


@dataclass
class DestabilizingPair:
    x_first: np.ndarray
    x_second: np.ndarray
    z1: np.ndarray
    z2: np.ndarray
    beta: float
    gamma: float


def destabilizing_pair(A: MeasurementOperator, training_xs: Sequence, gamma: float,
                       seed: int = 0) -> DestabilizingPair:
    """
    x_{K+1} = x_1 + z1 and x_{K+2} = x_2 + z2 where
    z1 = sqrt(gamma^2 - beta^2) u + beta v (u in N(A), v in N(A)^perp, unit),
    beta = gamma^2 / (2 ||A||), and z2 in N(A) with ||z2|| = gamma / 4.
    """
    if not 0 < gamma < 1:
        raise ArgumentError(f"gamma must lie in (0, 1), got {gamma}")
    xs = [np.asarray(v, dtype=complex) for v in training_xs]
    if not xs:
        raise ArgumentError("need at least one training signal")
    proj = kernel_projectors(A)
    rng = np.random.default_rng(seed)

    def draw(project) -> np.ndarray:
        for _ in range(100):
            v = _unit(project(_complex_normal(rng, A.n)))
            if v is not None and np.linalg.norm(v) > 0.5:
                return v
        raise ArgumentError("N(A) is trivial")

    u = draw(proj.project_kernel)
    v = draw(proj.project_cokernel)
    u2 = draw(proj.project_kernel)
    beta = gamma ** 2 / (2 * A.norm())
    if beta >= gamma:
        raise ArgumentError(f"||A|| = {A.norm():g} too small for gamma = {gamma}")
    z1 = math.sqrt(gamma ** 2 - beta ** 2) * u + beta * v
    z2 = (gamma / 4) * u2
    x1 = xs[0]
    x2 = xs[1] if len(xs) > 1 else xs[0]

    checks = {
        "||z1|| = gamma": abs(np.linalg.norm(z1) - gamma),
        "||z2|| = gamma/4": abs(np.linalg.norm(z2) - gamma / 4),
        "A z2 = 0": np.linalg.norm(A.apply(z2)),
    }
    az1 = np.linalg.norm(A.apply(z1))
    for name, err in checks.items():
        if err > 1e-10:
            raise WitnessError(f"destabilizing pair check failed: {name} (error {err:.2e})")
    if not 0 < az1 <= gamma ** 2 / 2 + 1e-10:
        raise WitnessError(f"||A z1|| = {az1:.3e} outside (0, gamma^2/2]")
    return DestabilizingPair(x1 + z1, x2 + z2, z1, z2, float(beta), float(gamma))


def consistency_residual(R: ReconstructionMap, A: MeasurementOperator, X: Sequence) -> float:
    """max over x in X of ||A R(Ax) - Ax||."""
    worst = 0.0
    for x in X:
        y = A.apply(np.asarray(x, dtype=complex))
        worst = max(worst, float(np.linalg.norm(A.apply(R(y)) - y)))
    return worst


class ProbeReport(Report):
    """Report of kind "probe" with helpers for witnesses and estimates."""

    def __init__(self, kind: str = "probe"):
        super().__init__(kind)

    def add_lipschitz_formula(self, d_xxp: float, eta: float, eps: float) -> "ProbeReport":
        value = lipschitz_lower_bound(d_xxp, eta, eps)
        self.set("d_xxp", d_xxp).set("eta", eta).set("eps", eps).set("lipschitz_lower", value)
        self.add_check("lipschitz_formula", "key(lipschitz_lower)", "==",
                       "(key(d_xxp) - 2 * key(eta)) / key(eps)", 1e-9 * max(1.0, abs(value)))
        return self

    def add_witness(self, w: FalseWitness) -> "ProbeReport":
        self.add_vector("z", w.z).add_vector("e", w.e)
        self.set("witness_d1", w.d1).set("witness_d2", w.d2)
        self.add_check("witness_z_norm", "norm(z)", "==", "key(witness_d1)", 1e-9 * max(1.0, w.d1))
        self.add_check("witness_e_norm", "norm(e)", "==", "key(witness_d2)", 1e-9 * max(1.0, w.d2))
        if w.eta is None:
            return self
        self.set("witness_eta", w.eta)
        self.set("witness_hypothesis", w.hypothesis_holds)
        if w.hypothesis_holds:
            self.add_check("witness_e_within_eta", "norm(e)", "<=", "key(witness_eta)", 1e-12)
        if w.false_positive is not None:
            self.set("false_positive", w.false_positive).set("false_negative", w.false_negative)
            self.add_vector("x_plus_z", w.x + w.z).add_vector("x", w.x)
            self.add_vector("fp_reconstruction", w.positive_reconstruction)
            self.add_vector("fn_reconstruction", w.negative_reconstruction)
            if w.false_positive:
                self.add_check("false_positive", "dist(fp_reconstruction, x_plus_z)", "<=", "key(witness_eta)", 1e-12)
            if w.false_negative:
                self.add_check("false_negative", "dist(fn_reconstruction, x)", "<=", "key(witness_eta)", 1e-12)
        return self

    def add_estimate(self, name: str, est: Estimate) -> "ProbeReport":
        self.set(f"{name}", est.p).set(f"{name}_low", est.low).set(f"{name}_high", est.high)
        self.set(f"{name}_successes", est.successes).set(f"{name}_trials", est.trials)
        self.add_check(f"{name}_value", f"key({name})", "==", f"key({name}_successes) / key({name}_trials)", 1e-12)
        self.add_check(f"{name}_interval_low", f"key({name}_low)", "<=", f"key({name})", 1e-12)
        self.add_check(f"{name}_interval_high", f"key({name})", "<=", f"key({name}_high)", 1e-12)
        return self

    def add_monte_carlo(self, mc: MonteCarloResult) -> "ProbeReport":
        self.set("mc_seed", mc.seed).set("mc_noise_std", mc.noise_std)
        self.set("mc_bound", mc.bound).set("mc_eps", mc.eps)
        for name, est in mc.estimates().items():
            self.add_estimate(name, est)
        return self

    def add_empirical(self, est: LipschitzEstimate, eps: float, name: str = "empirical_lipschitz") -> "ProbeReport":
        self.set(name, est.value).set(f"{name}_eps", eps).set(f"{name}_evaluations", est.evaluations)
        self.add_vector(f"{name}_perturbation", est.perturbation)
        self.add_check(f"{name}_in_ball", f"norm({name}_perturbation)", "<=", f"key({name}_eps)", 1e-12 * max(1.0, eps))
        return self

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path: Union[str, Path]) -> "ProbeReport":
        return cls.from_text(Path(path).read_text(), verify=True)
