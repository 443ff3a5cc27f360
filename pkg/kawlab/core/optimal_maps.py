"""
Optimality constants, fibers and end-to-end demonstrations.

A finite domain M1 is grouped into fibers of equal measurements. The best
worst-case error any reconstruction map can reach on M1 is the largest
fiber radius; the demonstrations below build domains and training sets on
which trained or constructed networks miss that optimum, and write the
evidence into reports whose inequalities are re-checked on load.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from kawlab.common.constants import FIBER_TOLERANCE, cs_lipschitz_cap
from kawlab.common.errors import ArgumentError, SizeError, WitnessError
from kawlab.common.models import SolverOptions, TrainConfig
from kawlab.common.report import Report
from kawlab.core.certify import ripl_constant, ripl_orders
from kawlab.core.cs_solver import as_transform, cs_decoder_phi
from kawlab.core.instability import (
    Metric,
    ReconstructionMap,
    destabilizing_pair,
    empirical_lipschitz,
    get_metric,
    overperformance_domain,
)
from kawlab.core.neural import (
    NetworkReconstructor,
    build_mlp,
    complex_training_pairs,
    corrected_decoder_network,
    interpolatory_network,
    pinv_decoder_network,
    train,
)
from kawlab.core.operators import (
    LevelStructure,
    MeasurementOperator,
    draw_multilevel_scheme,
    dyadic_levels,
    kernel_projectors,
    random_sparse_in_levels,
    random_unit,
    walsh_budgets,
)
from kawlab.core.tensor_linalg import min_enclosing_ball

logger = logging.getLogger(__name__)

EXACT_DOMAIN_CAP = 64
CODOMAINS = ("ambient", "restricted")


def _as_points(points: Sequence) -> List[np.ndarray]:
    return [np.asarray(p, dtype=complex).ravel() for p in points]


def hausdorff(X: Sequence, Z: Sequence, metric: Union[str, Metric] = "l2") -> float:
    """max(sup_x inf_z d(x, z), sup_z inf_x d(x, z)) over two finite sets."""
    X, Z = _as_points(X), _as_points(Z)
    if not X or not Z:
        raise ArgumentError("Hausdorff distance needs two nonempty sets")
    dist = get_metric(metric)
    table = np.array([[dist(x, z) for z in Z] for x in X])
    return float(max(table.min(axis=1).max(), table.min(axis=0).max()))


def sup_error(R, A: MeasurementOperator, domain: Sequence, metric: Union[str, Metric] = "l2") -> float:
    """max over x in the domain of d(R(Ax), x)."""
    dist = get_metric(metric)
    return max(dist(R(A.apply(x)), x) for x in _as_points(domain))


@dataclass
class FiberPartition:
    """
    Domain indices grouped by measurement.

    ``measurements[g]`` is the measurement of the first member of group g.
    Members of a group are within ``tau`` of each other; distinct groups are
    further apart than ``tau``.
    """

    groups: List[List[int]]
    measurements: np.ndarray
    tau: float

    @classmethod
    def from_points(cls, Y: Sequence, tau: float = FIBER_TOLERANCE) -> "FiberPartition":
        """Single-linkage grouping of the vectors in Y at distance tau."""
        Y = np.atleast_2d(np.asarray(Y, dtype=complex))
        k = Y.shape[0]
        if k == 0:
            raise ArgumentError("cannot partition an empty set")
        parent = list(range(k))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        dists = np.linalg.norm(Y[:, None, :] - Y[None, :, :], axis=2)
        for i in range(k):
            for j in range(i + 1, k):
                if dists[i, j] <= tau:
                    parent[find(j)] = find(i)
        roots: dict = {}
        for i in range(k):
            roots.setdefault(find(i), []).append(i)
        groups = sorted(roots.values(), key=lambda g: g[0])
        for g in groups:
            if len(g) > 1 and dists[np.ix_(g, g)].max() > tau:
                raise ArgumentError(f"measurements chain across tau = {tau:g}; fibers are not separated")
        return cls(groups, Y[[g[0] for g in groups]], float(tau))

    @classmethod
    def build(cls, A: MeasurementOperator, domain: Sequence, tau: float = FIBER_TOLERANCE) -> "FiberPartition":
        points = _as_points(domain)
        if not points:
            raise ArgumentError("domain is empty")
        return cls.from_points(A.apply(np.asarray(points)), tau)

    def __len__(self) -> int:
        return len(self.groups)

    def lookup(self, y) -> Optional[int]:
        """Group whose measurement lies within tau of y, if any."""
        d = np.linalg.norm(self.measurements - np.asarray(y, dtype=complex)[None, :], axis=1)
        g = int(np.argmin(d))
        return g if d[g] <= self.tau else None


@dataclass
class OptimalityResult:
    c_opt: float
    codomain: str
    partition: FiberPartition
    centers: List[np.ndarray]
    radii: List[float]

    def witness(self, y) -> np.ndarray:
        """The witness map: measurement -> center of its fiber."""
        g = self.partition.lookup(y)
        if g is None:
            raise ArgumentError("measurement does not belong to the domain's image")
        return self.centers[g]

    def sup_error(self, domain: Sequence) -> float:
        points = _as_points(domain)
        return max(float(np.linalg.norm(self.centers[g] - points[i]))
                   for g, members in enumerate(self.partition.groups) for i in members)

    def witness_rows(self) -> List[List]:
        return [[g, len(members), radius, float(np.linalg.norm(self.partition.measurements[g]))]
                for g, (members, radius) in enumerate(zip(self.partition.groups, self.radii))]


def optimality_constant(A: MeasurementOperator, domain: Sequence, codomain: str = "ambient",
                        tau: float = FIBER_TOLERANCE, cap: int = EXACT_DOMAIN_CAP) -> OptimalityResult:
    """
    c_opt(A, M1) for a finite domain.

    ``ambient``: each fiber maps to the center of its minimum enclosing ball.
    ``restricted``: each fiber maps to the best single point of M1.
    """
    if codomain not in CODOMAINS:
        raise ArgumentError(f"codomain must be one of {CODOMAINS}, got {codomain!r}")
    points = _as_points(domain)
    if len(points) > cap:
        raise SizeError(f"domain of {len(points)} points exceeds the exact-mode cap {cap}")
    partition = FiberPartition.build(A, points, tau)
    centers, radii = [], []
    for members in partition.groups:
        fiber = [points[i] for i in members]
        if codomain == "ambient":
            ball = min_enclosing_ball(fiber)
            centers.append(ball.center)
            radii.append(float(ball.radius))
        else:
            costs = [max(float(np.linalg.norm(c - x)) for x in fiber) for c in points]
            best = int(np.argmin(costs))
            centers.append(points[best].copy())
            radii.append(costs[best])
    c_opt = max(radii)
    logger.info(f"c_opt={c_opt:.6g} ({codomain}) over {len(partition)} fibers of {len(points)} points")
    return OptimalityResult(float(c_opt), codomain, partition, centers, radii)


def _interpolant_map(pairs: Sequence[Tuple], seed: int, name: str) -> ReconstructionMap:
    net = interpolatory_network(pairs, seed=seed)
    return ReconstructionMap.from_network(NetworkReconstructor(net, name=name))


def empirical_minimizer_network(A: MeasurementOperator, xs: Sequence, tau: float = FIBER_TOLERANCE,
                                seed: int = 0) -> ReconstructionMap:
    """
    A network minimizing the mean squared training loss on {(Ax, x)}.

    Training inputs that coincide within tau share one output, the mean of
    their targets; every other input is interpolated exactly.
    """
    points = _as_points(xs)
    partition = FiberPartition.build(A, points, tau)
    pairs = []
    for g, members in enumerate(partition.groups):
        target = np.mean([points[i] for i in members], axis=0)
        pairs.append((partition.measurements[g], target))
    return _interpolant_map(pairs, seed, "empirical-minimizer")


def _trained_map(A: MeasurementOperator, xs: Sequence, cfg: TrainConfig, widths: Sequence[int]) -> Tuple:
    Y, X = complex_training_pairs(A, xs)
    net = build_mlp(Y.shape[1], widths, X.shape[1], seed=cfg.seed)
    result = train(net, Y, X, cfg)
    return ReconstructionMap.from_network(NetworkReconstructor(result.net, name="trained")), result


def demo_not_optimal(A: MeasurementOperator, K: int = 2, delta: float = 0.2, seed: int = 0,
                     phase: float = 0.0, train_cfg: Optional[TrainConfig] = None,
                     hidden: Sequence[int] = (64,)) -> Report:
    """
    M1 = {x1 + z1, x1, ..., xK} with x_j in N(A)^perp, ||x1|| = 1/2,
    0 < ||x_j|| <= 1 and z1 in N(A), ||z1|| = 1/2; training pairs (A x_j, x_j).

    Any map fitting the training pairs to delta has sup error at least
    1/2 - delta >= 3/10 on M1, while c_opt = 1/4; and c_opt > delta means no
    map fits all of M2 x M1 to delta. Both an exact interpolatory network
    and, with ``train_cfg``, a gradient-trained network are measured.
    """
    if K < 2:
        raise ArgumentError(f"need K >= 2 training pairs, got {K}")
    if not 0 < delta <= 0.2:
        raise ArgumentError(f"delta must lie in (0, 1/5], got {delta}")
    proj = kernel_projectors(A)
    rng = np.random.default_rng(seed)
    rot = np.exp(1j * phase)
    x1 = 0.5 * random_unit(proj.project_cokernel, rng, A.n)
    z1 = 0.5 * random_unit(proj.project_kernel, rng, A.n)
    xs = [x1]
    for _ in range(K - 1):
        xs.append(rng.uniform(0.25, 1.0) * random_unit(proj.project_cokernel, rng, A.n))
    xs = [rot * x for x in xs]
    x1, z1 = rot * x1, rot * z1
    domain = [x1 + z1] + xs

    opt = optimality_constant(A, domain)
    if len(opt.partition) != K:
        raise WitnessError(f"expected {K} fibers, found {len(opt.partition)}")
    interp = _interpolant_map([(A.apply(x), x) for x in xs], seed, "interpolatory")
    fit = max(float(np.linalg.norm(interp(A.apply(x)) - x)) for x in xs)
    err = sup_error(interp, A, domain)

    report = Report("thm-not-optimal")
    report.set("K", K).set("delta", delta).set("seed", seed).set("phase", phase)
    report.set("z1_norm", float(np.linalg.norm(z1))).set("x1_norm", float(np.linalg.norm(x1)))
    report.set("kernel_residual", float(np.linalg.norm(A.apply(z1))))
    report.set("c_opt", opt.c_opt).set("witness_sup_error", opt.sup_error(domain))
    report.set("interp_fit", fit).set("interp_sup_error", err)
    report.add_check("c_opt_quarter", "key(c_opt)", "==", 0.25, 1e-9)
    report.add_check("witness_attains_c_opt", "key(witness_sup_error)", "<=", "key(c_opt)", 1e-8)
    report.add_check("fit_bound_beats_c_opt", "key(z1_norm) - key(delta)", ">=", 0.3, 1e-12)
    report.add_check("no_full_fit", "key(c_opt) - key(delta)", ">=", 0.05, 1e-12)
    report.add_check("interp_fits", "key(interp_fit)", "<=", "key(delta)")
    report.add_check("interp_not_optimal", "key(interp_sup_error)", ">=", 0.3, 1e-6)

    if train_cfg is not None:
        trained, result = _trained_map(A, xs, train_cfg, hidden)
        t_fit = max(float(np.linalg.norm(trained(A.apply(x)) - x)) for x in xs)
        report.set("trained_fit", t_fit).set("trained_sup_error", sup_error(trained, A, domain))
        report.set("trained_epochs", result.epochs)
        report.add_check("trained_error_floor", "key(trained_sup_error)", ">=",
                         "key(z1_norm) - key(trained_fit)", 1e-9)
        report.add_check("trained_at_least_c_opt", "key(trained_sup_error)", ">=", "key(c_opt)", 1e-9)
        report.add_check("trained_not_optimal", "key(trained_sup_error) + max(key(trained_fit) - key(delta), 0)",
                         ">=", 0.3, 1e-6)
        report.add_table("trained_loss", ["epoch", "loss"], [[i, v] for i, v in enumerate(result.losses, 1)])

    report.add_table("domain", ["index", "norm", "measurement_norm", "fiber"],
                     [[i, float(np.linalg.norm(x)), float(np.linalg.norm(A.apply(x))),
                       next(g for g, m in enumerate(opt.partition.groups) if i in m)]
                      for i, x in enumerate(domain)])
    report.add_table("fibers", ["fiber", "size", "radius", "measurement_norm"], opt.witness_rows())
    logger.info(f"not-optimal demo: c_opt={opt.c_opt:.4f}, interpolant sup error {err:.4f}")
    return report


def _training_loss(R, pairs: Sequence[Tuple]) -> float:
    """(1/|T|) sum 1/2 ||x - R(y)||^2."""
    return float(np.mean([0.5 * np.linalg.norm(np.asarray(x) - R(y)) ** 2 for y, x in pairs]))


def _network_map(net, name: str) -> ReconstructionMap:
    return ReconstructionMap.from_network(NetworkReconstructor(net, name=name))


def lambda_sensitivity_demo(kind: str = "fourier", N: int = 8, K: int = 4, seed: int = 0,
                            x_norm: float = 0.5, scales: Sequence[float] = (0.5, 1.0, 2.0)) -> Report:
    """
    Two sampling patterns Omega~ and Omega = Omega~ u {j} and one domain
    M1 in N(A~)^perp with a special pair (y_hat, x_hat): y_hat is supported
    on the single coordinate i. The pseudoinverse decoder fits the training
    set exactly, so lambda = 0 is optimal.

    With x in N(A~) n N(A)^perp and z = x_hat + x: replacing (y_hat, x_hat)
    by (y_hat, z) lets a corrected decoder fit exactly while missing x_hat
    by ||x||; adding (y_hat, z) lets a midpoint decoder reach loss
    ||x||^2 / (4|T~|) below the ||x||^2 / (2|T~|) of every optimal map.
    Under Omega the A-pseudoinverse decoder still fits any multiples of z.
    """
    if N < 4:
        raise ArgumentError(f"need N >= 4, got {N}")
    if K < 2:
        raise ArgumentError(f"need K >= 2 domain elements, got {K}")
    if x_norm <= 0:
        raise ArgumentError(f"x_norm must be positive, got {x_norm}")
    rng = np.random.default_rng(seed)
    size = int(rng.integers(2, N - 1))
    perm = rng.permutation(N)
    omega_t = np.sort(perm[:size])
    j = int(perm[size])
    omega = np.sort(np.append(omega_t, j))
    A_t = MeasurementOperator.structured(kind, N, omega_t)
    A = MeasurementOperator.structured(kind, N, omega)
    m_t = A_t.m
    i = int(rng.integers(0, m_t))

    y_hat = np.zeros(m_t, dtype=complex)
    y_hat[i] = rng.uniform(0.5, 1.5) * np.exp(2j * np.pi * rng.uniform())
    x_hat = A_t.pinv_apply(y_hat)
    domain = [x_hat]
    for _ in range(K - 1):
        y = rng.standard_normal(m_t) + 1j * rng.standard_normal(m_t)
        y[i] = 0.0
        y *= rng.uniform(0.25, 1.0) / np.linalg.norm(y)
        domain.append(A_t.pinv_apply(y))
    pairs_t = [(A_t.apply(x), x) for x in domain]

    x = x_norm * A.ordered_inverse(_row_indicator(A, j))
    z = x_hat + x

    pinv_t = _network_map(pinv_decoder_network(A_t), "pinv-tilde")
    replace_net = _network_map(corrected_decoder_network(A_t, i, y_hat, z), "replacement")
    midpoint_net = _network_map(corrected_decoder_network(A_t, i, y_hat, x_hat + 0.5 * x), "midpoint")
    pinv_a = _network_map(pinv_decoder_network(A), "pinv")

    replaced = [(y_hat, z)] + pairs_t[1:]
    added = pairs_t + [(y_hat, z)]
    size_added = len(added)
    pairs_a = [(A.apply(v), v) for v in domain] + [(A.apply(c * z), c * z) for c in scales]

    report = Report("thm-lambda")
    report.set("kind", kind).set("N", N).set("K", K).set("seed", seed)
    report.set("omega_tilde", " ".join(str(int(v)) for v in omega_t)).set("j", j).set("i", i)
    report.set("x_norm", float(np.linalg.norm(x)))
    report.set("x_in_kernel_tilde", float(np.linalg.norm(A_t.apply(x))))
    report.set("x_off_kernel", float(np.linalg.norm(x - A.pinv_apply(A.apply(x)))))
    report.set("pinv_loss", _training_loss(pinv_t, pairs_t))
    report.set("pinv_sup_error", sup_error(pinv_t, A_t, domain))
    report.set("replacement_loss", _training_loss(replace_net, replaced))
    report.set("replacement_sup_error", sup_error(replace_net, A_t, domain))
    report.set("T_added", size_added)
    report.set("midpoint_loss", _training_loss(midpoint_net, added))
    report.set("optimal_loss", _training_loss(pinv_t, added))
    report.set("omega_pinv_loss", _training_loss(pinv_a, pairs_a))
    report.set("omega_pinv_sup_error", sup_error(pinv_a, A, domain + [c * z for c in scales]))

    report.add_check("x_in_kernel_tilde", "key(x_in_kernel_tilde)", "<=", 0, 1e-9)
    report.add_check("x_off_kernel", "key(x_off_kernel)", "<=", 0, 1e-9)
    report.add_check("lambda0_zero_loss", "key(pinv_loss)", "<=", 0, 1e-9)
    report.add_check("lambda0_optimal", "key(pinv_sup_error)", "<=", 0, 1e-9)
    report.add_check("replacement_zero_loss", "key(replacement_loss)", "<=", 0, 1e-9)
    report.add_check("replacement_misses", "key(replacement_sup_error)", "==", "key(x_norm)", 1e-9)
    report.add_check("midpoint_loss_value", "key(midpoint_loss)", "==", "key(x_norm)**2 / (4*key(T_added))", 1e-9)
    report.add_check("optimal_loss_value", "key(optimal_loss)", "==", "key(x_norm)**2 / (2*key(T_added))", 1e-9)
    report.add_check("midpoint_beats_optimal", "key(optimal_loss) - key(midpoint_loss)", ">=",
                     "key(x_norm)**2 / (4*key(T_added))", 1e-9)
    report.add_check("omega_zero_loss", "key(omega_pinv_loss)", "<=", 0, 1e-9)
    report.add_check("omega_optimal", "key(omega_pinv_sup_error)", "<=", 0, 1e-9)
    report.add_table("losses", ["case", "loss", "pairs"], [
        ["pinv_tilde", report.get("pinv_loss"), len(pairs_t)],
        ["replacement", report.get("replacement_loss"), len(replaced)],
        ["midpoint_added", report.get("midpoint_loss"), size_added],
        ["optimal_added", report.get("optimal_loss"), size_added],
        ["pinv_omega", report.get("omega_pinv_loss"), len(pairs_a)],
    ])
    logger.info(f"lambda demo: |Omega~|={size}, j={j}, ||x||={np.linalg.norm(x):.4f}")
    return report


def _row_indicator(A: MeasurementOperator, row: int) -> np.ndarray:
    """Full-length coefficient vector with a single 1 at ordered transform row ``row``."""
    c = np.zeros(A.n, dtype=complex)
    c[row] = 1.0
    return c


def _certified_walsh_operator(levels: LevelStructure, nu: float, C: float, seed: int, retries: int) -> Tuple:
    budgets = walsh_budgets(levels.local_sparsities, levels.sampling_levels, nu, C)
    t = ripl_orders(levels)
    cert, A, used = None, None, seed
    for attempt in range(retries + 1):
        used = seed + attempt
        scheme = draw_multilevel_scheme(budgets, levels.sampling_levels, used)
        A = MeasurementOperator.from_scheme("walsh", scheme)
        try:
            cert = ripl_constant(A, "haar", levels, t)
        except SizeError:
            cert = ripl_constant(A, "haar", levels, t, mode=("sampled", 2000), seed=used)
        if cert.certifies(0.5):
            break
        logger.warning(f"RIPL delta={cert.delta:.3f} > 1/2 with seed {used}, redrawing")
    return A, cert, budgets, used, attempt + 1


def dl_vs_cs_demo(r: int = 6, k: int = 0, s: Optional[Sequence[int]] = None, p: float = 4.0,
                  nu: float = 0.5, C: float = 1.0, seed: int = 0, domain_size: int = 6,
                  retries: int = 3, trials: int = 8, opts: Optional[SolverOptions] = None,
                  train_cfg: Optional[TrainConfig] = None, hidden: Sequence[int] = (128,)) -> Report:
    """
    Walsh sampling at the sparsity-in-levels budgets with s_k = 0, so level
    k is never sampled. The weighted QCBP decoder recovers M1 and keeps a
    bounded Lipschitz constant; on M1~ = M1 u {0, z} a network fitting all
    pairs to 1/p is p times closer to optimal, but its Lipschitz constant at
    0 is at least p.
    """
    if s is None:
        s = [0 if l == k else 1 for l in range(r)]
    levels = LevelStructure.dyadic(r, s)
    if levels.local_sparsities[k] != 0:
        raise ArgumentError(f"level {k} must be vanishing, got s = {levels.local_sparsities[k]}")
    opts = opts or SolverOptions(tol=1e-8)
    H = as_transform("haar")
    A, cert, budgets, used_seed, attempts = _certified_walsh_operator(levels, nu, C, seed, retries)

    rng = np.random.default_rng(seed)
    base = [H.adjoint(random_sparse_in_levels(levels, rng)) for _ in range(domain_size)]
    over = overperformance_domain(levels, k, p, base, seed=seed, H=H)
    M2 = [A.apply(v) for v in over.domain]

    def solve(y):
        return cs_decoder_phi(A, H, y, M2, levels, opts).x_hat

    cs_map = ReconstructionMap(solve, A.m, A.n, None, "cs")
    net_map = _interpolant_map([(A.apply(v), v) for v in over.domain], seed, "interpolatory")

    cs_err = [float(np.linalg.norm(cs_map(A.apply(v)) - v)) for v in over.domain]
    net_err = [float(np.linalg.norm(net_map(A.apply(v)) - v)) for v in over.domain]
    eps = 1.0 / p
    zero = np.zeros(A.m, dtype=complex)
    az = A.apply(over.z)
    cs_lips = [empirical_lipschitz(cs_map, A.apply(v), eps, trials=trials, seed=seed + n,
                                   seeds=[az - A.apply(v)]).value for n, v in enumerate(over.domain)]
    net_lip = empirical_lipschitz(net_map, zero, eps, trials=trials, seed=seed, seeds=[az])

    report = Report("thm-dl-vs-cs")
    report.set("r", r).set("k", k).set("p", p).set("seed", seed).set("scheme_seed", used_seed)
    report.set("s", " ".join(str(v) for v in levels.local_sparsities))
    report.set("budgets", " ".join(str(v) for v in budgets)).set("m", A.m).set("measurement_set_size", len(M2))
    report.set("ripl_delta", cert.delta).set("ripl_attempts", attempts)
    report.set("kappa", over.kappa).set("z1_norm", float(np.linalg.norm(over.z1)))
    report.set("z_norm", float(np.linalg.norm(over.z))).set("az_norm", float(np.linalg.norm(az)))
    report.set("z1_kernel_residual", float(np.linalg.norm(A.apply(over.z1))))
    report.set("cs_base_error", max(cs_err[:domain_size])).set("cs_sup_error", max(cs_err))
    report.set("net_fit", max(net_err)).set("net_sup_error", max(net_err))
    report.set("cs_lipschitz", max(cs_lips)).set("cs_lipschitz_cap", cs_lipschitz_cap(r))
    report.set("net_lipschitz", net_lip.value).set("eps", eps)

    report.add_check("ripl_certified", "key(ripl_delta)", "<=", 0.5, 1e-12)
    report.add_check("level_unsampled", "key(z1_kernel_residual)", "<=", 0, 1e-9)
    report.add_check("az_small", "key(az_norm)", "<=", "2*key(kappa)", 1e-9)
    report.add_check("cs_recovers_base", "key(cs_base_error)", "<=", 0, 1e-4)
    report.add_check("cs_lipschitz_capped", "key(cs_lipschitz)", "<=", "key(cs_lipschitz_cap)")
    report.add_check("net_delta_accurate", "key(net_fit)", "<=", "1/key(p)")
    report.add_check("net_beats_cs", "key(net_sup_error)", "<=", "key(cs_sup_error)/key(p)")
    report.add_check("net_unstable", "key(net_lipschitz)", ">=", "0.95*key(p)")
    report.add_check("net_quotient_floor", "key(net_lipschitz)", ">=",
                     "(key(z_norm) - 2*key(net_fit))/key(az_norm)", 1e-9)

    if train_cfg is not None:
        cfg = train_cfg.model_copy(update={"target_error": train_cfg.target_error or eps})
        trained, result = _trained_map(A, over.domain, cfg, hidden)
        t_err = [float(np.linalg.norm(trained(A.apply(v)) - v)) for v in over.domain]
        t_lip = empirical_lipschitz(trained, zero, eps, trials=trials, seed=seed, seeds=[az])
        report.set("trained_fit", max(t_err)).set("trained_lipschitz", t_lip.value)
        report.set("trained_epochs", result.epochs)
        report.add_check("trained_quotient_floor", "key(trained_lipschitz)", ">=",
                         "(key(z_norm) - 2*key(trained_fit))/key(az_norm)", 1e-9)

    report.add_table("domain_errors", ["index", "norm", "cs_error", "net_error", "cs_lipschitz"],
                     [[n, float(np.linalg.norm(v)), ce, ne, cl]
                      for n, (v, ce, ne, cl) in enumerate(zip(over.domain, cs_err, net_err, cs_lips))])
    logger.info(f"dl-vs-cs demo: CS L={max(cs_lips):.3f}, net L={net_lip.value:.3f}, "
                f"errors {max(cs_err):.3e} vs {max(net_err):.3e}")
    return report


def half_band_budgets(r: int) -> Tuple[int, ...]:
    """Half of every dyadic band, at least one sample per band."""
    levels = dyadic_levels(r)
    sizes = [hi - lo for lo, hi in zip((0,) + levels, levels)]
    return tuple(max(1, size // 2) for size in sizes)


def destabilize_demo(r: int = 5, gamma: float = 0.1, K: int = 4, seed: int = 0,
                     budgets: Optional[Sequence[int]] = None, trials: int = 32,
                     train_cfg: Optional[TrainConfig] = None, hidden: Sequence[int] = (64,)) -> Report:
    """
    Subsampled Fourier operator and K training signals in N(A)^perp: the
    empirical-loss minimizer interpolates them and is optimal. Adding
    x1 + z1 and x2 + z2 from destabilizing_pair forces any minimizer to send
    A x1 + A z1 to x1 + z1, so its Lipschitz constant at A x1 is at least
    ||z1|| / ||A z1|| >= 2/gamma.
    """
    if K < 2:
        raise ArgumentError(f"need K >= 2 training signals, got {K}")
    levels = dyadic_levels(r)
    budgets = tuple(budgets) if budgets is not None else half_band_budgets(r)
    scheme = draw_multilevel_scheme(budgets, levels, seed)
    A = MeasurementOperator.from_scheme("fourier", scheme, scaled=False)
    if A.m >= A.n:
        raise ArgumentError("full sampling leaves no kernel to destabilize with")
    proj = kernel_projectors(A)
    rng = np.random.default_rng(seed)
    xs = [rng.uniform(0.5, 1.0) * random_unit(proj.project_cokernel, rng, A.n) for _ in range(K)]

    before = empirical_minimizer_network(A, xs, seed=seed)
    fit_before = max(float(np.linalg.norm(before(A.apply(x)) - x)) for x in xs)
    pair = destabilizing_pair(A, xs, gamma, seed=seed)
    extended = xs + [pair.x_first, pair.x_second]
    after = empirical_minimizer_network(A, extended, seed=seed)
    fit_first = float(np.linalg.norm(after(A.apply(pair.x_first)) - pair.x_first))
    y1 = A.apply(xs[0])
    az1 = A.apply(pair.z1)

    rows = []
    for scale in (1.0, 2.0, 4.0):
        eps = scale * gamma
        lb = empirical_lipschitz(before, y1, eps, trials=trials, seed=seed, seeds=[az1]).value
        la = empirical_lipschitz(after, y1, eps, trials=trials, seed=seed, seeds=[az1]).value
        rows.append([eps, lb, la, la * eps])

    report = Report("thm-destabilize")
    report.set("r", r).set("gamma", gamma).set("K", K).set("seed", seed).set("m", A.m)
    report.set("budgets", " ".join(str(v) for v in budgets))
    report.set("beta", pair.beta).set("az1_norm", float(np.linalg.norm(az1)))
    report.set("z1_norm", float(np.linalg.norm(pair.z1))).set("z2_norm", float(np.linalg.norm(pair.z2)))
    report.set("fit_before", fit_before).set("fit_added_point", fit_first)
    report.set("sup_error_before", sup_error(before, A, xs))
    report.set("lipschitz_before", rows[0][1]).set("lipschitz_after", rows[0][2])
    report.add_check("close_to_training", "key(z1_norm)", "<=", "key(gamma)", 1e-12)
    report.add_check("second_close", "key(z2_norm)", "<=", "key(gamma)", 1e-12)
    report.add_check("tiny_measurement_change", "key(az1_norm)", "<=", "key(gamma)**2/2", 1e-12)
    report.add_check("before_interpolates", "key(fit_before)", "<=", 1e-3)
    report.add_check("before_optimal", "key(sup_error_before)", "<=", 1e-3)
    report.add_check("after_hits_added_point", "key(fit_added_point)", "<=", 1e-6)
    report.add_check("destabilized", "key(lipschitz_after)", ">=", "0.9/key(gamma)")
    report.add_check("destabilized_every_eps", "colmin(lipschitz, l_times_eps)", ">=", 0.9)

    if train_cfg is not None:
        trained, result = _trained_map(A, extended, train_cfg, hidden)
        t_lip = empirical_lipschitz(trained, y1, gamma, trials=trials, seed=seed, seeds=[az1])
        report.set("trained_lipschitz", t_lip.value).set("trained_epochs", result.epochs)
        report.set("trained_final_loss", result.losses[-1] if result.losses else math.nan)
        report.set("trained_fit_x1", float(np.linalg.norm(trained(y1) - xs[0])))
        report.set("trained_fit_added", float(np.linalg.norm(trained(A.apply(pair.x_first)) - pair.x_first)))
        report.set("inverse_gamma", 1.0 / gamma)
        # ||A z1|| <= gamma^2/2 gives L >= 2/gamma - 2(fit_x1 + fit_added)/gamma^2
        report.add_check("trained_quotient_floor", "key(trained_lipschitz)", ">=",
                         "(key(z1_norm) - key(trained_fit_x1) - key(trained_fit_added))/key(az1_norm)", 1e-6)
        report.add_check("trained_destabilized", "key(trained_lipschitz)", ">=",
                         "key(inverse_gamma) - 2*max(key(trained_fit_x1) + key(trained_fit_added)"
                         " - key(gamma)/2, 0)/key(gamma)**2", 1e-6)

    report.add_table("lipschitz", ["eps", "before", "after", "l_times_eps"], rows)
    logger.info(f"destabilize demo: L before {rows[0][1]:.3f}, after {rows[0][2]:.3f} at eps={gamma:g}")
    return report
