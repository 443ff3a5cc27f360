"""
Experiment runners.

Each runner takes the resolved configuration, its typed parameters and the
run output, writes its artifacts and returns the report whose checks decide
acceptance.
"""

import logging
import math
from contextlib import contextmanager
from typing import Dict, List, Optional, Tuple

import numpy as np

from kawlab.common.errors import (
    AcceptanceError,
    ArgumentError,
    ConfigError,
    KawlabError,
    SizeError,
    StageError,
    WitnessError,
)
from kawlab.common.helpers import block_rng
from kawlab.common.models import ExperimentConfig
from kawlab.common.report import Report
from kawlab.common.signal_io import format_signal_set
from kawlab.core.certify import kernel_proximity, ripl_constant, rnsp_constants_from_rip
from kawlab.core.cs_solver import QcbpProblem, as_transform, qcbp_weighted, recovery_bound_check
from kawlab.core.instability import (
    ProbeReport,
    ReconstructionMap,
    adversarial_search,
    ball_certificate,
    empirical_lipschitz,
    falsewitness,
    mc_instability_probability,
    tumor_signal,
)
from kawlab.core.neural import (
    Network,
    NetworkReconstructor,
    build_mlp,
    build_unet,
    complex_training_pairs,
    corrected_decoder_network,
    encode_network,
    gradient_check,
    identity_relu_gadget,
    interpolatory_network,
    multi_mask_pairs,
    piecewise_poly_signals,
    pinv_decoder_network,
    plateau_network,
    train,
    train_multi_mask,
    train_regularized,
    training_error,
    weight_norm_penalty,
)
from kawlab.core.operators import (
    LevelStructure,
    MeasurementOperator,
    SamplingScheme,
    coherence_csv,
    coherence_decay_constant,
    draw_multilevel_scheme,
    fourier_budgets,
    kernel_projectors,
    local_coherence,
    random_sparse_in_levels,
    random_unit,
    walsh_budgets,
)
from kawlab.core.optimal_maps import (
    demo_not_optimal,
    destabilize_demo,
    dl_vs_cs_demo,
    half_band_budgets,
    hausdorff,
    lambda_sensitivity_demo,
    optimality_constant,
)
from kawlab.core.tensor_linalg import INVERSE, TRANSFORMS, naive_dft_matrix, transform_matrix
from kawlab.cli.output import RunOutput

logger = logging.getLogger(__name__)

Params = Dict[str, object]


@contextmanager
def stage(name: str):
    """Wrap numerical failures of one stage in a StageError naming it."""
    logger.info(f"stage: {name}")
    try:
        yield
    except (ConfigError, WitnessError, AcceptanceError, StageError):
        raise
    except (KawlabError, np.linalg.LinAlgError) as e:
        raise StageError(name, e) from e


def levels_for(cfg: ExperimentConfig) -> LevelStructure:
    r = cfg.operator.r
    s = cfg.levels.local_sparsities
    if s is None:
        s = [1] * r
    if len(s) != r:
        raise ConfigError(f"levels.local_sparsities needs {r} entries, got {len(s)}")
    return LevelStructure.dyadic(r, s, empty_level_weight=cfg.levels.empty_level_weight)


def build_operator(cfg: ExperimentConfig, levels: LevelStructure,
                   kind: Optional[str] = None) -> Tuple[MeasurementOperator, Optional[SamplingScheme]]:
    """Operator from an explicit Omega, explicit budgets, or the sparsity-in-levels budget formula."""
    spec = cfg.operator
    kind = kind or spec.kind
    n = levels.n
    if kind == "identity":
        return MeasurementOperator.identity(n), None
    if kind == "dense":
        rng = np.random.default_rng(cfg.seed)
        rows = spec.rows
        matrix = (rng.standard_normal((rows, n)) + 1j * rng.standard_normal((rows, n))) / math.sqrt(2 * rows)
        return MeasurementOperator.dense(matrix), None
    if spec.omega is not None:
        return MeasurementOperator.structured(kind, n, [int(i) - 1 for i in spec.omega]), None
    if spec.budgets is not None:
        budgets = tuple(spec.budgets)
        if len(budgets) != levels.r:
            raise ConfigError(f"operator.budgets needs {levels.r} entries, got {len(budgets)}")
    else:
        rule = fourier_budgets if kind == "fourier" else walsh_budgets
        budgets = rule(levels.local_sparsities, levels.sampling_levels, spec.nu, spec.budget_constant)
    scheme = draw_multilevel_scheme(budgets, levels.sampling_levels, cfg.seed, spec.allow_repeats)
    return MeasurementOperator.from_scheme(kind, scheme, spec.scaled), scheme


def _write_operator(out: RunOutput, A: MeasurementOperator, scheme: Optional[SamplingScheme]) -> None:
    out.write_text("operator.txt", A.to_text())
    if scheme is not None:
        out.write_text("scheme.txt", scheme.to_text())


def _lambdas(raw) -> List[float]:
    try:
        values = [float(v) for v in str(raw).replace(",", " ").split()]
    except ValueError as e:
        raise ConfigError(f"params.lambdas must be numbers, got {raw!r}") from e
    if not values:
        raise ConfigError("params.lambdas is empty")
    return values


def _train_pairs(A: MeasurementOperator, xs) -> List[Tuple[np.ndarray, np.ndarray]]:
    return [(A.apply(x), np.asarray(x, dtype=complex)) for x in xs]


def _as_map(net: Network, name: str) -> ReconstructionMap:
    return ReconstructionMap.from_network(NetworkReconstructor(net, name=name))


def run_transforms_check(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    rng = np.random.default_rng(cfg.seed)
    rows, oracle_rows = [], []
    with stage("round-trips"):
        for k in range(1, int(p["max_r"]) + 1):
            n = 2 ** k
            x = rng.standard_normal((4, n)) + 1j * rng.standard_normal((4, n))
            for kind, fn in TRANSFORMS.items():
                fx = fn(x)
                roundtrip = float(np.max(np.abs(fn(fx, INVERSE) - x)))
                norm_error = float(np.max(np.abs(np.linalg.norm(fx, axis=1) / np.linalg.norm(x, axis=1) - 1)))
                rows.append([n, kind, roundtrip, norm_error])
    with stage("oracles"):
        for k in range(1, int(p["oracle_max_r"]) + 1):
            n = 2 ** k
            dft_error = float(np.max(np.abs(transform_matrix("fourier", n) - naive_dft_matrix(n))))
            unitarity = max(float(np.max(np.abs(U.conj().T @ U - np.eye(n))))
                            for U in (transform_matrix(kind, n) for kind in TRANSFORMS))
            oracle_rows.append([n, dft_error, unitarity])

    report = Report("transforms-check")
    report.set("max_n", 2 ** int(p["max_r"])).set("oracle_max_n", 2 ** int(p["oracle_max_r"]))
    report.add_table("transforms", ["n", "transform", "roundtrip", "norm_error"], rows)
    report.add_table("oracle", ["n", "dft_error", "unitarity"], oracle_rows)
    report.add_check("roundtrip", "colmax(transforms, roundtrip)", "<=", 1e-12)
    report.add_check("norm_preserved", "colmax(transforms, norm_error)", "<=", 1e-12)
    report.add_check("dft_matches_naive", "colmax(oracle, dft_error)", "<=", 1e-10)
    report.add_check("unitary", "colmax(oracle, unitarity)", "<=", 1e-12)
    out.write_plot("oracle", "transforms-check.oracle.csv", "Transform oracles", "n",
                   ["dft_error", "unitarity"], logscale=True)
    return report


def run_coherence(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    kind = cfg.operator.kind
    levels = levels_for(cfg)
    with stage("coherence"):
        mu = local_coherence(kind, levels)
    sizes = levels.sampling_sizes
    out.write_text("coherence.csv", coherence_csv(mu))
    report = Report("coherence")
    report.set("kind", kind).set("r", levels.r).set("n", levels.n)
    diagonal = [[k + 1, mu[k, k], sizes[k], mu[k, k] * sizes[k]] for k in range(levels.r)]
    off = [[k + 1, l + 1, mu[k, l], mu[k, l] * sizes[k]]
           for k in range(levels.r) for l in range(levels.r) if k != l]
    report.add_table("diagonal", ["k", "mu", "band_size", "mu_times_size"], diagonal)
    report.add_table("off_diagonal", ["k", "l", "mu", "mu_times_size"], off or [[0, 0, 0.0, 0.0]])
    if kind == "walsh":
        report.add_check("diagonal_exact_low", "colmin(diagonal, mu_times_size)", "==", 1, 1e-12)
        report.add_check("diagonal_exact_high", "colmax(diagonal, mu_times_size)", "==", 1, 1e-12)
        report.add_check("off_diagonal_vanish", "colmax(off_diagonal, mu)", "<=", 1e-12)
    elif kind == "fourier":
        c = coherence_decay_constant(mu, levels)
        report.set("decay_constant", c).set("decay_constant_limit", p["decay_limit"])
        report.add_check("decay_profile", "key(decay_constant)", "<=", "key(decay_constant_limit)")
    out.write_plot("coherence", "coherence.diagonal.csv", f"{kind} local coherence", "k",
                   ["mu_times_size"])
    return report


def _certify(A: MeasurementOperator, levels: LevelStructure, mode: str, seed: int):
    try:
        return ripl_constant(A, "haar", levels, mode=mode, seed=seed)
    except SizeError:
        logger.warning("Too many supports to enumerate; falling back to 2000 sampled supports")
        return ripl_constant(A, "haar", levels, mode=("sampled", 2000), seed=seed)


def run_recovery_mc(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    levels = levels_for(cfg)
    H = as_transform("haar")
    with stage("operator"):
        A, scheme = build_operator(cfg, levels)
        cert = _certify(A, levels, str(p["ripl_mode"]), cfg.seed)
    _write_operator(out, A, scheme)
    weights = levels.weight_vector()
    rows = []
    with stage("recovery"):
        for draw in range(int(p["draws"])):
            rng = block_rng(cfg.seed, draw)
            x = H.adjoint(random_sparse_in_levels(levels, rng))
            res = qcbp_weighted(QcbpProblem(A, A.apply(x), 0.0, H, weights), cfg.solver)
            bound = recovery_bound_check(x, res.x_hat, levels, 0.0, H)
            err = float(np.linalg.norm(res.x_hat - x))
            rows.append([draw, err, int(err <= p["exact_tol"]), res.objective, res.iterations,
                         bound.rhs - bound.lhs])
    successes = sum(r[2] for r in rows)
    report = Report("recovery-mc")
    report.set("n", levels.n).set("m", A.m).set("draws", len(rows)).set("successes", successes)
    report.set("success_rate", successes / len(rows)).set("min_success_rate", p["min_success_rate"])
    report.set("ripl_delta", cert.delta).set("ripl_method", cert.method)
    report.set("s", " ".join(str(v) for v in levels.local_sparsities))
    report.add_table("draws", ["draw", "error", "exact", "objective", "iterations", "bound_slack"], rows)
    report.add_check("ripl_certified", "key(ripl_delta)", "<=", 0.5)
    report.add_check("success_rate", "key(success_rate)", ">=", "key(min_success_rate)")
    report.add_check("recovery_bound", "colmin(draws, bound_slack)", ">=", 0, float(p["exact_tol"]))
    out.write_plot("draws", "recovery-mc.draws.csv", "Recovery error per draw", "draw", ["error"], logscale=True)
    return report


def run_ripl_cert(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    levels = levels_for(cfg)
    with stage("operator"):
        A, scheme = build_operator(cfg, levels)
    _write_operator(out, A, scheme)
    with stage("certify"):
        cert = ripl_constant(A, "haar", levels, mode=str(p["mode"]), seed=cfg.seed)
    report = cert.to_report()
    report.set("m", A.m).set("n", A.n).set("bound", p["bound"])
    report.add_check("ripl_certified", "key(delta)", "<=", "key(bound)")
    if cert.delta < 4 / math.sqrt(41):
        rho, gamma = rnsp_constants_from_rip(cert.delta)
        report.set("rnsp_rho", rho).set("rnsp_gamma", gamma)
    return report


def _pair_network(method: str, A: MeasurementOperator, xs, cfg: ExperimentConfig, hidden: int,
                  direction=None) -> Tuple[ReconstructionMap, float]:
    pairs = _train_pairs(A, xs)
    if method == "interpolate":
        net = interpolatory_network(pairs, seed=cfg.seed)
    elif method == "plateau":
        net = plateau_network(pairs, direction=direction, seed=cfg.seed)
    elif method == "train":
        Y, X = complex_training_pairs(A, xs)
        result = train(build_mlp(Y.shape[1], [hidden], X.shape[1], seed=cfg.train.seed), Y, X, cfg.train)
        net = result.net
    else:
        raise ConfigError(f"params.network must be interpolate, plateau or train, got {method!r}")
    R = _as_map(net, method)
    delta = max(float(np.linalg.norm(R(y) - x)) for y, x in pairs)
    return R, delta


def run_cardinal_sin(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    """Two signals with nearly equal measurements, both recovered: a witness of instability."""
    levels = levels_for(cfg)
    with stage("operator"):
        A, scheme = build_operator(cfg, levels)
    _write_operator(out, A, scheme)
    proj = kernel_projectors(A)
    rng = np.random.default_rng(cfg.seed)
    gap = float(p["measurement_gap"])
    with stage("signals"):
        x = random_unit(proj.project_cokernel, rng, A.n)
        e = gap * random_unit(lambda v: v, rng, A.m)
        x_prime = x + float(p["kernel_step"]) * random_unit(proj.project_kernel, rng, A.n) + A.pinv_apply(e)
    with stage("network"):
        R, delta = _pair_network(str(p["network"]), A, [x, x_prime], cfg, int(p["hidden"]))
    prox = kernel_proximity(A, x, x_prime)
    eta = max(delta, prox.measurement_gap)
    eps = max(float(p["eps"]), eta)
    with stage("probe"):
        w = falsewitness(x, x_prime, A, R, eta)
        est = empirical_lipschitz(R, A.apply(x), eps, trials=int(p["trials"]), seed=cfg.seed, seeds=[w.e])
        ball = ball_certificate(A, x, x_prime, float(p["r1"]), eta, eps, hypotheses_verified=False)

    report = ProbeReport("cardinal-sin")
    report.set("network", p["network"]).set("delta", delta).set("measurement_gap", prox.measurement_gap)
    report.set("signal_gap", prox.signal_gap).set("proximity_ratio", prox.ratio)
    report.set("ball_r1", ball.r1).set("ball_r2", ball.r2).set("sigma_min", ball.sigma_min)
    report.add_lipschitz_formula(prox.signal_gap, eta, eps)
    report.add_witness(w)
    report.add_empirical(est, eps)
    report.add_check("bound_positive", "key(lipschitz_lower)", ">=", 0, 0.0)
    report.add_check("empirical_meets_bound", "key(empirical_lipschitz)", ">=", "key(lipschitz_lower)", 1e-9)
    report.add_check("false_positive_found", "dist(fp_reconstruction, x_plus_z)", "<=", "key(witness_eta)", 1e-12)
    report.add_check("false_negative_found", "dist(fn_reconstruction, x)", "<=", "key(witness_eta)", 1e-12)
    out.write_signal("x", x)
    out.write_signal("x_prime", x_prime)
    return report


def _tumor_setup(cfg: ExperimentConfig, p: Params):
    levels = levels_for(cfg)
    A, scheme = build_operator(cfg, levels, kind="fourier")
    x = piecewise_poly_signals(1, A.n, seed=cfg.seed)[0].astype(complex)
    x = x / np.linalg.norm(x)
    tumor = tumor_signal(A, width=int(p["width"]), norm=float(p["tumor_norm"]),
                         leakage=float(p["leakage"]), seed=cfg.seed)
    if tumor.measurement_norm == 0:
        raise ArgumentError("the tumour is invisible to A; raise params.leakage")
    R, delta = _pair_network(str(p["network"]), A, [x, x + tumor.z], cfg, int(p["hidden"]),
                             direction=A.apply(tumor.z))
    return A, scheme, x, tumor, R, delta


def run_tumor_demo(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    """A detail hidden in the unsampled band, added by a tiny measurement change."""
    with stage("setup"):
        A, scheme, x, tumor, R, delta = _tumor_setup(cfg, p)
    _write_operator(out, A, scheme)
    eta = max(float(p["eta"]), delta, tumor.measurement_norm)
    with stage("witness"):
        w = falsewitness(x, x + tumor.z, A, R, eta)
        eps = max(tumor.measurement_norm, eta)
        est = empirical_lipschitz(R, A.apply(x), eps, trials=int(p["trials"]), seed=cfg.seed, seeds=[w.e])
    report = ProbeReport("tumor-demo")
    report.set("network", p["network"]).set("delta", delta)
    report.set("tumor_norm", tumor.norm).set("tumor_measurement_norm", tumor.measurement_norm)
    report.set("tumor_width", tumor.support_width).set("leakage", p["leakage"])
    report.add_lipschitz_formula(float(np.linalg.norm(tumor.z)), eta, eps)
    report.add_witness(w)
    report.add_empirical(est, eps)
    report.add_check("tumor_hidden", "key(tumor_measurement_norm)", "<=", "key(tumor_norm)/10")
    report.add_check("false_positive_found", "dist(fp_reconstruction, x_plus_z)", "<=", "key(witness_eta)", 1e-12)
    report.add_check("empirical_meets_bound", "key(empirical_lipschitz)", ">=", "key(lipschitz_lower)", 1e-9)
    rec = R(A.apply(x) + w.e)
    report.add_table("signals", ["t", "x", "x_plus_tumor", "reconstruction"],
                     [[i, abs(a), abs(b), abs(c)] for i, (a, b, c) in enumerate(zip(x, x + tumor.z, rec))])
    out.write_signal("x", x)
    out.write_signal("tumor", tumor.z)
    out.write_plot("signals", "tumor-demo.signals.csv", "Tumour false positive", "t",
                   ["x", "x_plus_tumor", "reconstruction"])
    return report


def run_noise_mc(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    """How often generic noise leaves the tumour network unstable."""
    with stage("setup"):
        A, scheme, x, tumor, R, delta = _tumor_setup(cfg, p)
    _write_operator(out, A, scheme)
    eta = max(float(p["eta"]), delta)
    noise_std = float(p["noise_fraction"]) * tumor.measurement_norm
    with stage("monte-carlo"):
        mc = mc_instability_probability(R, A, x, tumor.z, eta, noise_std, trials=int(p["trials"]),
                                        seed=cfg.seed)
    report = ProbeReport("noise-mc")
    report.set("network", p["network"]).set("delta", delta)
    report.set("tumor_measurement_norm", tumor.measurement_norm)
    report.add_monte_carlo(mc)
    report.set("min_damage_low", p["min_damage_low"]).set("min_conditional", p["min_conditional"])
    report.add_check("damage_likely", "key(p_lipschitz_low)", ">=", "key(min_damage_low)")
    report.add_check("noise_cannot_repair", "key(p_conditional)", ">=", "key(min_conditional)")
    report.add_table("estimates", ["estimate", "p", "low", "high"],
                     [[name, est.p, est.low, est.high] for name, est in mc.estimates().items()])
    return report


def run_attack(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    levels = levels_for(cfg)
    with stage("operator"):
        A, scheme = build_operator(cfg, levels)
    _write_operator(out, A, scheme)
    xs = piecewise_poly_signals(int(p["signals"]), A.n, seed=cfg.seed).astype(complex)
    xs = [v / np.linalg.norm(v) for v in xs]
    target = str(p["target"])
    with stage("target"):
        if target == "pinv":
            R = ReconstructionMap.pinv(A)
        elif target == "interpolatory":
            R = _as_map(interpolatory_network(_train_pairs(A, xs), seed=cfg.seed), target)
        elif target == "mlp":
            Y, X = complex_training_pairs(A, xs)
            net = train(build_mlp(Y.shape[1], [int(p["hidden"])], X.shape[1], seed=cfg.train.seed),
                        Y, X, cfg.train).net
            R = _as_map(net, target)
        else:
            raise ConfigError(f"params.target must be pinv, interpolatory or mlp, got {target!r}")
    radius = float(p["radius"])
    with stage("attack"):
        res = adversarial_search(R, A, xs[0], radius, steps=int(p["steps"]), seed=cfg.seed,
                                 space=str(p["space"]), restarts=int(p["restarts"]))
    report = Report("attack")
    report.set("target", target).set("space", res.space).set("method", res.method)
    report.set("radius", radius).set("objective", res.objective).set("evaluations", res.evaluations)
    report.set("start_objective", res.history[0])
    report.set("amplification", math.sqrt(res.objective) / radius)
    report.add_vector("perturbation", res.perturbation)
    report.add_check("perturbation_in_ball", "norm(perturbation)", "<=", "key(radius)", 1e-12 * max(1.0, radius))
    report.add_check("not_worse_than_start", "key(objective)", ">=", "key(start_objective)")
    report.add_table("history", ["step", "objective"], [[i, v] for i, v in enumerate(res.history)])
    out.write_signal("perturbation", res.perturbation)
    out.write_plot("history", "attack.history.csv", f"{res.method} attack on {target}", "step", ["objective"])
    return report


def run_multi_mask(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    """U-net trained on zero-filled inputs from several sampling masks at once."""
    levels = levels_for(cfg)
    n = levels.n
    budgets = cfg.operator.budgets or half_band_budgets(levels.r)
    with stage("masks"):
        masks = [MeasurementOperator.from_scheme("fourier", draw_multilevel_scheme(budgets, levels.sampling_levels,
                                                                                     cfg.seed + l), scaled=False)
                 for l in range(int(p["masks"]))]
        images = piecewise_poly_signals(int(p["images"]), n, seed=cfg.seed).astype(complex)
        full = MeasurementOperator.structured("fourier", n, np.arange(n))
    with stage("train"):
        net = build_unet(full, seed=cfg.train.seed)
        Y, X = multi_mask_pairs(images, masks)
        grad_error = gradient_check(net, Y[:2], X[:2], seed=cfg.seed)
        result = train_multi_mask(net, images, masks, cfg.train)
    per_mask = []
    for l, A in enumerate(masks):
        Yl, Xl = multi_mask_pairs(images, [A])
        per_mask.append([l, A.m, training_error(result.net, Yl, Xl)])
    report = Report("multi-mask")
    report.set("masks", len(masks)).set("images", len(images)).set("epochs", result.epochs)
    report.set("first_loss", result.losses[0]).set("final_loss", result.losses[-1])
    report.set("delta", result.delta).set("gradient_error", grad_error)
    report.add_check("gradient_matches", "key(gradient_error)", "<=", 1e-4)
    report.add_check("loss_decreased", "key(final_loss)", "<=", "key(first_loss)")
    report.add_table("loss", ["epoch", "loss"], [[i, v] for i, v in enumerate(result.losses, 1)])
    report.add_table("per_mask", ["mask", "m", "delta"], per_mask)
    out.write_bytes("unet.kawnet", encode_network(result.net))
    out.write_plot("loss", "multi-mask.loss.csv", "Multi-mask training loss", "epoch", ["loss"], logscale=True)
    return report


def run_constructive_nets(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    levels = levels_for(cfg)
    with stage("operator"):
        A, scheme = build_operator(cfg, levels, kind="fourier")
    _write_operator(out, A, scheme)
    proj = kernel_projectors(A)
    rng = np.random.default_rng(cfg.seed)
    with stage("gadget"):
        dim = 2 * A.n
        v = rng.standard_normal((8, dim))
        gadget = Network(identity_relu_gadget(dim), dim)
        gadget_error = float(np.max(np.abs(gadget.forward(v) - v)))
    with stage("pinv-decoder"):
        decoder = _as_map(pinv_decoder_network(A, depth=int(p["depth"])), "pinv-decoder")
        xs = [random_unit(proj.project_cokernel, rng, A.n) for _ in range(8)]
        pinv_error = max(float(np.linalg.norm(decoder(A.apply(x)) - x)) for x in xs)
    with stage("corrected-decoder"):
        i = int(rng.integers(A.m))
        y_hat = A.apply(xs[0])
        target = random_unit(lambda u: u, rng, A.n)
        corrected = _as_map(corrected_decoder_network(A, i, y_hat, target, depth=int(p["depth"])), "corrected")
        hit_error = float(np.linalg.norm(corrected(y_hat) - target))
        off = A.apply(xs[1])
        off[i] = 0.0
        agree_error = float(np.linalg.norm(corrected(off) - A.pinv_apply(off)))
    with stage("interpolation"):
        pairs = [(A.apply(x), x) for x in xs]
        interp = _as_map(interpolatory_network(pairs, seed=cfg.seed), "interpolatory")
        interp_error = max(float(np.linalg.norm(interp(y) - x)) for y, x in pairs)
        plateau = _as_map(plateau_network(pairs, seed=cfg.seed), "plateau")
        plateau_error = max(float(np.linalg.norm(plateau(y) - x)) for y, x in pairs)
    report = Report("constructive-nets")
    report.set("gadget_error", gadget_error).set("pinv_error", pinv_error)
    report.set("corrected_hit_error", hit_error).set("corrected_agree_error", agree_error)
    report.set("interp_error", interp_error).set("plateau_error", plateau_error)
    report.add_check("gadget_exact", "key(gadget_error)", "<=", 1e-12)
    report.add_check("pinv_decoder", "key(pinv_error)", "<=", 1e-10)
    report.add_check("corrected_hits_target", "key(corrected_hit_error)", "<=", 1e-10)
    report.add_check("corrected_agrees_off_index", "key(corrected_agree_error)", "<=", 1e-10)
    report.add_check("interpolates", "key(interp_error)", "<=", 1e-8)
    report.add_check("plateau_interpolates", "key(plateau_error)", "<=", 1e-8)
    return report


def run_optimal_map(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    """c_opt of a domain made of kernel-shifted pairs, in both codomains."""
    levels = levels_for(cfg)
    with stage("operator"):
        A, scheme = build_operator(cfg, levels, kind="fourier")
    _write_operator(out, A, scheme)
    proj = kernel_projectors(A)
    rng = np.random.default_rng(cfg.seed)
    domain, shifts = [], []
    for _ in range(int(p["pairs"])):
        x = rng.uniform(0.5, 1.0) * random_unit(proj.project_cokernel, rng, A.n)
        z = rng.uniform(0.1, 0.5) * random_unit(proj.project_kernel, rng, A.n)
        domain += [x, x + z]
        shifts.append(float(np.linalg.norm(z)))
    with stage("optimality"):
        ambient = optimality_constant(A, domain, "ambient")
        restricted = optimality_constant(A, domain, "restricted")
    witness_points = [ambient.witness(A.apply(x)) for x in domain]
    report = Report("optimal-map")
    report.set("pairs", len(shifts)).set("fibers", len(ambient.partition))
    report.set("c_opt", ambient.c_opt).set("c_opt_restricted", restricted.c_opt)
    report.set("half_largest_shift", max(shifts) / 2)
    report.set("witness_sup_error", ambient.sup_error(domain))
    report.set("witness_hausdorff", hausdorff(domain, witness_points))
    report.add_check("pair_radius", "key(c_opt)", "==", "key(half_largest_shift)", 1e-8)
    report.add_check("restricted_doubles", "key(c_opt_restricted)", "==", "2*key(c_opt)", 1e-8)
    report.add_check("ambient_not_worse", "key(c_opt)", "<=", "key(c_opt_restricted)", 1e-12)
    report.add_check("witness_attains", "key(witness_sup_error)", "<=", "key(c_opt)", 1e-8)
    report.add_table("fibers", ["fiber", "size", "radius", "measurement_norm"], ambient.witness_rows())
    out.write_text("domain.cvec", format_signal_set(domain))
    return report


def run_lambda_sweep(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    """Weight-norm regularized training over a range of lambda."""
    levels = levels_for(cfg)
    with stage("operator"):
        A, scheme = build_operator(cfg, levels, kind="fourier")
    _write_operator(out, A, scheme)
    xs = piecewise_poly_signals(int(p["signals"]), A.n, seed=cfg.seed).astype(complex)
    Y, X = complex_training_pairs(A, xs)
    net = build_mlp(Y.shape[1], [int(p["hidden"])], X.shape[1], seed=cfg.train.seed)
    y1 = A.apply(xs[0])
    rows = []
    with stage("sweep"):
        plain = train(net, Y, X, cfg.train)
        for lam in _lambdas(p["lambdas"]):
            res = train_regularized(net, Y, X, lam, "weight_norm", cfg.train)
            lip = empirical_lipschitz(_as_map(res.net, f"lambda={lam:g}"), y1, float(p["eps"]),
                                      trials=int(p["trials"]), seed=cfg.seed)
            rows.append([lam, res.delta, res.losses[-1], weight_norm_penalty(res.net)[0], lip.value])
    report = Report("lambda-sweep")
    report.set("plain_delta", plain.delta).set("eps", p["eps"])
    zero = next((row for row in rows if row[0] == 0), None)
    if zero is not None:
        report.set("lambda_zero_delta", zero[1])
        report.add_check("lambda_zero_is_plain", "key(lambda_zero_delta)", "==", "key(plain_delta)", 0.0)
    report.add_table("sweep", ["lambda", "delta", "loss", "weight_norm", "lipschitz"], rows)
    out.write_plot("sweep", "lambda-sweep.sweep.csv", "Regularization sweep", "lambda",
                   ["delta", "weight_norm", "lipschitz"], logscale=True)
    return report


def _train_cfg(cfg: ExperimentConfig, p: Params):
    return cfg.train if p.get("trained") else None


def run_thm_not_optimal(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    levels = levels_for(cfg)
    with stage("operator"):
        A, scheme = build_operator(cfg, levels, kind="fourier")
    _write_operator(out, A, scheme)
    with stage("demo"):
        return demo_not_optimal(A, K=int(p["K"]), delta=float(p["delta"]), seed=cfg.seed,
                                phase=float(p["phase"]), train_cfg=_train_cfg(cfg, p),
                                hidden=(int(p["hidden"]),))


def run_thm_lambda(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    with stage("demo"):
        return lambda_sensitivity_demo(kind=cfg.operator.kind, N=levels_for(cfg).n, K=int(p["K"]),
                                       seed=cfg.seed, x_norm=float(p["x_norm"]))


def run_thm_dl_vs_cs(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    s = cfg.levels.local_sparsities
    with stage("demo"):
        return dl_vs_cs_demo(r=cfg.operator.r, k=int(p["k"]), s=s, p=float(p["p"]), nu=cfg.operator.nu,
                             C=cfg.operator.budget_constant, seed=cfg.seed, domain_size=int(p["domain_size"]),
                             retries=int(p["retries"]), trials=int(p["trials"]), opts=cfg.solver,
                             train_cfg=_train_cfg(cfg, p), hidden=(int(p["hidden"]),))


def run_thm_destabilize(cfg: ExperimentConfig, p: Params, out: RunOutput) -> Report:
    with stage("demo"):
        return destabilize_demo(r=cfg.operator.r, gamma=float(p["gamma"]), K=int(p["K"]), seed=cfg.seed,
                                budgets=cfg.operator.budgets, trials=int(p["trials"]),
                                train_cfg=_train_cfg(cfg, p), hidden=(int(p["hidden"]),))
