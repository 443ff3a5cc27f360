"""
Tool commands working on files: operators, signals, networks and domains.
"""

import logging
import math
from pathlib import Path
from typing import List, Optional

import click
import numpy as np
from pydantic import ValidationError

from kawlab.common.errors import ConfigError, SizeError
from kawlab.common.models import LevelSpec, TrainConfig
from kawlab.common.report import Report
from kawlab.common.signal_io import format_cvec_text, read_signal, read_signal_set
from kawlab.core.certify import ripl_constant
from kawlab.core.cs_solver import QcbpProblem, qcbp_weighted
from kawlab.core.instability import (
    ProbeReport,
    ReconstructionMap,
    adversarial_search,
    empirical_lipschitz,
    falsewitness,
    lipschitz_lower_bound,
    mc_instability_probability,
)
from kawlab.core.neural import (
    NetworkReconstructor,
    build_mlp,
    complex_training_pairs,
    load_network,
    save_network,
    summary,
    train_regularized,
)
from kawlab.core.operators import LevelStructure, MeasurementOperator
from kawlab.core.optimal_maps import optimality_constant
from kawlab.cli.config import parse_sections
from kawlab.cli.experiments import experiment_command
from kawlab.cli.output import atomic_write

logger = logging.getLogger(__name__)


def read_operator(path) -> MeasurementOperator:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    return MeasurementOperator.from_text(text)


def read_levels(path, n: int) -> LevelStructure:
    """Dyadic level structure from the [levels] section of a config-style file."""
    sections = parse_sections(Path(path).read_text(encoding="utf-8"))
    if "levels" not in sections:
        raise ConfigError(f"{path} has no [levels] section", line=1)
    entries = sections["levels"]
    data = {}
    for key, (value, _) in entries.items():
        data[key] = value.replace(",", " ").split() if key == "local_sparsities" else value
    try:
        spec = LevelSpec.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        key = str(first["loc"][0]) if first.get("loc") else None
        raise ConfigError(f"levels.{key}: {first.get('msg')}", line=entries.get(key, (None, None))[1]) from e
    r = int(math.log2(n)) + 1
    if 2 ** (r - 1) != n:
        raise SizeError(f"operator length {n} is not a power of two")
    if spec.local_sparsities is None or len(spec.local_sparsities) != r:
        raise ConfigError(f"levels.local_sparsities needs {r} entries", line=1)
    return LevelStructure.dyadic(r, spec.local_sparsities, empty_level_weight=spec.empty_level_weight)


def _network_map(path, A: MeasurementOperator, zero_fill: bool) -> ReconstructionMap:
    net = load_network(path)
    reconstructor = NetworkReconstructor(net, zero_fill=A if zero_fill else None, name=Path(path).stem)
    if reconstructor.m != A.m or reconstructor.n != A.n:
        raise SizeError(f"network maps C^{reconstructor.m} -> C^{reconstructor.n}, operator is {A.m} x {A.n}")
    return ReconstructionMap.from_network(reconstructor)


def _emit(report: Report, out: Optional[str]) -> None:
    text = report.to_text()
    if out:
        atomic_write(Path(out), text.encode("utf-8"))
        click.echo(f"[OK] Report written to {out}")
    else:
        click.echo(text, nl=False)
    failed = report.failed_checks()
    for check in failed:
        click.echo(f"[WARNING] check {check.name} failed: {check.lhs:.6g} {check.rel} {check.rhs:.6g}", err=True)


verbose_option = click.option('--verbose', '-v', is_flag=True, help="Enable verbose output")
operator_option = click.option('--operator', 'operator_path', required=True, type=click.Path(exists=True),
                               help="Operator file (OPERATOR header)")


@click.command(name='solve-qcbp')
@operator_option
@click.option('--y', 'y_path', required=True, type=click.Path(exists=True), help="Measurement signal file")
@click.option('--eta', type=float, default=0.0, show_default=True, help="Noise level of the constraint")
@click.option('--weights', default='auto', show_default=True,
              help="'auto' (level weights from --levels, or none) or a file of per-level or per-entry weights")
@click.option('--levels', 'levels_path', type=click.Path(exists=True), help="File with a [levels] section")
@click.option('--transform', type=click.Choice(['haar', 'identity']), default='haar', show_default=True)
@click.option('--out', required=True, help="Solver report CSV")
@click.option('--signal-out', help="Recovered signal file (default: next to --out)")
@verbose_option
def solve_qcbp(operator_path, y_path, eta, weights, levels_path, transform, out, signal_out, verbose):
    """Weighted quadratically constrained basis pursuit."""
    A = read_operator(operator_path)
    y = read_signal(y_path)
    levels = read_levels(levels_path, A.n) if levels_path else None
    if weights == 'auto':
        w = levels.weight_vector() if levels is not None else None
    else:
        values = np.asarray(Path(weights).read_text(encoding="utf-8").split(), dtype=float)
        if values.size == A.n:
            w = values
        elif levels is not None and values.size == levels.r:
            w = np.repeat(values, [hi - lo for lo, hi in levels.sparsity_bounds])
        else:
            raise ConfigError(f"weights file holds {values.size} values; expected {A.n} or one per level")
    result = qcbp_weighted(QcbpProblem(A, y, eta, transform, w))
    atomic_write(Path(out), result.to_csv().encode("utf-8"))
    signal_path = Path(signal_out) if signal_out else Path(out).with_suffix(".cvec")
    atomic_write(signal_path, format_cvec_text(result.x_hat).encode("utf-8"))
    click.echo(f"[OK] Converged in {result.iterations} iterations; signal written to {signal_path}")
    if verbose:
        click.echo(f"  objective {result.objective:.6g}, feasibility gap {result.feasibility_gap:.3e}")


@click.command(name='certify-ripl')
@operator_option
@click.option('--levels', 'levels_path', required=True, type=click.Path(exists=True),
              help="File with a [levels] section")
@click.option('--t', 'orders', default='auto', show_default=True, help="'auto' or per-level orders")
@click.option('--mode', default='exhaustive', show_default=True, help="exhaustive | sampled:<n>")
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', help="Certificate report file (default: stdout)")
@verbose_option
def certify_ripl(operator_path, levels_path, orders, mode, seed, out, verbose):
    """Restricted isometry constant in levels of A H*."""
    A = read_operator(operator_path)
    levels = read_levels(levels_path, A.n)
    t = None if orders == 'auto' else [int(v) for v in orders.replace(",", " ").split()]
    cert = ripl_constant(A, "haar", levels, t=t, mode=mode, seed=seed)
    _emit(cert.to_report(), out)
    if verbose:
        click.echo(f"[INFO] delta={cert.delta:.6g} over {cert.supports_checked} supports ({cert.method})", err=True)


@click.command(name='train')
@operator_option
@click.option('--signals', 'signals_path', required=True, type=click.Path(exists=True),
              help="Training signals (concatenated CVEC file)")
@click.option('--hidden', default='64', show_default=True, help="Hidden widths, e.g. '64 64'")
@click.option('--epochs', type=int, default=1000, show_default=True)
@click.option('--lam', type=float, default=0.0, show_default=True, help="Weight-norm regularization")
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--out', required=True, help="Network file")
@click.option('--loss-csv', help="Per-epoch loss CSV")
@verbose_option
def train_command(operator_path, signals_path, hidden, epochs, lam, seed, out, loss_csv, verbose):
    """Train a ReLU reconstructor on (A x, x) pairs."""
    A = read_operator(operator_path)
    xs = read_signal_set(signals_path)
    Y, X = complex_training_pairs(A, xs)
    widths: List[int] = [int(v) for v in hidden.replace(",", " ").split()]
    net = build_mlp(Y.shape[1], widths, X.shape[1], seed=seed)
    cfg = TrainConfig(epochs=epochs, seed=seed)
    result = train_regularized(net, Y, X, lam, "weight_norm", cfg)
    save_network(result.net, out)
    if loss_csv:
        atomic_write(Path(loss_csv), result.loss_csv().encode("utf-8"))
    click.echo(f"[OK] Trained {result.epochs} epochs, delta={result.delta:.3e}; network written to {out}")
    if verbose:
        click.echo(summary(result.net))


@click.command(name='optimal-map')
@operator_option
@click.option('--domain', 'domain_path', required=True, type=click.Path(exists=True),
              help="Finite domain (concatenated CVEC file)")
@click.option('--mode', type=click.Choice(['ambient', 'restricted']), default='ambient', show_default=True)
@click.option('--out', help="Report file (default: stdout)")
@verbose_option
def optimal_map(operator_path, domain_path, mode, out, verbose):
    """Optimality constant of a finite domain and its witness map."""
    A = read_operator(operator_path)
    domain = read_signal_set(domain_path)
    result = optimality_constant(A, domain, mode)
    report = Report("optimal-map")
    report.set("codomain", mode).set("c_opt", result.c_opt)
    report.set("points", len(domain)).set("fibers", len(result.partition))
    report.set("witness_sup_error", result.sup_error(domain))
    report.add_table("fibers", ["fiber", "size", "radius", "measurement_norm"], result.witness_rows())
    report.add_check("witness_attains", "key(witness_sup_error)", "==", "key(c_opt)", 1e-8)
    report.add_check("c_opt_is_max_radius", "key(c_opt)", "==", "colmax(fibers, radius)", 0.0)
    _emit(report, out)


@click.command(name='probe-lipschitz')
@operator_option
@click.option('--network', 'network_path', required=True, type=click.Path(exists=True), help="Network file")
@click.option('--x', 'x_path', required=True, type=click.Path(exists=True), help="Signal whose measurements are probed")
@click.option('--x-prime', 'x_prime_path', type=click.Path(exists=True), help="Second signal for a false witness")
@click.option('--eta', type=float, help="Accuracy level for the witness and the lower bound")
@click.option('--eps', type=float, required=True, help="Perturbation radius")
@click.option('--trials', type=int, default=100, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--zero-fill', is_flag=True, help="Network input is the zero-filled length-N vector")
@click.option('--out', help="Probe report file (default: stdout)")
@verbose_option
def probe_lipschitz(operator_path, network_path, x_path, x_prime_path, eta, eps, trials, seed, zero_fill, out,
                    verbose):
    """Empirical local Lipschitz constant, with a witness when two signals are given."""
    A = read_operator(operator_path)
    R = _network_map(network_path, A, zero_fill)
    x = read_signal(x_path)
    report = ProbeReport()
    seeds = []
    if x_prime_path:
        if eta is None:
            raise click.UsageError("--x-prime needs --eta")
        w = falsewitness(x, read_signal(x_prime_path), A, R, eta)
        report.add_witness(w)
        if eps >= eta:
            report.add_lipschitz_formula(w.d1, eta, eps)
        seeds.append(w.e)
    est = empirical_lipschitz(R, A.apply(x), eps, trials=trials, seed=seed, seeds=seeds)
    report.set("seed", seed).add_empirical(est, eps)
    _emit(report, out)
    if verbose and x_prime_path and eps >= eta:
        click.echo(f"[INFO] lower bound {lipschitz_lower_bound(w.d1, eta, eps):.6g}, "
                   f"empirical {est.value:.6g}", err=True)


@click.command(name='attack')
@operator_option
@click.option('--network', 'network_path', type=click.Path(exists=True), help="Network file (default: pseudoinverse)")
@click.option('--x', 'x_path', required=True, type=click.Path(exists=True), help="Signal under attack")
@click.option('--radius', type=float, required=True)
@click.option('--steps', type=int, default=100, show_default=True)
@click.option('--space', type=click.Choice(['signal', 'measurement']), default='measurement', show_default=True)
@click.option('--method', type=click.Choice(['pgd', 'spsa']), help="Default: pgd when a gradient is available")
@click.option('--restarts', type=int, default=1, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--zero-fill', is_flag=True, help="Network input is the zero-filled length-N vector")
@click.option('--out', help="Report file (default: stdout)")
@verbose_option
def attack(operator_path, network_path, x_path, radius, steps, space, method, restarts, seed, zero_fill, out,
           verbose):
    """Search for a worst-case perturbation within a ball."""
    A = read_operator(operator_path)
    R = _network_map(network_path, A, zero_fill) if network_path else ReconstructionMap.pinv(A)
    x = read_signal(x_path)
    res = adversarial_search(R, A, x, radius, steps=steps, seed=seed, space=space, method=method,
                             restarts=restarts)
    report = ProbeReport("attack")
    report.set("seed", seed).set("radius", radius).set("space", res.space).set("method", res.method)
    report.set("objective", res.objective).set("start_objective", res.history[0])
    report.set("evaluations", res.evaluations)
    report.add_vector("perturbation", res.perturbation)
    report.add_table("history", ["step", "objective"], [[i, v] for i, v in enumerate(res.history)])
    report.add_check("perturbation_in_ball", "norm(perturbation)", "<=", "key(radius)", 1e-12 * max(1.0, radius))
    report.add_check("not_worse_than_start", "key(objective)", ">=", "key(start_objective)")
    _emit(report, out)


@click.command(name='noise-mc')
@operator_option
@click.option('--network', 'network_path', required=True, type=click.Path(exists=True), help="Network file")
@click.option('--x', 'x_path', required=True, type=click.Path(exists=True))
@click.option('--z', 'z_path', required=True, type=click.Path(exists=True), help="Detail that should not appear")
@click.option('--eta', type=float, required=True)
@click.option('--noise-std', type=float, required=True, help="Per-component std of the complex noise")
@click.option('--trials', type=int, default=1000, show_default=True)
@click.option('--seed', type=int, default=0, show_default=True)
@click.option('--zero-fill', is_flag=True, help="Network input is the zero-filled length-N vector")
@click.option('--out', help="Probe report file (default: stdout)")
@verbose_option
def noise_mc(operator_path, network_path, x_path, z_path, eta, noise_std, trials, seed, zero_fill, out, verbose):
    """Monte Carlo instability probabilities under generic noise."""
    A = read_operator(operator_path)
    R = _network_map(network_path, A, zero_fill)
    mc = mc_instability_probability(R, A, read_signal(x_path), read_signal(z_path), eta, noise_std,
                                    trials=trials, seed=seed)
    report = ProbeReport("noise-mc")
    report.add_monte_carlo(mc)
    _emit(report, out)


tumor_demo = experiment_command("tumor-demo")
destabilize_demo = experiment_command("thm-demo destabilize", "destabilize-demo",
                                      "Destabilizing training pairs (same as 'thm-demo destabilize').")


@click.group(name='thm-demo')
def thm_demo():
    """Constructive demonstrations of the instability results."""
    pass


for _sub in ("not-optimal", "lambda", "dl-vs-cs", "destabilize"):
    thm_demo.add_command(experiment_command(f"thm-demo {_sub}", _sub))
