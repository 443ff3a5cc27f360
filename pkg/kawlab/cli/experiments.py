"""
Named experiments: registry, default configuration and the run harness.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple

import click
from pydantic import ValidationError

from kawlab.common.errors import AcceptanceError, ConfigError
from kawlab.common.models import ExperimentConfig
from kawlab.common.report import Report
from kawlab.cli import runners
from kawlab.cli.config import MODEL_SECTIONS, apply_overrides, dump_config, read_config
from kawlab.cli.output import RunOutput

logger = logging.getLogger(__name__)

Runner = Callable[[ExperimentConfig, Dict[str, Any], RunOutput], Report]


@dataclass(frozen=True)
class Experiment:
    name: str
    summary: str
    runner: Runner
    params: Dict[str, Any] = field(default_factory=dict)
    defaults: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    slow: bool = False

    @property
    def stem(self) -> str:
        """File name prefix of the run artifacts."""
        return self.name.replace(" ", "-")


_TUMOR_OPERATOR = {"kind": "fourier", "r": 7, "budgets": [1, 1, 2, 4, 8, 8, 12]}
_TUMOR_PARAMS = {"width": 16, "tumor_norm": 0.4, "leakage": 1e-3, "network": "plateau",
                 "hidden": 64, "eta": 1e-6}

EXPERIMENTS: Dict[str, Experiment] = {e.name: e for e in [
    Experiment("transforms-check", "Fast transforms: round trips, norms and naive-matrix oracles",
               runners.run_transforms_check, {"max_r": 10, "oracle_max_r": 6}),
    Experiment("coherence", "Local coherences of the Walsh-Haar or Fourier-Haar pair",
               runners.run_coherence, {"decay_limit": 10.0}, {"operator": {"kind": "walsh", "r": 5}}),
    Experiment("recovery-mc", "Weighted QCBP recovery of random sparse-in-levels signals",
               runners.run_recovery_mc, {"draws": 100, "min_success_rate": 0.95, "exact_tol": 1e-6,
                                         "ripl_mode": "exhaustive"},
               {"operator": {"kind": "walsh", "r": 6, "budget_constant": 2.0},
                "levels": {"local_sparsities": [1, 1, 1, 1, 1, 0]}}, slow=True),
    Experiment("ripl-cert", "RIPL constant of a multilevel Walsh operator",
               runners.run_ripl_cert, {"mode": "exhaustive", "bound": 0.5},
               {"operator": {"kind": "walsh", "r": 5, "budget_constant": 2.0},
                "levels": {"local_sparsities": [1, 1, 1, 1, 0]}}),
    Experiment("cardinal-sin", "Two signals close in measurements, both recovered: a false witness",
               runners.run_cardinal_sin, {"measurement_gap": 1e-3, "kernel_step": 0.5, "network": "interpolate",
                                          "hidden": 64, "eps": 1e-2, "r1": 1e-3, "trials": 50},
               {"operator": {"kind": "fourier", "r": 6, "budgets": [1, 1, 1, 2, 4, 8]}}),
    Experiment("tumor-demo", "Hidden tumour added by a tiny measurement change",
               runners.run_tumor_demo, {**_TUMOR_PARAMS, "trials": 50}, {"operator": _TUMOR_OPERATOR}),
    Experiment("noise-mc", "Probability that generic noise cannot undo the instability",
               runners.run_noise_mc, {**_TUMOR_PARAMS, "trials": 1000, "noise_fraction": 0.1,
                                      "min_damage_low": 0.01, "min_conditional": 0.9},
               {"operator": _TUMOR_OPERATOR}, slow=True),
    Experiment("attack", "Gradient or SPSA search for a worst-case perturbation",
               runners.run_attack, {"target": "interpolatory", "space": "measurement", "radius": 1e-2,
                                    "steps": 50, "restarts": 1, "signals": 4, "hidden": 64},
               {"operator": {"kind": "fourier", "r": 5, "budgets": [1, 1, 2, 4, 4]}}),
    Experiment("multi-mask", "Reduced U-net trained over several Fourier masks",
               runners.run_multi_mask, {"masks": 3, "images": 4},
               {"operator": {"kind": "fourier", "r": 5}, "train": {"epochs": 50}}, slow=True),
    Experiment("constructive-nets", "Hand-built ReLU networks hit their targets exactly",
               runners.run_constructive_nets, {"depth": 2},
               {"operator": {"kind": "fourier", "r": 4, "budgets": [1, 1, 1, 2]}}),
    Experiment("optimal-map", "Optimality constant of a finite kernel-shifted domain",
               runners.run_optimal_map, {"pairs": 4},
               {"operator": {"kind": "fourier", "r": 4, "budgets": [1, 1, 1, 2]}}),
    Experiment("lambda-sweep", "Weight-norm regularized training over a lambda grid",
               runners.run_lambda_sweep, {"lambdas": "0 1e-4 1e-3 1e-2", "signals": 4, "hidden": 32,
                                          "eps": 1e-2, "trials": 20},
               {"operator": {"kind": "fourier", "r": 4, "budgets": [1, 1, 1, 2]}, "train": {"epochs": 200}},
               slow=True),
    Experiment("thm-demo not-optimal", "Fitting the training set does not make a map optimal",
               runners.run_thm_not_optimal, {"K": 2, "delta": 0.2, "phase": 0.0, "trained": True, "hidden": 32},
               {"operator": {"kind": "fourier", "r": 4, "budgets": [1, 1, 1, 2]}, "train": {"epochs": 500}}),
    Experiment("thm-demo lambda", "Regularization weight flips between stable and unstable minimizers",
               runners.run_thm_lambda, {"K": 4, "x_norm": 0.5}, {"operator": {"kind": "fourier", "r": 4}}),
    Experiment("thm-demo dl-vs-cs", "Sparse-regularization decoder stays stable where a network cannot",
               runners.run_thm_dl_vs_cs, {"k": 0, "p": 4.0, "domain_size": 6, "retries": 3, "trials": 8,
                                          "trained": True, "hidden": 64},
               {"operator": {"kind": "walsh", "r": 6, "budget_constant": 2.0},
                "levels": {"local_sparsities": [0, 1, 1, 1, 1, 1]}}, slow=True),
    Experiment("thm-demo destabilize", "Two added training points force an unstable minimizer",
               runners.run_thm_destabilize, {"gamma": 0.1, "K": 4, "trials": 32, "trained": True,
                                             "hidden": 32},
               {"operator": {"kind": "fourier", "r": 5}, "train": {"epochs": 500}}),
]}


def get_experiment(name: str) -> Experiment:
    try:
        return EXPERIMENTS[name]
    except KeyError:
        raise ConfigError(f"unknown experiment {name!r}; see 'kawlab list'") from None


def with_defaults(cfg: ExperimentConfig, experiment: Experiment) -> ExperimentConfig:
    """Experiment defaults under explicitly set config values."""
    data: Dict[str, Any] = {"experiment": cfg.experiment, "seed": cfg.seed}
    explicit = {section: getattr(cfg, section).model_dump(exclude_unset=True) for section in MODEL_SECTIONS}
    resized = "r" in explicit["operator"] or "omega" in explicit["operator"]
    for section in MODEL_SECTIONS:
        merged = dict(experiment.defaults.get(section, {}))
        if resized:
            # per-level defaults belong to the default r and sampling rule
            merged.pop("budgets", None)
            merged.pop("local_sparsities", None)
        merged.update(explicit[section])
        data[section] = merged
    data["params"] = dict(cfg.params)
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        raise ConfigError(f"{'.'.join(str(p) for p in first.get('loc', ()))}: {first.get('msg')}") from e


def resolve_params(cfg: ExperimentConfig, experiment: Experiment) -> Dict[str, Any]:
    """Declared parameters with their defaults, values coerced to the default's type."""
    params = dict(experiment.params)
    for key, value in cfg.params.items():
        if key not in params:
            known = ", ".join(sorted(params)) or "none"
            raise ConfigError(f"unknown parameter {key!r} for {experiment.name} (known: {known})")
        default = params[key]
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise ConfigError(f"parameter {key!r} must be true or false, got {value!r}")
        elif isinstance(default, int):
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"parameter {key!r} must be an integer, got {value!r}")
        elif isinstance(default, float):
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"parameter {key!r} must be a number, got {value!r}")
            value = float(value)
        else:
            value = str(value)
        params[key] = value
    return params


def run_experiment(cfg: ExperimentConfig) -> Tuple[Report, RunOutput]:
    """
    Run one experiment and write its report, CSVs and manifest.

    The manifest is written even when a stage fails. Failing report checks
    raise AcceptanceError after everything is on disk.
    """
    experiment = get_experiment(cfg.experiment)
    cfg = with_defaults(cfg, experiment)
    params = resolve_params(cfg, experiment)
    out = RunOutput(Path(cfg.output.directory), stamp=cfg.output.stamp,
                    binary_signals=cfg.output.binary_signals)
    logger.info(f"Running {experiment.name} (seed {cfg.seed}) into {out.directory}")
    try:
        out.write_text("config.txt", dump_config(cfg))
        report = experiment.runner(cfg, params, out)
        report.set("seed", cfg.seed)
        report.embed_config(dump_config(cfg))
        out.write_report(experiment.stem, report)
    finally:
        out.finalize(experiment.name, cfg.seed)
    failed = report.failed_checks()
    if failed:
        raise AcceptanceError(f"{experiment.name}: {len(failed)} check(s) failed", failed_checks=failed)
    return report, out


def run_options(f):
    """Options shared by every command that runs an experiment."""
    for option in reversed([
        click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
                     help="Configuration file"),
        click.option('--seed', type=int, help="Override the configured seed"),
        click.option('--out', help="Output directory"),
        click.option('--kind', type=click.Choice(['fourier', 'walsh', 'identity', 'dense']),
                     help="Override the operator kind"),
        click.option('--r', 'levels', type=int, help="Override the number of dyadic levels"),
        click.option('--set', 'overrides', multiple=True, metavar='KEY=VALUE', help="Set an experiment parameter"),
        click.option('--verbose', '-v', is_flag=True, help="List the written files"),
    ]):
        f = option(f)
    return f


def _execute(name: Optional[str], config_path, seed, out, kind, levels, overrides, verbose) -> None:
    if config_path:
        cfg = read_config(Path(config_path), experiment=name)
        if name and cfg.experiment != name:
            raise ConfigError(f"config names {cfg.experiment!r}, command runs {name!r}")
    elif name:
        cfg = ExperimentConfig(experiment=name)
    else:
        raise click.UsageError("give an experiment NAME or --config")
    cfg = apply_overrides(cfg, seed=seed, out=out, params=overrides, kind=kind, r=levels)
    report, output = run_experiment(cfg)
    click.echo(f"[OK] {cfg.experiment}: {len(report.checks)} check(s) passed, "
               f"{len(output.files)} file(s) in {output.directory}")
    if verbose:
        for file_name in output.files:
            click.echo(f"  {output.directory / file_name}")


@click.command()
@click.argument('name', required=False)
@run_options
def run(name, config_path, seed, out, kind, levels, overrides, verbose):
    """Run a named experiment and write its artifacts."""
    _execute(name, config_path, seed, out, kind, levels, overrides, verbose)


def experiment_command(name: str, command_name: Optional[str] = None, doc: Optional[str] = None) -> click.Command:
    """A command bound to one registered experiment."""
    experiment = get_experiment(name)

    @click.command(name=command_name or name, help=doc or experiment.summary)
    @run_options
    def command(config_path, seed, out, kind, levels, overrides, verbose):
        _execute(name, config_path, seed, out, kind, levels, overrides, verbose)

    return command


@click.command(name='list')
@click.option('--verbose', '-v', is_flag=True, help="Show parameters and defaults")
def list_experiments(verbose):
    """List the available experiments."""
    width = max(len(name) for name in EXPERIMENTS)
    for experiment in EXPERIMENTS.values():
        tag = " [slow]" if experiment.slow else ""
        click.echo(f"{experiment.name.ljust(width)}  {experiment.summary}{tag}")
        if verbose:
            for key, value in experiment.params.items():
                click.echo(f"{'':{width}}    {key} = {value}")
