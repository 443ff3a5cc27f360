import logging

import click
import numpy as np

from kawlab import __version__
from kawlab.common.errors import (
    AcceptanceError,
    ArgumentError,
    ConfigError,
    ConvergenceError,
    KawlabError,
    SizeError,
    StageError,
    TrainingError,
    WitnessError,
)
from kawlab.cli.experiments import EXPERIMENTS, experiment_command, list_experiments, run
from kawlab.cli.tools import (
    attack,
    certify_ripl,
    destabilize_demo,
    noise_mc,
    optimal_map,
    probe_lipschitz,
    solve_qcbp,
    thm_demo,
    train_command,
    tumor_demo,
)

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_ACCEPTANCE = 4

NUMERICAL_ERRORS = (ConvergenceError, TrainingError, SizeError, ArgumentError, StageError, np.linalg.LinAlgError)


def exit_code_for(error: BaseException) -> int:
    if isinstance(error, ConfigError):
        return EXIT_CONFIG
    if isinstance(error, (AcceptanceError, WitnessError)):
        return EXIT_ACCEPTANCE
    if isinstance(error, NUMERICAL_ERRORS):
        return EXIT_NUMERICAL
    return 1


class KawlabGroup(click.Group):
    """Maps library errors to exit codes and resolves bare experiment names."""

    def get_command(self, ctx, cmd_name):
        command = super().get_command(ctx, cmd_name)
        if command is None and cmd_name in EXPERIMENTS:
            command = experiment_command(cmd_name)
        return command

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except KawlabError as e:
            click.echo(f"[ERROR] {e}", err=True)
            if isinstance(e, AcceptanceError):
                for check in e.failed_checks:
                    click.echo(f"[ERROR]   {check.name}: {check.lhs:.6g} {check.rel} {check.rhs:.6g}", err=True)
            ctx.exit(exit_code_for(e))
        except np.linalg.LinAlgError as e:
            click.echo(f"[ERROR] linear algebra failure: {e}", err=True)
            ctx.exit(EXIT_NUMERICAL)


@click.group(cls=KawlabGroup)
@click.version_option(__version__, prog_name="kawlab")
@click.option('--verbose', '-v', is_flag=True, help="Log progress at INFO level")
def cli(verbose):
    """Kawlab - instabilities of learned reconstruction at desk scale."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )


cli.add_command(run)
cli.add_command(list_experiments)

cli.add_command(solve_qcbp)
cli.add_command(certify_ripl)
cli.add_command(train_command)
cli.add_command(optimal_map)
cli.add_command(probe_lipschitz)
cli.add_command(attack)
cli.add_command(noise_mc)
cli.add_command(tumor_demo)
cli.add_command(destabilize_demo)
cli.add_command(thm_demo)
