"""
Entry point for the kawlab CLI command.
"""
from kawlab.cli.commands import cli

if __name__ == '__main__':
    cli()
