"""kawlab package main entry point"""

from kawlab.cli.commands import cli

if __name__ == "__main__":
    cli()
