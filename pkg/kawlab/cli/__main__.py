#!/usr/bin/env python3
"""
CLI module entry point for python -m kawlab.cli
"""

from .commands import cli

if __name__ == '__main__':
    cli()
