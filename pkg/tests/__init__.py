"""
Kawlab Tests
============

Unit and integration tests for the kawlab package.

Structure:
- unit/ - Unit tests for transforms, operators, solvers, networks and the CLI helpers
- integration/ - End-to-end experiment runs through the CLI
"""
