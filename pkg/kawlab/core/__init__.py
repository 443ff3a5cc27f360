"""
Numerical core: transforms, operators, solvers, certificates, networks and probes.
"""
