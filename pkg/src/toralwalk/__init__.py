"""Quenched limit theorems for random walks of commuting toral maps.

Modules
-------
zlattice   exact sublattices of Z^d, Hermite forms and annulator groups
rwalk      walk invariants, local limit theorem, Green sums, kernel measures
pathsim    sampled paths, local times and self-intersections
toralact   commuting integer matrices, orbits and spectral densities
ergsum     exact modular orbit sums and barycenter norms
cumulant   set-partition cumulants and summation conditions
cltlab     Monte Carlo experiments and goodness-of-fit reports
"""

__version__ = "0.1.0"
