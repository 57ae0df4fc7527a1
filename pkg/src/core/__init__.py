# Lattice, set functions, integrals, maximal operators and experiments
