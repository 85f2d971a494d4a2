"""Quench dynamics of disordered SU(N)-symmetric Heisenberg chains.

Dense-tensor MPS engine (TEBD with second-order Trotter sweeps), power-law
disorder sampling, entangled singlet initial states, exact-diagonalization
oracles, and the observable/aggregation stack used by the experiment harness.
"""

__version__ = "0.1.0"
