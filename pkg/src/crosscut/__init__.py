"""crosscut: cross-platform state similarity for wire-cut circuits.

Simulates wire-cut circuits on two independent platforms, estimates their
state overlap and fidelity with unbiased randomized-measurement estimators
(including readout-error mitigation), and builds privacy-preserving
federated quantum kernels for a transverse-field Ising phase-learning task.
"""

__version__ = "0.1.0"
