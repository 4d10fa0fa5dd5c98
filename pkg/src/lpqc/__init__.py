"""Latent-conditioned parameterized quantum circuits (LPQC).

Generative modeling of density-matrix ensembles: classical networks map
latent samples to circuit parameters, an ancilla-assisted hardware-efficient
ansatz produces states, and training minimizes an optimal-transport loss
built on the super-fidelity kernel. Includes baselines (no-latent Gaussian,
random-deterministic hybrid, latent MLP, incremental projected ensembles), a
gradient-norm benchmark, and a molecule <-> state amplitude codec.
"""

__version__ = "0.1.0"

from .backend import BACKEND_NAME
from .circuits import QubitLayout

__all__ = ["BACKEND_NAME", "QubitLayout", "__version__"]
