"""Synthetic multi-cluster ensembles and PCA export.

The multi-cluster dataset places four well-separated pure centers on the
full n+m qubit register: |0...0>, |1...1>, GHZ+ and GHZ-. Each sample
perturbs one center with a single rotation layer (RY RZ per qubit, angles
drawn from N(0, scale^2)) and traces out the ancillas, so at zero scale
every sample is exactly its center reduced over the ancillas.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuits import QubitLayout, hea_apply_batch, partial_trace_batch
from .rng import philox

DEFAULT_ANGLE_SCALE = 0.05


def ghz_state(n_qubits: int, sign: int = +1) -> np.ndarray:
    psi = np.zeros(2**n_qubits, dtype=np.complex128)
    psi[0] = 1.0 / np.sqrt(2)
    psi[-1] = sign / np.sqrt(2)
    return psi


def cluster_center_states(n_qubits: int) -> np.ndarray:
    """The four pure centers on the full register, shape (4, 2^nq)."""
    dim = 2**n_qubits
    zeros = np.zeros(dim, dtype=np.complex128)
    zeros[0] = 1.0
    ones = np.zeros(dim, dtype=np.complex128)
    ones[-1] = 1.0
    return np.stack([zeros, ones, ghz_state(n_qubits, +1), ghz_state(n_qubits, -1)])


def cluster_center_dms(n_data: int, m_anc: int) -> np.ndarray:
    """Centers reduced over the ancillas, shape (4, 2^n, 2^n)."""
    layout = QubitLayout(n_data, m_anc, 0)
    return partial_trace_batch(cluster_center_states(layout.n_qubits), layout)


def gen_multicluster(
    n_data: int,
    m_anc: int,
    count: int,
    seed_or_rng: int | np.random.Generator,
    angle_scale: float = DEFAULT_ANGLE_SCALE,
    with_labels: bool = False,
):
    """Mixed-state samples around the four centers, count/4 per center."""
    if count % 4 != 0:
        raise ValueError("count must be divisible by 4")
    rng = seed_or_rng if isinstance(seed_or_rng, np.random.Generator) else philox(seed_or_rng)
    layout = QubitLayout(n_data, m_anc, 0)  # L = 0: one rotation layer
    centers = cluster_center_states(layout.n_qubits)
    per = count // 4
    labels = np.repeat(np.arange(4), per)
    inputs = centers[labels]
    angles = angle_scale * rng.standard_normal((count, layout.n_params))
    psi = hea_apply_batch(layout, angles, inputs)
    states = partial_trace_batch(psi, layout)
    return (states, labels) if with_labels else states


@dataclass
class PcaResult:
    points: np.ndarray  # (N, k) projections
    eigenvalues: np.ndarray  # all covariance eigenvalues, descending
    components: np.ndarray  # (k, d) rows; zero rows where rank fell short
    mean: np.ndarray
    rank_deficient: bool


def pca_project(vectors, k: int) -> PcaResult:
    """Project onto the top-k covariance eigenvectors.

    Deterministic sign convention: the first nonzero coordinate of every
    component is positive. When the data rank is below k the missing
    directions are zero-padded and flagged.
    """
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < k + 1:
        raise ValueError("need at least k+1 vectors of equal length")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / x.shape[0]
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    eigvecs = eigvecs[:, order]
    tol = max(1e-12, 1e-12 * max(eigvals[0], 1.0))
    rank = int(np.sum(eigvals > tol))
    components = np.zeros((k, x.shape[1]))
    for i in range(min(k, rank)):
        v = eigvecs[:, i]
        nz = np.flatnonzero(np.abs(v) > 1e-12)
        if nz.size and v[nz[0]] < 0:
            v = -v
        components[i] = v
    points = centered @ components.T
    return PcaResult(points, eigvals, components, mean, rank < k)
