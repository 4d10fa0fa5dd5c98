"""Dense statevector simulation of the hardware-efficient ansatz (HEA).

Conventions, fixed package-wide:

* Qubit 1 is the most significant bit of the amplitude index; the m ancilla
  qubits are the trailing (least significant) positions, which makes the
  partial trace a contiguous block contraction.
* One HEA block on qubit p is R_p(theta) = RY(theta_y) @ RZ(theta_z), i.e.
  the Z rotation acts first. Rotations use the exp(-i theta P / 2)
  convention, so each gate is 1/2-Lipschitz in its angle.
* The circuit is U = U_L ... U_1 U_0 where U_0 applies rotations on every
  qubit and each U_ell (ell >= 1) applies the CNOT chain
  (1,2), (2,3), ..., (N-1,N) followed by rotations on every qubit.
* Angles are stored layer-major, then qubit-major, then (Y angle, Z angle),
  for a total of K = 2 N (L+1) parameters.

All gate applications run through lpqc.backend and operate on batches of
statevectors; the single-state functions below are thin wrappers.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _statevec_py, backend


@dataclass(frozen=True)
class QubitLayout:
    """Wire counts and depth of the ansatz."""

    n_data: int
    m_anc: int
    n_layers: int

    def __post_init__(self) -> None:
        if self.n_data < 1:
            raise ValueError("need at least one data qubit")
        if self.m_anc < 0 or self.n_layers < 0:
            raise ValueError("ancilla and layer counts must be non-negative")

    @property
    def n_qubits(self) -> int:
        return self.n_data + self.m_anc

    @property
    def n_params(self) -> int:
        """K = 2 N (L+1): layer 0 plus L entangling layers, 2 angles per qubit."""
        return 2 * self.n_qubits * (self.n_layers + 1)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def data_dim(self) -> int:
        return 2**self.n_data

    @property
    def anc_dim(self) -> int:
        return 2**self.m_anc


# A gate is (kind, a, b): for rotations a is the 1-based qubit and b the
# index into the angle vector; for "cnot"/"cz" a, b are control/target qubits.
Gate = tuple[str, int, int]

_KIND_CODES = {
    "ry": _statevec_py.KIND_RY,
    "rz": _statevec_py.KIND_RZ,
    "rx": _statevec_py.KIND_RX,
    "cnot": _statevec_py.KIND_CNOT,
    "cz": _statevec_py.KIND_CZ,
}


def qubit_stride(n_qubits: int, qubit: int) -> int:
    """Bit stride of 1-based qubit index under the big-endian convention."""
    if not 1 <= qubit <= n_qubits:
        raise ValueError(f"qubit {qubit} out of range for {n_qubits} qubits")
    return 1 << (n_qubits - qubit)


@lru_cache(maxsize=None)
def gate_program(n_qubits: int, sequence: tuple[Gate, ...]):
    """Typed-array encoding of a gate sequence for the fused kernels."""
    kinds = np.empty(len(sequence), dtype=np.int64)
    stride_a = np.zeros(len(sequence), dtype=np.int64)
    stride_b = np.zeros(len(sequence), dtype=np.int64)
    angle_idx = np.full(len(sequence), -1, dtype=np.int64)
    for g, (kind, a, b) in enumerate(sequence):
        if kind not in _KIND_CODES:
            raise ValueError(f"unknown gate kind {kind!r}")
        kinds[g] = _KIND_CODES[kind]
        stride_a[g] = qubit_stride(n_qubits, a)
        if kind in ("cnot", "cz"):
            stride_b[g] = qubit_stride(n_qubits, b)
        else:
            angle_idx[g] = b
    return kinds, stride_a, stride_b, angle_idx


@lru_cache(maxsize=None)
def hea_gate_sequence(n_qubits: int, n_layers: int) -> tuple[Gate, ...]:
    """Gate list of the HEA in application order (first gate acts first)."""
    seq: list[Gate] = []

    def rotations(layer: int) -> None:
        for p in range(1, n_qubits + 1):
            base = 2 * (layer * n_qubits + p - 1)
            seq.append(("rz", p, base + 1))
            seq.append(("ry", p, base))

    rotations(0)
    for layer in range(1, n_layers + 1):
        for p in range(1, n_qubits):
            seq.append(("cnot", p, p + 1))
        rotations(layer)
    return tuple(seq)


def apply_gates(
    states: np.ndarray,
    n_qubits: int,
    sequence: tuple[Gate, ...],
    angles: np.ndarray,
    invert: bool = False,
) -> None:
    """Apply a gate sequence in place to a (B, dim) batch.

    ``angles`` has shape (B, K); rotation gates index into it per sample.
    With ``invert`` the inverse circuit is applied (reversed order, negated
    angles; CNOT/CZ are self-inverse).
    """
    program = gate_program(n_qubits, tuple(sequence))
    backend.run_gates(states, *program, np.ascontiguousarray(angles), invert)


def zero_state(n_qubits: int, batch: int | None = None) -> np.ndarray:
    """|0...0> as a single vector or a (batch, dim) array."""
    dim = 2**n_qubits
    if batch is None:
        psi = np.zeros(dim, dtype=np.complex128)
        psi[0] = 1.0
        return psi
    psi = np.zeros((batch, dim), dtype=np.complex128)
    psi[:, 0] = 1.0
    return psi


def hea_apply_batch(
    layout: QubitLayout, angles: np.ndarray, states: np.ndarray | None = None
) -> np.ndarray:
    """U(theta_b)|states_b> for a batch; defaults to |0...0> inputs."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.ndim != 2 or angles.shape[1] != layout.n_params:
        raise ValueError(
            f"angles must have shape (B, {layout.n_params}), got {angles.shape}"
        )
    if states is None:
        states = zero_state(layout.n_qubits, batch=angles.shape[0])
    else:
        states = np.array(states, dtype=np.complex128, order="C")
        if states.shape != (angles.shape[0], layout.dim):
            raise ValueError(
                f"states must have shape ({angles.shape[0]}, {layout.dim}), got {states.shape}"
            )
    apply_gates(states, layout.n_qubits, hea_gate_sequence(layout.n_qubits, layout.n_layers), angles)
    return states


def hea_apply(
    layout: QubitLayout, angles: np.ndarray, state: np.ndarray | None = None
) -> np.ndarray:
    """Single-state HEA application; returns a fresh unit-norm statevector."""
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (layout.n_params,):
        raise ValueError(f"expected {layout.n_params} angles, got shape {angles.shape}")
    batch = None if state is None else np.asarray(state, dtype=np.complex128)[None, :]
    return hea_apply_batch(layout, angles[None, :], batch)[0]


def partial_trace_ancilla(state: np.ndarray, layout: QubitLayout) -> np.ndarray:
    """Tr_A |psi><psi| over the trailing m ancilla qubits."""
    state = np.asarray(state, dtype=np.complex128)
    if state.shape != (layout.dim,):
        raise ValueError(f"state has dimension {state.shape}, layout wants ({layout.dim},)")
    block = state.reshape(layout.data_dim, layout.anc_dim)
    return block @ block.conj().T


def partial_trace_batch(states: np.ndarray, layout: QubitLayout) -> np.ndarray:
    """Batched partial trace: (B, dim) -> (B, 2^n, 2^n)."""
    block = states.reshape(-1, layout.data_dim, layout.anc_dim)
    return block @ block.conj().transpose(0, 2, 1)


# --- density-matrix metrics -------------------------------------------------


def purity(rho: np.ndarray) -> float:
    """tr(rho^2); for Hermitian rho this is the squared Frobenius norm."""
    return float(np.sum(np.abs(rho) ** 2))


def super_fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """tr(rho sigma) + sqrt((1 - tr rho^2)(1 - tr sigma^2)).

    Symmetric, equals 1 on identical states, and upper-bounds the fidelity;
    for pure sigma it reduces to <psi|rho|psi> exactly. Purity gaps below
    1e-12 are rounding residue of pure states and count as zero.
    """
    if rho.shape != sigma.shape:
        raise ValueError("density matrices must share a dimension")

    def gap(state):
        g = 1.0 - purity(state)
        return g if g >= 1e-12 else 0.0

    overlap = float(np.real(np.sum(rho * sigma.T)))
    return overlap + np.sqrt(gap(rho) * gap(sigma))


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Half the trace norm of rho - sigma."""
    if rho.shape != sigma.shape:
        raise ValueError("density matrices must share a dimension")
    eigs = np.linalg.eigvalsh(rho - sigma)
    return 0.5 * float(np.sum(np.abs(eigs)))


def dm_to_real_vector(rho: np.ndarray) -> np.ndarray:
    """Injective real coordinates of a Hermitian matrix.

    Order: diagonal (real), upper off-diagonal real parts, upper
    off-diagonal imaginary parts, each block row-major. Length d^2.
    """
    rho = np.asarray(rho)
    d = rho.shape[0]
    iu, ju = np.triu_indices(d, k=1)
    off = rho[iu, ju]
    return np.concatenate([np.real(np.diag(rho)), np.real(off), np.imag(off)])


def real_vector_to_dm(vec: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of dm_to_real_vector."""
    vec = np.asarray(vec, dtype=np.float64)
    n_off = dim * (dim - 1) // 2
    if vec.shape != (dim * dim,):
        raise ValueError(f"expected length {dim * dim}, got {vec.shape}")
    rho = np.zeros((dim, dim), dtype=np.complex128)
    rho[np.diag_indices(dim)] = vec[:dim]
    iu, ju = np.triu_indices(dim, k=1)
    upper = vec[dim : dim + n_off] + 1j * vec[dim + n_off :]
    rho[iu, ju] = upper
    rho[ju, iu] = upper.conj()
    return rho


def validate_state_vector(psi: np.ndarray, tol: float = 1e-10) -> None:
    norm = np.linalg.norm(psi)
    if abs(norm - 1.0) > tol:
        raise ValueError(f"statevector norm {norm} deviates from 1 by more than {tol}")


def validate_density_matrix(
    rho: np.ndarray, herm_tol: float = 1e-10, trace_tol: float = 1e-10, eig_tol: float = 1e-9
) -> None:
    """Check Hermiticity, unit trace, and positivity (up to numerical slack)."""
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    herm_gap = np.max(np.abs(rho - rho.conj().T))
    if herm_gap > herm_tol:
        raise ValueError(f"not Hermitian: max |rho - rho^dag| = {herm_gap}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > trace_tol:
        raise ValueError(f"trace {tr} deviates from 1")
    min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))))
    if min_eig < -eig_tol:
        raise ValueError(f"negative eigenvalue {min_eig}")
