"""Pure-NumPy statevector gate kernels (fallback backend).

All kernels mutate a batch of statevectors in place. The batch is a
C-contiguous complex128 array of shape (B, dim); every row is one
statevector. Qubits are addressed by *stride*: the qubit whose bit sits at
position b (from the least significant end) has stride 2**b. With the
package's big-endian convention (qubit 1 = most significant bit of the
amplitude index), qubit p out of N has stride 2**(N - p).

Rotation kernels take per-sample half-angle cosine/sine arrays of shape (B,)
so that a whole batch with sample-dependent angles is one vectorized call.
"""
from __future__ import annotations

import numpy as np


def _pair_view(states: np.ndarray, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Views (a0, a1) of the amplitudes with the stride-qubit at 0 / 1."""
    b = states.shape[0]
    v = states.reshape(b, -1, 2, stride)
    return v[:, :, 0, :], v[:, :, 1, :]


def apply_ry(states: np.ndarray, stride: int, c: np.ndarray, s: np.ndarray) -> None:
    """exp(-i Y theta/2) with c = cos(theta/2), s = sin(theta/2)."""
    a0, a1 = _pair_view(states, stride)
    cb = c[:, None, None]
    sb = s[:, None, None]
    new0 = cb * a0 - sb * a1
    a1 *= cb
    a1 += sb * a0
    a0[...] = new0


def apply_rz(states: np.ndarray, stride: int, c: np.ndarray, s: np.ndarray) -> None:
    """exp(-i Z theta/2): phases e^{-i theta/2}, e^{+i theta/2} on |0>, |1>."""
    a0, a1 = _pair_view(states, stride)
    a0 *= (c - 1j * s)[:, None, None]
    a1 *= (c + 1j * s)[:, None, None]


def apply_rx(states: np.ndarray, stride: int, c: np.ndarray, s: np.ndarray) -> None:
    """exp(-i X theta/2) with c = cos(theta/2), s = sin(theta/2)."""
    a0, a1 = _pair_view(states, stride)
    cb = c[:, None, None]
    isb = (1j * s)[:, None, None]
    new0 = cb * a0 - isb * a1
    a1 *= cb
    a1 -= isb * a0
    a0[...] = new0


def apply_pauli_x(states: np.ndarray, stride: int) -> None:
    a0, a1 = _pair_view(states, stride)
    tmp = a0.copy()
    a0[...] = a1
    a1[...] = tmp


def apply_pauli_y(states: np.ndarray, stride: int) -> None:
    a0, a1 = _pair_view(states, stride)
    tmp = a0.copy()
    a0[...] = -1j * a1
    a1[...] = 1j * tmp


def apply_pauli_z(states: np.ndarray, stride: int) -> None:
    _, a1 = _pair_view(states, stride)
    a1 *= -1.0


def _two_qubit_view(states: np.ndarray, stride_a: int, stride_b: int) -> np.ndarray:
    """6-D view with explicit axes for the two addressed qubits.

    Axis 2 is the larger-stride qubit, axis 4 the smaller-stride one.
    """
    if stride_a == stride_b:
        raise ValueError("two-qubit gate needs distinct qubits")
    hi, lo = max(stride_a, stride_b), min(stride_a, stride_b)
    b, dim = states.shape
    return states.reshape(b, dim // (2 * hi), 2, hi // (2 * lo), 2, lo)


def apply_cnot(states: np.ndarray, control_stride: int, target_stride: int) -> None:
    v = _two_qubit_view(states, control_stride, target_stride)
    if control_stride > target_stride:
        block = v[:, :, 1, :, :, :]
        swapped = block[:, :, :, ::-1, :].copy()
    else:
        block = v[:, :, :, :, 1, :]
        swapped = block[:, :, ::-1, :, :].copy()
    block[...] = swapped


def apply_cz(states: np.ndarray, stride_a: int, stride_b: int) -> None:
    v = _two_qubit_view(states, stride_a, stride_b)
    v[:, :, 1, :, 1, :] *= -1.0


def _imag_inner(lam_part: tuple, phi_part: tuple) -> np.ndarray:
    """Im sum conj(l) p accumulated per batch row from (a0, a1) view pairs."""
    out = 0.0
    for l, p in zip(lam_part, phi_part):
        out = out + np.einsum("bij,bij->b", l.real, p.imag) - np.einsum(
            "bij,bij->b", l.imag, p.real
        )
    return out


def imag_inner_pauli_x(lam: np.ndarray, phi: np.ndarray, stride: int) -> np.ndarray:
    """Im <lam| X_q |phi> per batch row, without materializing X|phi>."""
    l0, l1 = _pair_view(lam, stride)
    p0, p1 = _pair_view(phi, stride)
    return _imag_inner((l0, l1), (p1, p0))


def imag_inner_pauli_y(lam: np.ndarray, phi: np.ndarray, stride: int) -> np.ndarray:
    l0, l1 = _pair_view(lam, stride)
    p0, p1 = _pair_view(phi, stride)
    # Y|phi> = (-i p1, i p0): Im<l|Y phi> = -Re sum conj(l0) p1 + Re sum conj(l1) p0
    re = lambda l, p: np.einsum("bij,bij->b", l.real, p.real) + np.einsum(
        "bij,bij->b", l.imag, p.imag
    )
    return re(l1, p0) - re(l0, p1)


def imag_inner_pauli_z(lam: np.ndarray, phi: np.ndarray, stride: int) -> np.ndarray:
    l0, l1 = _pair_view(lam, stride)
    p0, p1 = _pair_view(phi, stride)
    return _imag_inner((l0,), (p0,)) - _imag_inner((l1,), (p1,))


# Gate program encoding shared with the compiled module: parallel int64
# arrays (kind, stride_a, stride_b, angle_idx) where kind is one of the
# opcodes below, stride_b is 0 for single-qubit gates, and angle_idx is -1
# for the fixed entanglers.
KIND_RY = 0
KIND_RZ = 1
KIND_RX = 2
KIND_CNOT = 3
KIND_CZ = 4

_ROT_BY_KIND = {KIND_RY: apply_ry, KIND_RZ: apply_rz, KIND_RX: apply_rx}
_INNER_BY_KIND = {
    KIND_RY: imag_inner_pauli_y,
    KIND_RZ: imag_inner_pauli_z,
    KIND_RX: imag_inner_pauli_x,
}


def run_gates(states, kinds, stride_a, stride_b, angle_idx, angles, invert) -> None:
    """Apply a whole gate program in place (inverse circuit when ``invert``)."""
    order = range(len(kinds) - 1, -1, -1) if invert else range(len(kinds))
    sign = -0.5 if invert else 0.5
    for g in order:
        kind = kinds[g]
        if kind <= KIND_RX:
            half = sign * angles[:, angle_idx[g]]
            _ROT_BY_KIND[kind](states, stride_a[g], np.cos(half), np.sin(half))
        elif kind == KIND_CNOT:
            apply_cnot(states, stride_a[g], stride_b[g])
        else:
            apply_cz(states, stride_a[g], stride_b[g])


def adjoint_sweep(phi, lam, kinds, stride_a, stride_b, angle_idx, angles, grads) -> None:
    """Reverse gradient sweep; consumes phi and lam, fills grads."""
    for g in range(len(kinds) - 1, -1, -1):
        kind = kinds[g]
        if kind <= KIND_RX:
            grads[:, angle_idx[g]] = _INNER_BY_KIND[kind](lam, phi, stride_a[g])
            half = -0.5 * angles[:, angle_idx[g]]
            c, s = np.cos(half), np.sin(half)
            _ROT_BY_KIND[kind](phi, stride_a[g], c, s)
            _ROT_BY_KIND[kind](lam, stride_a[g], c, s)
        elif kind == KIND_CNOT:
            apply_cnot(phi, stride_a[g], stride_b[g])
            apply_cnot(lam, stride_a[g], stride_b[g])
        else:
            apply_cz(phi, stride_a[g], stride_b[g])
            apply_cz(lam, stride_a[g], stride_b[g])
