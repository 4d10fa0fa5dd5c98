# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled statevector gate kernels.

Same contract as lpqc._statevec_py: every function mutates a C-contiguous
(batch, dim) complex128 array in place; qubits are addressed by stride;
rotation kernels take per-sample half-angle cosine/sine arrays of shape
(batch,). The fused run_gates / adjoint_sweep entry points execute a whole
gate program (see lpqc._statevec_py for the array encoding) in one call,
which is where the compiled lane wins: no per-gate Python dispatch.
lpqc.backend picks this module when it imported successfully.

Pair enumeration: strides are powers of two, so the p-th amplitude pair of
a stride-s qubit is (i, i+s) with i = ((p & ~(s-1)) << 1) | (p & (s-1)).
"""

from libc.math cimport cos, sin

cimport cython

# Gate program opcodes, mirrored in _statevec_py.
cdef long KIND_RY = 0
cdef long KIND_RZ = 1
cdef long KIND_RX = 2
cdef long KIND_CNOT = 3
cdef long KIND_CZ = 4


cdef inline void _rot_row(double complex* row, Py_ssize_t dim, Py_ssize_t stride,
                          long kind, double c, double s) noexcept nogil:
    cdef Py_ssize_t p, i, j
    cdef Py_ssize_t mask = stride - 1
    cdef Py_ssize_t n_pairs = dim >> 1
    cdef double complex a0, a1, ph0, ph1
    if kind == KIND_RY:
        for p in range(n_pairs):
            i = ((p & ~mask) << 1) | (p & mask)
            j = i + stride
            a0 = row[i]
            a1 = row[j]
            row[i] = c * a0 - s * a1
            row[j] = s * a0 + c * a1
    elif kind == KIND_RZ:
        ph0 = c - 1j * s
        ph1 = c + 1j * s
        for p in range(n_pairs):
            i = ((p & ~mask) << 1) | (p & mask)
            j = i + stride
            row[i] = ph0 * row[i]
            row[j] = ph1 * row[j]
    else:  # KIND_RX
        ph0 = 1j * s
        for p in range(n_pairs):
            i = ((p & ~mask) << 1) | (p & mask)
            j = i + stride
            a0 = row[i]
            a1 = row[j]
            row[i] = c * a0 - ph0 * a1
            row[j] = c * a1 - ph0 * a0


cdef inline void _cnot_row(double complex* row, Py_ssize_t dim,
                           Py_ssize_t cs, Py_ssize_t ts) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double complex tmp
    for i in range(dim):
        if (i & cs) and not (i & ts):
            j = i | ts
            tmp = row[i]
            row[i] = row[j]
            row[j] = tmp


cdef inline void _cz_row(double complex* row, Py_ssize_t dim,
                         Py_ssize_t both) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(dim):
        if (i & both) == both:
            row[i] = -row[i]


cdef inline double _imag_inner_row(double complex* lam, double complex* phi,
                                   Py_ssize_t dim, Py_ssize_t stride,
                                   long kind) noexcept nogil:
    cdef Py_ssize_t p, i, j
    cdef Py_ssize_t mask = stride - 1
    cdef Py_ssize_t n_pairs = dim >> 1
    cdef double acc = 0.0
    cdef double complex l0, l1, p0, p1
    for p in range(n_pairs):
        i = ((p & ~mask) << 1) | (p & mask)
        j = i + stride
        l0 = lam[i]; l1 = lam[j]
        p0 = phi[i]; p1 = phi[j]
        if kind == KIND_RY:
            # Y|phi> = (-i p1, i p0)
            acc += l1.real * p0.real + l1.imag * p0.imag
            acc -= l0.real * p1.real + l0.imag * p1.imag
        elif kind == KIND_RZ:
            acc += l0.real * p0.imag - l0.imag * p0.real
            acc -= l1.real * p1.imag - l1.imag * p1.real
        else:
            acc += l0.real * p1.imag - l0.imag * p1.real
            acc += l1.real * p0.imag - l1.imag * p0.real
    return acc


def apply_ry(double complex[:, ::1] states, Py_ssize_t stride,
             double[::1] c, double[::1] s):
    cdef Py_ssize_t b
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    with nogil:
        for b in range(nb):
            _rot_row(&states[b, 0], dim, stride, KIND_RY, c[b], s[b])


def apply_rz(double complex[:, ::1] states, Py_ssize_t stride,
             double[::1] c, double[::1] s):
    cdef Py_ssize_t b
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    with nogil:
        for b in range(nb):
            _rot_row(&states[b, 0], dim, stride, KIND_RZ, c[b], s[b])


def apply_rx(double complex[:, ::1] states, Py_ssize_t stride,
             double[::1] c, double[::1] s):
    cdef Py_ssize_t b
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    with nogil:
        for b in range(nb):
            _rot_row(&states[b, 0], dim, stride, KIND_RX, c[b], s[b])


def apply_pauli_x(double complex[:, ::1] states, Py_ssize_t stride):
    cdef Py_ssize_t b, p, i, j
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    cdef Py_ssize_t mask = stride - 1, n_pairs = dim >> 1
    cdef double complex tmp
    with nogil:
        for b in range(nb):
            for p in range(n_pairs):
                i = ((p & ~mask) << 1) | (p & mask)
                j = i + stride
                tmp = states[b, i]
                states[b, i] = states[b, j]
                states[b, j] = tmp


def apply_pauli_y(double complex[:, ::1] states, Py_ssize_t stride):
    cdef Py_ssize_t b, p, i, j
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    cdef Py_ssize_t mask = stride - 1, n_pairs = dim >> 1
    cdef double complex tmp
    with nogil:
        for b in range(nb):
            for p in range(n_pairs):
                i = ((p & ~mask) << 1) | (p & mask)
                j = i + stride
                tmp = states[b, i]
                states[b, i] = -1j * states[b, j]
                states[b, j] = 1j * tmp


def apply_pauli_z(double complex[:, ::1] states, Py_ssize_t stride):
    cdef Py_ssize_t b, p, i
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    cdef Py_ssize_t mask = stride - 1, n_pairs = dim >> 1
    with nogil:
        for b in range(nb):
            for p in range(n_pairs):
                i = (((p & ~mask) << 1) | (p & mask)) + stride
                states[b, i] = -states[b, i]


def apply_cnot(double complex[:, ::1] states, Py_ssize_t control_stride,
               Py_ssize_t target_stride):
    cdef Py_ssize_t b
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    with nogil:
        for b in range(nb):
            _cnot_row(&states[b, 0], dim, control_stride, target_stride)


def apply_cz(double complex[:, ::1] states, Py_ssize_t stride_a,
             Py_ssize_t stride_b):
    cdef Py_ssize_t b
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    cdef Py_ssize_t both = stride_a | stride_b
    with nogil:
        for b in range(nb):
            _cz_row(&states[b, 0], dim, both)


def imag_inner_pauli_x(double complex[:, ::1] lam, double complex[:, ::1] phi,
                       Py_ssize_t stride, double[::1] out):
    cdef Py_ssize_t b
    cdef Py_ssize_t nb = lam.shape[0], dim = lam.shape[1]
    with nogil:
        for b in range(nb):
            out[b] = _imag_inner_row(&lam[b, 0], &phi[b, 0], dim, stride, KIND_RX)


def imag_inner_pauli_y(double complex[:, ::1] lam, double complex[:, ::1] phi,
                       Py_ssize_t stride, double[::1] out):
    cdef Py_ssize_t b
    cdef Py_ssize_t nb = lam.shape[0], dim = lam.shape[1]
    with nogil:
        for b in range(nb):
            out[b] = _imag_inner_row(&lam[b, 0], &phi[b, 0], dim, stride, KIND_RY)


def imag_inner_pauli_z(double complex[:, ::1] lam, double complex[:, ::1] phi,
                       Py_ssize_t stride, double[::1] out):
    cdef Py_ssize_t b
    cdef Py_ssize_t nb = lam.shape[0], dim = lam.shape[1]
    with nogil:
        for b in range(nb):
            out[b] = _imag_inner_row(&lam[b, 0], &phi[b, 0], dim, stride, KIND_RZ)


def run_gates(double complex[:, ::1] states, long[::1] kinds, long[::1] stride_a,
              long[::1] stride_b, long[::1] angle_idx, double[:, ::1] angles,
              bint invert):
    """Apply a whole gate program in place (reversed order with negated
    angles when ``invert``)."""
    cdef Py_ssize_t nb = states.shape[0], dim = states.shape[1]
    cdef Py_ssize_t n_gates = kinds.shape[0]
    cdef Py_ssize_t g, gi, b
    cdef long kind
    cdef double half, sign = -0.5 if invert else 0.5
    with nogil:
        for gi in range(n_gates):
            g = n_gates - 1 - gi if invert else gi
            kind = kinds[g]
            if kind <= KIND_RX:
                for b in range(nb):
                    half = sign * angles[b, angle_idx[g]]
                    _rot_row(&states[b, 0], dim, stride_a[g], kind, cos(half), sin(half))
            elif kind == KIND_CNOT:
                for b in range(nb):
                    _cnot_row(&states[b, 0], dim, stride_a[g], stride_b[g])
            else:
                for b in range(nb):
                    _cz_row(&states[b, 0], dim, stride_a[g] | stride_b[g])


def adjoint_sweep(double complex[:, ::1] phi, double complex[:, ::1] lam,
                  long[::1] kinds, long[::1] stride_a, long[::1] stride_b,
                  long[::1] angle_idx, double[:, ::1] angles,
                  double[:, ::1] grads):
    """Reverse gradient sweep over a gate program.

    ``phi`` must hold the circuit output and ``lam`` the cotangent state;
    both are consumed. Writes Im <lam| H_k |phi> into grads per rotation.
    """
    cdef Py_ssize_t nb = phi.shape[0], dim = phi.shape[1]
    cdef Py_ssize_t n_gates = kinds.shape[0]
    cdef Py_ssize_t g, b
    cdef long kind
    cdef double half, c, s
    cdef Py_ssize_t both
    with nogil:
        for g in range(n_gates - 1, -1, -1):
            kind = kinds[g]
            if kind <= KIND_RX:
                for b in range(nb):
                    grads[b, angle_idx[g]] = _imag_inner_row(
                        &lam[b, 0], &phi[b, 0], dim, stride_a[g], kind)
                    half = -0.5 * angles[b, angle_idx[g]]
                    c = cos(half)
                    s = sin(half)
                    _rot_row(&phi[b, 0], dim, stride_a[g], kind, c, s)
                    _rot_row(&lam[b, 0], dim, stride_a[g], kind, c, s)
            elif kind == KIND_CNOT:
                for b in range(nb):
                    _cnot_row(&phi[b, 0], dim, stride_a[g], stride_b[g])
                    _cnot_row(&lam[b, 0], dim, stride_a[g], stride_b[g])
            else:
                both = stride_a[g] | stride_b[g]
                for b in range(nb):
                    _cz_row(&phi[b, 0], dim, both)
                    _cz_row(&lam[b, 0], dim, both)
