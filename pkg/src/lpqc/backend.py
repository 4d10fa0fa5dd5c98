"""Backend selection for the statevector gate kernels.

At import time this module picks the compiled Cython kernels when available
and otherwise falls back to the NumPy implementation. Both expose the same
in-place batched API (see lpqc._statevec_py). Set LPQC_BACKEND=python to
force the fallback, e.g. for the kernel benchmark or debugging.
"""
from __future__ import annotations

import os

from . import _statevec_py

_forced = os.environ.get("LPQC_BACKEND", "").lower()

if _forced == "python":
    _impl = _statevec_py
    BACKEND_NAME = "python"
else:
    try:
        from . import _statevec as _impl  # type: ignore[no-redef]

        BACKEND_NAME = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise
        _impl = _statevec_py
        BACKEND_NAME = "python"

apply_ry = _impl.apply_ry
apply_rz = _impl.apply_rz
apply_rx = _impl.apply_rx
apply_pauli_x = _impl.apply_pauli_x
apply_pauli_y = _impl.apply_pauli_y
apply_pauli_z = _impl.apply_pauli_z
apply_cnot = _impl.apply_cnot
apply_cz = _impl.apply_cz

run_gates = _impl.run_gates
adjoint_sweep = _impl.adjoint_sweep

imag_inner_pauli_x = _statevec_py.imag_inner_pauli_x
imag_inner_pauli_y = _statevec_py.imag_inner_pauli_y
imag_inner_pauli_z = _statevec_py.imag_inner_pauli_z
