"""Compare the compiled statevector kernels against the NumPy fallback.

Times the two operations that dominate training: batched HEA application and
the adjoint gradient sweep. Run from the repository root:

    python3 benchmarks/bench_kernels.py [--batch 128] [--repeats 5]

The backend is chosen at import time, so each configuration runs in a
subprocess with LPQC_BACKEND set accordingly.
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    # (n_data, m_anc, layers)
    (4, 2, 10),
    (6, 0, 10),
    (8, 0, 10),
    (8, 2, 10),
]

_WORKER = r"""
import json, sys, time
import numpy as np
from lpqc.backend import BACKEND_NAME
from lpqc.circuits import QubitLayout, hea_apply_batch, hea_gate_sequence, partial_trace_batch
from lpqc.gradients import adjoint_angle_grads, lift_cotangent

batch, repeats, cases = json.loads(sys.argv[1])
rng = np.random.default_rng(0)
out = {"backend": BACKEND_NAME, "cases": []}
for n, m, layers in cases:
    layout = QubitLayout(n, m, layers)
    theta = rng.uniform(-np.pi, np.pi, (batch, layout.n_params))
    cot = rng.normal(size=(batch, layout.data_dim, layout.data_dim))
    cot = (cot + cot.transpose(0, 2, 1)).astype(complex)
    hea_apply_batch(layout, theta)  # warm up
    fwd = []
    adj = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        psi = hea_apply_batch(layout, theta)
        fwd.append(time.perf_counter() - t0)
        lam = lift_cotangent(cot, psi, layout)
        seq = hea_gate_sequence(layout.n_qubits, layout.n_layers)
        t0 = time.perf_counter()
        adjoint_angle_grads(layout.n_qubits, seq, theta, psi.copy(), lam)
        adj.append(time.perf_counter() - t0)
    out["cases"].append({
        "layout": [n, m, layers],
        "forward_ms": 1e3 * min(fwd),
        "adjoint_ms": 1e3 * min(adj),
    })
print(json.dumps(out))
"""


def run_backend(backend: str, batch: int, repeats: int) -> dict:
    env = dict(os.environ, LPQC_BACKEND=backend)
    payload = json.dumps([batch, repeats, CASES])
    proc = subprocess.run(
        [sys.executable, "-c", _WORKER, payload],
        capture_output=True, text=True, env=env, check=True,
    )
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--batch", type=int, default=128)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()
    results = {}
    for backend in ("python", "compiled"):
        try:
            results[backend] = run_backend(backend, args.batch, args.repeats)
            reported = results[backend]["backend"]
            if reported != backend:
                print(f"note: requested {backend}, got {reported} (extension not built?)")
        except subprocess.CalledProcessError as exc:
            print(f"{backend} backend failed:\n{exc.stderr}")
            return 1
    print(f"\nbatch={args.batch}, best of {args.repeats} repeats, times in ms\n")
    header = f"{'layout (n,m,L)':>16} | {'fwd py':>9} {'fwd cy':>9} {'speedup':>7} | {'adj py':>9} {'adj cy':>9} {'speedup':>7}"
    print(header)
    print("-" * len(header))
    for py, cy in zip(results["python"]["cases"], results["compiled"]["cases"]):
        n, m, layers = py["layout"]
        fp, fc = py["forward_ms"], cy["forward_ms"]
        ap, ac = py["adjoint_ms"], cy["adjoint_ms"]
        print(f"{f'({n},{m},{layers})':>16} | {fp:9.2f} {fc:9.2f} {fp / fc:6.1f}x | "
              f"{ap:9.2f} {ac:9.2f} {ap / ac:6.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
