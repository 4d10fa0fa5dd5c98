"""Optimal transport between density-matrix ensembles.

The ground cost between states is 1 - kappa with kappa the super-fidelity
kernel; the ensemble distance is the optimal-transport linear program over
that cost. Equal-size ensembles with uniform histograms reduce to an
assignment problem (an extreme-point optimum is a scaled permutation) and
are solved exactly via the Hungarian method; the general case runs a
transportation simplex (northwest-corner start, cycle pivoting, Bland's
lowest-index rule for determinism and anti-cycling). An entropic Sinkhorn
solver is available as an opt-in approximation for large batches.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import logsumexp

_MARGINAL_TOL = 1e-8

# Purity gaps 1 - tr(rho^2) below this are rounding residue of exactly pure
# states; they are snapped to zero so the square root in the kernel does not
# amplify them to ~1e-8 noise (worst offender: finite differences of the loss).
PURITY_SNAP = 1e-12


def _purity_gaps(states: np.ndarray) -> np.ndarray:
    gaps = 1.0 - np.sum(np.abs(states) ** 2, axis=(1, 2))
    return np.where(gaps < PURITY_SNAP, 0.0, gaps)


def as_ensemble(states) -> np.ndarray:
    """Stack a list of density matrices into a (B, D, D) array."""
    arr = np.asarray(states, dtype=np.complex128)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
        raise ValueError(f"expected (B, D, D) ensemble, got shape {arr.shape}")
    return arr


def ensemble_purities(states: np.ndarray) -> np.ndarray:
    return np.sum(np.abs(states) ** 2, axis=(1, 2))


def cross_super_fidelity(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """kappa(rho_i, sigma_j) for all pairs, shape (|X|, |Y|)."""
    x, y = as_ensemble(x), as_ensemble(y)
    if x.shape[1] != y.shape[1]:
        raise ValueError("ensembles must share the Hilbert-space dimension")
    d = x.shape[1]
    overlap = np.real(x.reshape(-1, d * d) @ y.transpose(0, 2, 1).reshape(-1, d * d).T)
    gap_x = np.sqrt(_purity_gaps(x))
    gap_y = np.sqrt(_purity_gaps(y))
    return overlap + gap_x[:, None] * gap_y[None, :]


def cost_matrix(x, y) -> np.ndarray:
    """C_ij = max(0, 1 - kappa(rho_i, sigma_j))."""
    return np.maximum(0.0, 1.0 - cross_super_fidelity(x, y))


@dataclass
class TransportResult:
    plan: np.ndarray
    cost: float
    converged: bool = True
    iterations: int = 0


def _check_histograms(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (cost.shape[0],) or b.shape != (cost.shape[1],):
        raise ValueError("histogram lengths must match the cost matrix")
    if np.any(a < 0) or np.any(b < 0):
        raise ValueError("histograms must be non-negative")
    if abs(a.sum() - b.sum()) > _MARGINAL_TOL:
        raise ValueError(f"histogram masses differ: {a.sum()} vs {b.sum()}")
    # Equalize masses exactly so the simplex sees a balanced problem.
    b = b * (a.sum() / b.sum())
    return a, b


def _uniform(n: int) -> np.ndarray:
    return np.full(n, 1.0 / n)


def ot_exact(cost: np.ndarray, a: np.ndarray | None = None,
             b: np.ndarray | None = None) -> TransportResult:
    """Exact OT plan and objective.

    Uniform square instances go through the Hungarian assignment solver;
    everything else through the transportation simplex.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n_x, n_y = cost.shape
    a = _uniform(n_x) if a is None else a
    b = _uniform(n_y) if b is None else b
    a, b = _check_histograms(cost, a, b)
    flat_a = np.allclose(a, a[0], rtol=0, atol=1e-12)
    flat_b = np.allclose(b, b[0], rtol=0, atol=1e-12)
    if flat_a and flat_b and n_x == n_y and abs(a[0] - b[0]) < 1e-15:
        rows, cols = linear_sum_assignment(cost)
        plan = np.zeros_like(cost)
        plan[rows, cols] = a[0]
        return TransportResult(plan, float((cost[rows, cols] * a[0]).sum()))
    if flat_a and flat_b and (n_x % n_y == 0 or n_y % n_x == 0):
        # Uniform histograms with divisible sizes: splitting each smaller-side
        # atom into equal replicas turns the LP into an assignment problem
        # with the same optimum.
        return _replicated_assignment(cost, a, b)
    plan = _transportation_simplex(cost, a, b)
    return TransportResult(plan, float(np.sum(plan * cost)))


def _replicated_assignment(cost: np.ndarray, a: np.ndarray, b: np.ndarray) -> TransportResult:
    n_x, n_y = cost.shape
    if n_x % n_y == 0:
        reps = n_x // n_y
        rows, cols = linear_sum_assignment(np.repeat(cost, reps, axis=1))
        plan = np.zeros_like(cost)
        np.add.at(plan, (rows, cols // reps), a[0])
    else:
        reps = n_y // n_x
        rows, cols = linear_sum_assignment(np.repeat(cost, reps, axis=0))
        plan = np.zeros_like(cost)
        np.add.at(plan, (rows // reps, cols), b[0])
    return TransportResult(plan, float(np.sum(plan * cost)))


def _northwest_corner(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """Initial basic feasible solution with exactly m+n-1 basis cells."""
    m, n = len(a), len(b)
    plan = np.zeros((m, n))
    basis: list[tuple[int, int]] = []
    rem_a, rem_b = a.copy(), b.copy()
    i = j = 0
    while True:
        basis.append((i, j))
        t = min(rem_a[i], rem_b[j])
        plan[i, j] = t
        rem_a[i] -= t
        rem_b[j] -= t
        if i == m - 1 and j == n - 1:
            break
        # On ties advance only one index to keep the basis a spanning tree.
        if rem_a[i] <= rem_b[j] and i < m - 1:
            i += 1
        else:
            j += 1
    return plan, basis


def _potentials(cost: np.ndarray, basis: list[tuple[int, int]], m: int, n: int):
    """Solve u_i + v_j = c_ij on the basis tree (BFS from u_0 = 0)."""
    row_adj: list[list[int]] = [[] for _ in range(m)]
    col_adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in basis:
        row_adj[i].append(j)
        col_adj[j].append(i)
    u = np.full(m, np.nan)
    v = np.full(n, np.nan)
    u[0] = 0.0
    stack = [("r", 0)]
    while stack:
        kind, k = stack.pop()
        if kind == "r":
            for j in row_adj[k]:
                if np.isnan(v[j]):
                    v[j] = cost[k, j] - u[k]
                    stack.append(("c", j))
        else:
            for i in col_adj[k]:
                if np.isnan(u[i]):
                    u[i] = cost[i, k] - v[k]
                    stack.append(("r", i))
    return u, v


def _basis_cycle(basis: list[tuple[int, int]], entering: tuple[int, int],
                 m: int, n: int) -> list[tuple[int, int]]:
    """Cells of the unique pivot cycle, entering cell first."""
    row_adj: dict[int, list[int]] = {}
    col_adj: dict[int, list[int]] = {}
    for i, j in basis:
        row_adj.setdefault(i, []).append(j)
        col_adj.setdefault(j, []).append(i)
    start_row, target_col = entering
    # BFS over basis edges from the entering row to the entering column.
    parent: dict[tuple[str, int], tuple[str, int]] = {}
    frontier = [("r", start_row)]
    seen = {("r", start_row)}
    found = False
    while frontier and not found:
        nxt = []
        for kind, k in frontier:
            neighbors = (
                [("c", j) for j in row_adj.get(k, [])]
                if kind == "r"
                else [("r", i) for i in col_adj.get(k, [])]
            )
            for node in neighbors:
                if node in seen:
                    continue
                seen.add(node)
                parent[node] = (kind, k)
                if node == ("c", target_col):
                    found = True
                    break
                nxt.append(node)
            if found:
                break
        frontier = nxt
    if not found:
        raise RuntimeError("degenerate basis: no pivot cycle found")
    # Walk back from the entering column to the entering row.
    path_nodes = [("c", target_col)]
    while path_nodes[-1] != ("r", start_row):
        path_nodes.append(parent[path_nodes[-1]])
    path_nodes.reverse()  # row start_row ... col target_col
    cells = []
    for (k1, a1), (k2, a2) in zip(path_nodes[:-1], path_nodes[1:]):
        cells.append((a1, a2) if k1 == "r" else (a2, a1))
    return [entering] + cells[::-1]


def _transportation_simplex(cost: np.ndarray, a: np.ndarray, b: np.ndarray,
                            tol: float = 1e-12, max_pivots: int = 100000) -> np.ndarray:
    m, n = cost.shape
    plan, basis = _northwest_corner(a, b)
    basis_set = set(basis)
    for _ in range(max_pivots):
        u, v = _potentials(cost, basis, m, n)
        reduced = cost - u[:, None] - v[None, :]
        reduced_flat = reduced.ravel()
        candidates = np.flatnonzero(reduced_flat < -tol)
        entering = None
        for idx in candidates:  # Bland's rule: lowest index wins
            cell = (idx // n, idx % n)
            if cell not in basis_set:
                entering = cell
                break
        if entering is None:
            return plan
        cycle = _basis_cycle(basis, entering, m, n)
        minus_cells = cycle[1::2]
        t = min(plan[c] for c in minus_cells)
        leaving = min(c for c in minus_cells if plan[c] == t)
        for k, c in enumerate(cycle):
            plan[c] += t if k % 2 == 0 else -t
        plan[leaving] = 0.0
        basis_set.remove(leaving)
        basis_set.add(entering)
        basis = [c for c in basis if c != leaving] + [entering]
    raise RuntimeError("transportation simplex failed to converge")


def ot_sinkhorn(cost: np.ndarray, a: np.ndarray | None = None, b: np.ndarray | None = None,
                epsilon: float = 0.01, max_iters: int = 5000,
                tol: float = 1e-9) -> TransportResult:
    """Entropic OT via log-domain Sinkhorn scaling.

    Returns the unregularized objective sum(P * C) evaluated on the
    regularized plan. Non-convergence is reported through the ``converged``
    flag, never raised.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    cost = np.asarray(cost, dtype=np.float64)
    n_x, n_y = cost.shape
    a = _uniform(n_x) if a is None else np.asarray(a, dtype=np.float64)
    b = _uniform(n_y) if b is None else np.asarray(b, dtype=np.float64)
    a, b = _check_histograms(cost, a, b)
    log_a = np.log(np.maximum(a, 1e-300))
    log_b = np.log(np.maximum(b, 1e-300))
    f = np.zeros(n_x)
    g = np.zeros(n_y)
    it = 0
    converged = False
    for it in range(1, max_iters + 1):
        f = epsilon * (log_a - logsumexp((g[None, :] - cost) / epsilon, axis=1))
        g = epsilon * (log_b - logsumexp((f[:, None] - cost) / epsilon, axis=0))
        if it % 5 == 0 or it == max_iters:
            log_plan = (f[:, None] + g[None, :] - cost) / epsilon
            plan = np.exp(log_plan)
            violation = max(
                np.max(np.abs(plan.sum(axis=1) - a)), np.max(np.abs(plan.sum(axis=0) - b))
            )
            if violation <= tol:
                converged = True
                break
    plan = np.exp((f[:, None] + g[None, :] - cost) / epsilon)
    return TransportResult(plan, float(np.sum(plan * cost)), converged, it)


def wasserstein_loss(x, y, method: str = "exact", epsilon: float = 0.01) -> float:
    """Ensemble distance: OT objective with uniform histograms."""
    c = cost_matrix(x, y)
    if method == "exact":
        return ot_exact(c).cost
    if method == "sinkhorn":
        return ot_sinkhorn(c, epsilon=epsilon).cost
    raise ValueError(f"unknown OT method {method!r}")


def entropy_regularizer(gate_probs: np.ndarray) -> float:
    """Batch mean of sum_i pi_i log pi_i (negative entropy, <= 0)."""
    pi = np.atleast_2d(np.asarray(gate_probs, dtype=np.float64))
    return float(np.mean(np.sum(pi * np.log(np.maximum(pi, 1e-300)), axis=1)))


def train_loss(x, y, gate_probs: np.ndarray | None = None, lam: float = 0.0,
               method: str = "exact") -> float:
    """D_Wass plus lambda times the gating entropy regularizer."""
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    loss = wasserstein_loss(x, y, method=method)
    if lam > 0 and gate_probs is not None:
        loss += lam * entropy_regularizer(gate_probs)
    return loss
