"""Reverse-mode gradients through the full pipeline, plus the optimizer.

Gradient path for the circuit families:

    loss --(fixed optimal plan, Danskin)--> d loss / d rho
         --(ancilla lift)--> cotangent statevector |lambda> = (G (x) I)|psi>
         --(adjoint reverse sweep)--> d loss / d angles
         --(generator backward)--> d loss / d weights.

The adjoint sweep walks the gate list backwards, keeping |phi> (the state
with gates up to the current one applied) and |lambda> in lock step; for a
rotation exp(-i theta H / 2) the contribution is Im <lambda| H |phi>. Cost
is O(#gates * 2^(n+m)) per sample with three kernel calls per rotation.

Super-fidelity cotangent: with kappa(rho, sigma) = tr(rho sigma)
+ sqrt((1 - tr rho^2)(1 - tr sigma^2)), the Hermitian gradient is
d kappa / d rho = sigma - rho * sqrt((1 - tr sigma^2)/(1 - tr rho^2)).
The square-root factor diverges at the pure boundary, so 1 - tr rho^2 is
clamped below at 1e-12; for pipelines that produce exactly pure states
(m_anc = 0) the root term is identically zero along the whole parameter
family, so its derivative is dropped exactly instead of clamped.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .circuits import (
    QubitLayout,
    gate_program,
    hea_apply_batch,
    hea_gate_sequence,
    partial_trace_batch,
)
from . import backend
from .networks import MoeGenerator
from .transport import TransportResult, cross_super_fidelity, ot_exact, ot_sinkhorn

PURITY_CLAMP = 1e-12


def adjoint_angle_grads(
    n_qubits: int,
    sequence,
    angles: np.ndarray,
    psi_final: np.ndarray,
    lam_final: np.ndarray,
) -> np.ndarray:
    """Batched reverse sweep; returns d loss / d angles of shape (B, K).

    ``psi_final`` is the circuit output and ``lam_final`` the cotangent
    statevector; both are consumed (mutated in place).
    """
    batch, k = angles.shape
    grads = np.zeros((batch, k))
    program = gate_program(n_qubits, tuple(sequence))
    backend.adjoint_sweep(psi_final, lam_final, *program,
                          np.ascontiguousarray(angles), grads)
    return grads


def lift_cotangent(cotangents: np.ndarray, psi: np.ndarray, layout: QubitLayout) -> np.ndarray:
    """|lambda> = (G (x) I_anc)|psi> for Hermitian dL/drho cotangents."""
    block = psi.reshape(-1, layout.data_dim, layout.anc_dim)
    return (cotangents @ block).reshape(-1, layout.dim)


def circuit_grad_adjoint(
    layout: QubitLayout, angles: np.ndarray, cotangent: np.ndarray
) -> np.ndarray:
    """Exact d loss / d angles for a single sample.

    ``cotangent`` is the Hermitian matrix G with dL = tr(G drho) where
    rho = Tr_anc |psi(theta)><psi(theta)|.
    """
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape != (layout.n_params,):
        raise ValueError(f"expected {layout.n_params} angles, got {angles.shape}")
    cotangent = np.asarray(cotangent, dtype=np.complex128)
    if cotangent.shape != (layout.data_dim, layout.data_dim):
        raise ValueError("cotangent must act on the data register")
    theta = angles[None, :]
    psi = hea_apply_batch(layout, theta)
    lam = lift_cotangent(cotangent[None, :, :], psi, layout)
    seq = hea_gate_sequence(layout.n_qubits, layout.n_layers)
    return adjoint_angle_grads(layout.n_qubits, seq, theta, psi, lam)[0]


def circuit_grad_paramshift(
    layout: QubitLayout, angles: np.ndarray, loss_fn: Callable[[np.ndarray], float]
) -> np.ndarray:
    """Parameter-shift oracle: dL/dtheta_k = (L(+pi/2) - L(-pi/2)) / 2."""
    angles = np.asarray(angles, dtype=np.float64)
    grad = np.zeros_like(angles)
    for k in range(angles.size):
        shifted = angles.copy()
        shifted[k] = angles[k] + np.pi / 2
        up = loss_fn(shifted)
        shifted[k] = angles[k] - np.pi / 2
        dn = loss_fn(shifted)
        grad[k] = 0.5 * (up - dn)
    return grad


def super_fidelity_rho_grad(rho: np.ndarray, sigma: np.ndarray,
                            pure_rho_family: bool = False) -> np.ndarray:
    """Hermitian gradient d kappa / d rho for a single pair."""
    sigma_gap = max(0.0, 1.0 - float(np.sum(np.abs(sigma) ** 2)))
    if pure_rho_family:
        w = 0.0
    else:
        rho_gap = max(PURITY_CLAMP, 1.0 - float(np.sum(np.abs(rho) ** 2)))
        w = np.sqrt(sigma_gap / rho_gap)
    return sigma - w * rho


def wasserstein_cotangents(
    plan: np.ndarray,
    rho: np.ndarray,
    targets: np.ndarray,
    active: np.ndarray | None = None,
    pure_generated: bool = False,
) -> np.ndarray:
    """dD/drho_i = sum_j P_ij dC_ij/drho_i with the plan held fixed.

    ``active`` masks entries where the cost clamp max(0, 1 - kappa) binds.
    ``pure_generated`` marks pipelines whose generated states are exactly
    pure so the purity-gap term vanishes identically.
    """
    weights = plan if active is None else plan * active
    sigma_gap = np.maximum(0.0, 1.0 - np.sum(np.abs(targets) ** 2, axis=(1, 2)))
    if pure_generated:
        w = np.zeros(rho.shape[0])
    else:
        rho_gap = np.maximum(PURITY_CLAMP, 1.0 - np.sum(np.abs(rho) ** 2, axis=(1, 2)))
        w = (weights * np.sqrt(sigma_gap)[None, :]).sum(axis=1) / np.sqrt(rho_gap)
    d = rho.shape[1]
    sigma_mix = (weights @ targets.reshape(-1, d * d)).reshape(-1, d, d)
    return w[:, None, None] * rho - sigma_mix


def ensemble_loss_and_theta_grads(
    layout: QubitLayout,
    theta: np.ndarray,
    targets: np.ndarray,
    ot_method: str = "exact",
    sinkhorn_epsilon: float = 0.01,
) -> tuple[float, np.ndarray, dict]:
    """Wasserstein loss of the generated batch and d loss / d angles.

    Returns (wasserstein, dtheta (B, K), extras) where extras carries the
    plan, cost matrix, states, and the generated density matrices.
    """
    theta = np.atleast_2d(np.asarray(theta, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.complex128)
    psi = hea_apply_batch(layout, theta)
    rho = partial_trace_batch(psi, layout)
    kappa = cross_super_fidelity(rho, targets)
    raw = 1.0 - kappa
    cost = np.maximum(0.0, raw)
    if ot_method == "exact":
        res: TransportResult = ot_exact(cost)
    elif ot_method == "sinkhorn":
        res = ot_sinkhorn(cost, epsilon=sinkhorn_epsilon)
    else:
        raise ValueError(f"unknown OT method {ot_method!r}")
    cotangents = wasserstein_cotangents(
        res.plan, rho, targets, active=(raw > 0), pure_generated=(layout.m_anc == 0)
    )
    lam = lift_cotangent(cotangents, psi, layout)
    seq = hea_gate_sequence(layout.n_qubits, layout.n_layers)
    dtheta = adjoint_angle_grads(layout.n_qubits, seq, theta, psi, lam)
    extras = {"plan": res.plan, "cost": cost, "rho": rho, "ot": res}
    return res.cost, dtheta, extras


def backward_full(
    zs: np.ndarray,
    gen: MoeGenerator,
    targets: np.ndarray,
    lam: float = 0.0,
    ot_method: str = "exact",
) -> tuple[float, list[np.ndarray], dict]:
    """Training loss and weight gradients for the latent-conditioned model.

    Chains: fixed-plan OT gradient -> super-fidelity kernel -> adjoint
    circuit sweep -> expert/gating backward, plus the entropy regularizer
    (batch mean of sum_i pi_i log pi_i) when lam > 0 and E > 1.
    """
    zs = np.atleast_2d(np.asarray(zs, dtype=np.float64))
    theta, pi, cache = gen.forward(zs)
    wass, dtheta, extras = ensemble_loss_and_theta_grads(
        gen.layout, theta, targets, ot_method=ot_method
    )
    loss = wass
    grad_pi = None
    if gen.gating is not None and lam > 0:
        batch = zs.shape[0]
        loss += lam * float(np.mean(np.sum(pi * np.log(pi), axis=1)))
        grad_pi = (lam / batch) * (np.log(pi) + 1.0)
    grads = gen.backward(cache, dtheta, grad_pi)
    extras = dict(extras, wasserstein=wass, gate_probs=pi)
    return loss, grads, extras


def backward_lmlp(zs, gen, targets, ot_method: str = "exact") -> tuple[float, list[np.ndarray], dict]:
    """Loss and MLP-weight gradients for the classical LMLP baseline."""
    zs = np.atleast_2d(np.asarray(zs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.complex128)
    rho, cache = gen.forward(zs)
    kappa = cross_super_fidelity(rho, targets)
    raw = 1.0 - kappa
    cost = np.maximum(0.0, raw)
    res = ot_exact(cost) if ot_method == "exact" else ot_sinkhorn(cost)
    cotangents = wasserstein_cotangents(
        res.plan, rho, targets, active=(raw > 0), pure_generated=(gen.variant == "vector")
    )
    grads = gen.backward(cache, cotangents)
    return res.cost, grads, {"plan": res.plan, "rho": rho}


# --- Adam ---------------------------------------------------------------------


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_init(params: list[np.ndarray], lr: float = 1e-3, beta1: float = 0.9,
              beta2: float = 0.999, eps: float = 1e-8) -> AdamState:
    return AdamState(lr, beta1, beta2, eps, 0,
                     [np.zeros_like(p) for p in params],
                     [np.zeros_like(p) for p in params])


def adam_step(state: AdamState, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
    """Bias-corrected Adam update, in place on the parameter arrays."""
    if len(params) != len(state.m) or len(grads) != len(params):
        raise ValueError("parameter/gradient/state structure mismatch")
    state.step += 1
    b1c = 1.0 - state.beta1**state.step
    b2c = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1 - state.beta1) * g
        v *= state.beta2
        v += (1 - state.beta2) * g * g
        p -= state.lr * (m / b1c) / (np.sqrt(v / b2c) + state.eps)


# --- gradient-norm benchmark ----------------------------------------------------

BENCHMARK_FAMILIES = ("no-latent-uniform", "rd", "lpqc-gauss-linear", "lpqc-gauss-tanh")


def _benchmark_theta_batch(family: str, layout: QubitLayout, batch: int,
                           rng: np.random.Generator, latent_dim: int, hidden_dim: int,
                           hidden_layers: int, rd_modes: int) -> np.ndarray:
    from .networks import Mlp, MlpSpec  # local to avoid polluting module surface
    from .priors import MIXTURE_COMPONENT_STD

    k = layout.n_params
    if family == "no-latent-uniform":
        return rng.uniform(-np.pi, np.pi, (batch, k))
    if family == "rd":
        n_random = 2 * layout.n_qubits * (layout.n_layers // 2 + 1)
        mode_centers = rng.standard_normal((rd_modes, n_random))
        centers = mode_centers[rng.integers(0, rd_modes, size=batch)]
        rand_block = centers + MIXTURE_COMPONENT_STD * rng.standard_normal((batch, n_random))
        train_block = rng.uniform(-np.pi, np.pi, k - n_random)
        return np.concatenate(
            [rand_block, np.broadcast_to(train_block, (batch, k - n_random))], axis=1
        )
    if family in ("lpqc-gauss-linear", "lpqc-gauss-tanh"):
        activation = "linear" if family.endswith("linear") else "tanh"
        spec = MlpSpec(latent_dim, hidden_dim, hidden_layers, k, activation)
        mlp = Mlp.init(spec, rng)
        return mlp.forward(rng.standard_normal((batch, latent_dim)))
    raise ValueError(f"unknown benchmark family {family!r}")


def grad_norm_benchmark(
    family: str,
    layout: QubitLayout,
    reference: np.ndarray,
    trials: int,
    rng: np.random.Generator,
    latent_dim: int = 4,
    hidden_dim: int = 32,
    hidden_layers: int = 2,
    rd_modes: int = 1,
    batch: int | None = None,
) -> tuple[float, float]:
    """Mean and std of ||d loss / d theta||^2 / dim(theta) over fresh draws.

    Per trial the family's sampling rule produces a generated batch (default
    size: the reference count): no-latent draws i.i.d. uniform angle vectors
    on [-pi, pi]^K; rd draws one uniform trainable block plus per-sample
    random blocks from a fresh Gaussian-mixture; the latent variants draw
    one fresh Xavier-initialized network and one latent per sample. The loss
    is the Wasserstein distance between the generated batch and the fixed
    reference batch, i.e. the training loss at a random initialization, and
    dim(theta) counts every angle entry of the batch.
    """
    if family == "rd" and layout.n_layers % 2 != 0:
        raise ValueError("rd benchmark needs an even layer count")
    reference = np.asarray(reference, dtype=np.complex128)
    batch = reference.shape[0] if batch is None else batch
    values = np.zeros(trials)
    for t in range(trials):
        theta = _benchmark_theta_batch(family, layout, batch, rng, latent_dim,
                                       hidden_dim, hidden_layers, rd_modes)
        _, dtheta, _ = ensemble_loss_and_theta_grads(layout, theta, reference)
        values[t] = float(np.sum(dtheta**2)) / dtheta.size
    return float(values.mean()), float(values.std())
