"""Acceptance suite: one test per release criterion, stated tolerances.

Each test prints a [PASS] line with the measured numbers (visible with
``pytest -s`` or in the captured-output section). The heavy criteria
(gradient-norm benchmarks, the multimodal training comparison) run at desk
scale; total suite time is on the order of ten minutes.
"""
import itertools
import json

import numpy as np
import pytest

from lpqc.circuits import (
    QubitLayout,
    hea_apply,
    partial_trace_ancilla,
    super_fidelity,
    trace_distance,
)
from lpqc.config import config_from_dict
from lpqc.datasets import gen_multicluster
from lpqc.gradients import (
    backward_full,
    circuit_grad_adjoint,
    circuit_grad_paramshift,
    ensemble_loss_and_theta_grads,
    grad_norm_benchmark,
)
from lpqc.impe import (
    ImpeConfig,
    attach_ancillas,
    aux_outcome_probabilities,
    haar_product_states,
    impe_circuit,
    impe_train,
    project_outcomes,
)
from lpqc.molecules import (
    MAX_VALENCE,
    MoleculeRecord,
    NormalizationContext,
    canonical_frame,
    complete_valences,
    decode_state,
    encode_molecule,
    infer_bonds,
)
from lpqc.networks import MoeGenerator
from lpqc.rng import STREAM_BENCH, philox, substream
from lpqc.training import train
from lpqc.transport import ot_exact

QM9_CTX = NormalizationContext(np.array([-3.93, -4.54, -5.11]), 10.36)


def report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {num}: {name} -- {detail}")
    assert ok, f"criterion {num} ({name}): {detail}"


def random_hermitian(rng, dim):
    a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (a + a.conj().T)


def random_density_batch(rng, count, dim, rank=None):
    rank = rank or dim
    a = rng.normal(size=(count, dim, rank)) + 1j * rng.normal(size=(count, dim, rank))
    rho = a @ a.conj().transpose(0, 2, 1)
    return rho / np.einsum("bii->b", rho).real[:, None, None]


def _assignment_margin(cost: np.ndarray) -> float:
    """Gap between the best and second-best assignment objective."""
    n = cost.shape[0]
    totals = sorted(
        sum(cost[i, perm[i]] for i in range(n)) / n
        for perm in itertools.permutations(range(n))
    )
    return totals[1] - totals[0] if len(totals) > 1 else np.inf


def _draw_pipeline_instance(rng):
    """Random small instance away from plan ties and the pure boundary.

    The fixed-plan (Danskin) gradient is only comparable against central
    finite differences away from assignment degeneracies, and the kernel's
    purity-gap term is only FD-checkable away from purity 1 (the square
    root amplifies rounding noise there); tied or boundary draws are
    rejected and resampled.
    """
    from lpqc.transport import cost_matrix

    while True:
        n = int(rng.integers(1, 3))
        m = int(rng.integers(0, min(3, 5 - n)))
        layers = int(rng.integers(1, 4)) if m > 0 else int(rng.integers(0, 4))
        lay = QubitLayout(n, m, layers)
        n_experts = int(rng.integers(1, 3))
        d = int(rng.integers(1, 4))
        batch = int(rng.integers(1, 5))
        gen = MoeGenerator.init(lay, d, n_experts, 3, 1, rng, gating_hidden_dim=4)
        for p in gen.parameters():
            p += 0.4 * rng.standard_normal(p.shape)  # spread outputs apart
        zs = rng.standard_normal((batch, d))
        targets = random_density_batch(rng, batch, lay.data_dim)
        theta, _, _ = gen.forward(zs)
        from lpqc.circuits import hea_apply_batch, partial_trace_batch

        rho = partial_trace_batch(hea_apply_batch(lay, theta), lay)
        if m > 0 and np.min(1.0 - np.sum(np.abs(rho) ** 2, axis=(1, 2))) < 1e-4:
            continue
        if _assignment_margin(cost_matrix(rho, targets)) < 2e-3:
            continue
        return lay, gen, zs, targets


def test_criterion_1_gradient_correctness():
    # 20 random instances, n+m <= 4, L <= 3, E <= 2, d <= 3, batch <= 4:
    # adjoint vs parameter-shift < 1e-8 relative, full-pipeline vs central
    # finite differences (1e-4 step) < 1e-3 relative. Plan-degenerate draws
    # are excluded by resampling, per the gradient contract.
    rng = philox(1001)
    worst_ps, worst_fd = 0.0, 0.0
    for inst in range(20):
        lay_ps = QubitLayout(int(rng.integers(1, 3)), int(rng.integers(0, 3)),
                             int(rng.integers(0, 4)))
        angles = rng.uniform(-np.pi, np.pi, lay_ps.n_params)
        cot = random_hermitian(rng, lay_ps.data_dim)

        def linear_loss(a):
            rho = partial_trace_ancilla(hea_apply(lay_ps, a), lay_ps)
            return float(np.real(np.sum(cot * rho.T)))

        adj = circuit_grad_adjoint(lay_ps, angles, cot)
        ps = circuit_grad_paramshift(lay_ps, angles, linear_loss)
        rel = np.linalg.norm(adj - ps) / max(np.linalg.norm(ps), 1e-300)
        worst_ps = max(worst_ps, rel)

        lay, gen, zs, targets = _draw_pipeline_instance(rng)
        lam = 0.01 if gen.gating is not None else 0.0
        _, grads, _ = backward_full(zs, gen, targets, lam=lam)

        def pipeline_loss():
            theta, pi, _ = gen.forward(zs)
            wass, _, _ = ensemble_loss_and_theta_grads(lay, theta, targets)
            if gen.gating is not None and lam > 0:
                wass += lam * float(np.mean(np.sum(pi * np.log(pi), axis=1)))
            return wass

        eps = 1e-4
        num, ana = [], []
        for p, g in zip(gen.parameters(), grads):
            flat, gflat = p.ravel(), g.ravel()
            for k in range(flat.size):
                old = flat[k]
                flat[k] = old + eps
                up = pipeline_loss()
                flat[k] = old - eps
                dn = pipeline_loss()
                flat[k] = old
                num.append((up - dn) / (2 * eps))
                ana.append(gflat[k])
        num, ana = np.array(num), np.array(ana)
        rel_fd = np.linalg.norm(ana - num) / max(np.linalg.norm(num), 1e-300)
        worst_fd = max(worst_fd, rel_fd)
    report(1, "gradient correctness", worst_ps < 1e-8 and worst_fd < 1e-3,
           f"adjoint-vs-paramshift {worst_ps:.2e} (<1e-8), pipeline-vs-FD {worst_fd:.2e} (<1e-3)")


def test_criterion_2_ot_oracle_equivalence():
    # Exact solver equals the brute-force permutation minimum on 50 random
    # uniform square instances up to 6x6, within 1e-10.
    rng = philox(1002)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 7))
        cost = rng.uniform(size=(n, n))
        solved = ot_exact(cost).cost
        brute = min(
            sum(cost[i, perm[i]] for i in range(n)) / n
            for perm in itertools.permutations(range(n))
        )
        worst = max(worst, abs(solved - brute))
    report(2, "OT oracle equivalence", worst < 1e-10, f"max |exact - brute| = {worst:.2e}")


def test_criterion_3_barren_plateau_separation():
    # (a) n=6, m=0, L=10, 128 trials: lpqc-gauss-tanh >= 10x no-latent.
    # (b) no-latent decays monotonically across L in {2,4,8} at n=4
    #     (median of 3 repeats; run at the m=2 training configuration,
    #     where the decay has not yet saturated).
    seed = 7
    ref6 = gen_multicluster(6, 0, 32, substream(seed, STREAM_BENCH, 6))
    lay6 = QubitLayout(6, 0, 10)
    means = {}
    for fi, family in enumerate(("no-latent-uniform", "lpqc-gauss-tanh")):
        means[family], _ = grad_norm_benchmark(
            family, lay6, ref6, 128, substream(seed, STREAM_BENCH, fi, 6, 10), batch=128
        )
    ratio = means["lpqc-gauss-tanh"] / means["no-latent-uniform"]

    per_l = {layers: [] for layers in (2, 4, 8)}
    for rep, rep_seed in enumerate((seed, seed + 1, seed + 2)):
        ref4 = gen_multicluster(4, 2, 32, substream(rep_seed, STREAM_BENCH, 4))
        for layers in (2, 4, 8):
            mean, _ = grad_norm_benchmark(
                "no-latent-uniform", QubitLayout(4, 2, layers), ref4, 64,
                substream(rep_seed, STREAM_BENCH, 0, 4, layers),
            )
            per_l[layers].append(mean)
    medians = [float(np.median(per_l[layers])) for layers in (2, 4, 8)]
    monotone = medians[0] > medians[1] > medians[2]
    report(3, "barren-plateau separation", ratio >= 10.0 and monotone,
           f"ratio {ratio:.1f} (>=10), no-latent medians over L=2,4,8: "
           + ", ".join(f"{v:.3e}" for v in medians))


def test_criterion_4_no_latent_saturation():
    # n=8, L=10, 64 trials: mean squared normalized gradient in [1e-12, 1e-8].
    seed = 7
    ref8 = gen_multicluster(8, 0, 32, substream(seed, STREAM_BENCH, 8))
    mean, _ = grad_norm_benchmark(
        "no-latent-uniform", QubitLayout(8, 0, 10), ref8, 64,
        substream(seed, STREAM_BENCH, 0, 8, 10), batch=128,
    )
    report(4, "no-latent saturation magnitude", 1e-12 <= mean <= 1e-8,
           f"mean {mean:.3e} in [1e-12, 1e-8]")


def _final_loss(family, modes, seed):
    cfg = config_from_dict({
        "task": "multicluster", "seed": seed, "output_dir": "unused",
        "layout": {"n_data": 4, "m_anc": 2, "layers": 10},
        "dataset": {"count": 256},
        "generator": {"family": family, "experts": 1, "hidden_dim": 32, "hidden_layers": 2},
        "prior": {"family": "uniform", "dim": 4, "modes": modes},
        "optimizer": {"lr": 0.001, "batch_size": 128, "epochs": 500},
        "eval": {"stride": 50},
    })
    return train(cfg, write_outputs=False)["final"]["test_loss"]


def test_criterion_5_multimodal_prior_advantage():
    # n=4, m=2, L=10, 500 epochs, 3 seeds: median final test loss of
    # (M=4 uniform, E=1) < (M=1, E=1); both >= 10x below no-latent.
    seeds = (301, 302, 303)
    m4 = float(np.median([_final_loss("lpqc", 4, s) for s in seeds]))
    m1 = float(np.median([_final_loss("lpqc", 1, s) for s in seeds]))
    nl = float(np.median([_final_loss("no-latent", 1, s) for s in seeds]))
    ok = m4 < m1 and nl >= 10 * m4 and nl >= 10 * m1
    report(5, "multimodal-prior advantage", ok,
           f"median final loss M=4 {m4:.4f} < M=1 {m1:.4f}; no-latent {nl:.4f} "
           f"(ratios {nl / m4:.1f}x, {nl / m1:.1f}x, both >=10x)")


def test_criterion_6_telescoping_lipschitz_properties():
    # State-space bounds on 1000 random draws each, zero violations.
    rng = philox(1006)
    i2 = np.eye(2)
    pauli_y = np.array([[0, -1j], [1j, 0]])
    pauli_z = np.diag([1.0, -1.0]).astype(complex)
    cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)

    def ry(t):
        return np.cos(t / 2) * i2 - 1j * np.sin(t / 2) * pauli_y

    def rz(t):
        return np.cos(t / 2) * i2 - 1j * np.sin(t / 2) * pauli_z

    def embed(gate, pos, nq):
        width = int(np.log2(gate.shape[0]))
        mats = [i2] * pos + [gate] + [i2] * (nq - pos - width)
        out = mats[0]
        for mm in mats[1:]:
            out = np.kron(out, mm)
        return out

    def dense_u(lay, angles):
        nq = lay.n_qubits
        u = np.eye(lay.dim, dtype=complex)
        for layer in range(lay.n_layers + 1):
            if layer > 0:
                for p in range(1, nq):
                    u = embed(cnot, p - 1, nq) @ u
            for p in range(1, nq + 1):
                base = 2 * (layer * nq + p - 1)
                u = embed(ry(angles[base]) @ rz(angles[base + 1]), p - 1, nq) @ u
        return u

    violations = {"single_gate": 0, "telescoping": 0, "norm": 0,
                  "contractivity": 0, "pure_sigma": 0}
    for _ in range(1000):
        t1, t2 = rng.uniform(-2 * np.pi, 2 * np.pi, 2)
        for mat in (ry, rz):
            if np.linalg.norm(mat(t1) - mat(t2), ord=2) > 0.5 * abs(t1 - t2) + 1e-12:
                violations["single_gate"] += 1

    lay = QubitLayout(2, 1, 1)
    for _ in range(1000):
        a1 = rng.uniform(-np.pi, np.pi, lay.n_params)
        a2 = a1 + rng.uniform(-0.4, 0.4, lay.n_params)
        gap = np.linalg.norm(dense_u(lay, a1) - dense_u(lay, a2), ord=2)
        if gap > 0.5 * np.sum(np.abs(a1 - a2)) + 1e-12:
            violations["telescoping"] += 1

    lay2 = QubitLayout(2, 1, 2)
    for _ in range(1000):
        psi = hea_apply(lay2, rng.normal(scale=2.0, size=lay2.n_params))
        if abs(np.linalg.norm(psi) - 1.0) > 1e-10:
            violations["norm"] += 1

    for _ in range(1000):
        v1 = rng.normal(size=8) + 1j * rng.normal(size=8)
        v2 = rng.normal(size=8) + 1j * rng.normal(size=8)
        v1 /= np.linalg.norm(v1)
        v2 /= np.linalg.norm(v2)
        full = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(
            np.outer(v1, v1.conj()) - np.outer(v2, v2.conj()))))
        red = trace_distance(partial_trace_ancilla(v1, lay), partial_trace_ancilla(v2, lay))
        if red > full + 1e-10:
            violations["contractivity"] += 1

    for _ in range(1000):
        rho = random_density_batch(rng, 1, 4)[0]
        psi = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi /= np.linalg.norm(psi)
        kappa = super_fidelity(rho, np.outer(psi, psi.conj()))
        if abs(kappa - float(np.real(psi.conj() @ rho @ psi))) > 1e-7:
            violations["pure_sigma"] += 1

    total = sum(violations.values())
    report(6, "telescoping/Lipschitz properties", total == 0,
           f"violations {violations} over 1000 draws each")


def test_criterion_7_codec_round_trip():
    # encode -> decode(strict1x) identity on 100 synthetic molecules and the
    # per-atom squared-norm contribution identity (= 4).
    rng = philox(1007)
    worst_pos = 0.0
    worst_block = 0.0
    elements_ok = True
    for _ in range(100):
        n_atoms = int(rng.integers(1, 10))
        mol = canonical_frame(MoleculeRecord(
            tuple(rng.choice(["C", "N", "O", "F"], size=n_atoms)),
            rng.uniform(-1.5, 1.5, (n_atoms, 3)),
        ))
        vec = encode_molecule(mol, QM9_CTX)
        scaled = (2 * np.sqrt(n_atoms) * vec) ** 2
        for i in range(n_atoms):
            block = scaled[7 * i: 7 * i + 7].sum() + scaled[7 * n_atoms + i]
            worst_block = max(worst_block, abs(block - 4.0))
        pos, els = decode_state(vec, QM9_CTX, "strict1x", m_override=n_atoms)
        elements_ok = elements_ok and els == mol.elements
        worst_pos = max(worst_pos, float(np.max(np.abs(pos - mol.positions))))
    ok = elements_ok and worst_pos <= 1e-6 and worst_block <= 1e-9
    report(7, "codec round trip", ok,
           f"elements exact {elements_ok}, max position error {worst_pos:.2e} A (<=1e-6), "
           f"max per-atom norm gap {worst_block:.2e}")


def test_criterion_8_valence_completion():
    # Hand-simulated promotions plus valence caps on 200 decoded geometries.
    cc = complete_valences(np.array([[0, 1], [1, 0]]), ("C", "C"))
    hand_ok = cc.bond_orders[0, 1] == 3 and list(cc.implicit_h) == [1, 1]
    cf = complete_valences(np.array([[0, 1], [1, 0]]), ("C", "F"))
    hand_ok = hand_ok and cf.bond_orders[0, 1] == 1 and list(cf.implicit_h) == [3, 0]
    cco = complete_valences(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]), ("C", "C", "O"))
    hand_ok = hand_ok and cco.bond_orders[0, 1] == 3 and cco.bond_orders[1, 2] == 1

    rng = philox(1008)
    cap_ok = True
    for _ in range(200):
        n_atoms = int(rng.integers(2, 10))
        mol = canonical_frame(MoleculeRecord(
            tuple(rng.choice(["C", "N", "O", "F"], size=n_atoms)),
            rng.uniform(-1.6, 1.6, (n_atoms, 3)),
        ))
        vec = encode_molecule(mol, QM9_CTX)
        pos, els = decode_state(vec, QM9_CTX, "paper2x", m_override=n_atoms)
        bonds = infer_bonds(pos, els)
        graph = complete_valences(bonds.adjacency, els, bonds.connected)
        sums = graph.bond_orders.sum(axis=1)
        for k, el in enumerate(els):
            if sums[k] > MAX_VALENCE[el]:
                cap_ok = False
    report(8, "valence completion", hand_ok and cap_ok,
           f"hand cases {hand_ok}, valence caps on 200 decoded geometries {cap_ok}")


def test_criterion_9_impe_sanity():
    # Measurement-average == partial-trace channel (exhaustive, 1e-10), and
    # toy training descends for >= 8/10 seeds.
    rng = philox(1009)
    worst = 0.0
    for _ in range(20):
        zeta = rng.uniform(-np.pi, np.pi, 2 * 3 * 2)
        data_in = haar_product_states(2, 1, rng)
        full = attach_ancillas(data_in, 1)
        full[0] = impe_circuit(3, 2, zeta, full[0])
        probs = aux_outcome_probabilities(full, 2, 1)[0]
        avg = np.zeros((4, 4), dtype=complex)
        for z in range(2):
            if probs[z] < 1e-14:
                continue
            phi, _ = project_outcomes(full, 2, 1, np.array([z]))
            avg += probs[z] * np.outer(phi[0], phi[0].conj())
        block = full[0].reshape(4, 2)
        worst = max(worst, float(np.max(np.abs(avg - block @ block.conj().T))))

    cfg = ImpeConfig(n_data=2, n_aux=1, layers=2, cycles=2, batch_size=16,
                     epochs_per_cycle=15, lr=0.05)
    wins = 0
    for seed in range(10):
        targets = haar_product_states(2, 16, philox(500 + seed))
        result = impe_train(cfg, targets, seed=seed)
        if result.final_loss < result.initial_loss:
            wins += 1
    report(9, "IMPE sanity", worst <= 1e-10 and wins >= 8,
           f"channel identity gap {worst:.2e} (<=1e-10), descent {wins}/10 seeds (>=8)")


def test_criterion_10_determinism(tmp_path):
    # Rerunning a command with identical config and seed reproduces every
    # logged number bit-exactly.
    from lpqc.cli import main

    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text(
        "seed: 13\n"
        "layout: {n_data: 2, m_anc: 1, layers: 2}\n"
        "dataset: {count: 32}\n"
        "generator: {family: lpqc, experts: 2, hidden_dim: 8, hidden_layers: 1, "
        "gating_hidden_dim: 8}\n"
        "prior: {family: uniform, dim: 2, modes: 2}\n"
        "optimizer: {lr: 0.005, batch_size: 16, epochs: 6}\n"
    )
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        assert main(["train", "--config", str(cfg_path), "--output", str(out)]) == 0
        outs.append(out)
    m1 = json.loads((outs[0] / "manifest.json").read_text())
    m2 = json.loads((outs[1] / "manifest.json").read_text())
    same_train = m1["epochs"] == m2["epochs"] and m1["final"] == m2["final"]
    same_ckpt = (outs[0] / "weights.lpqw").read_bytes() == (outs[1] / "weights.lpqw").read_bytes()

    csvs = []
    for name in ("g1.csv", "g2.csv"):
        out = tmp_path / name
        assert main(["gradnorm", "--families", "no-latent-uniform,lpqc-gauss-tanh",
                     "--n-list", "3", "--l-list", "2", "--trials", "8",
                     "--ref-count", "8", "--batch", "8", "--seed", "5",
                     "--out", str(out)]) == 0
        csvs.append(out.read_text())
    same_csv = csvs[0] == csvs[1]
    report(10, "determinism", same_train and same_ckpt and same_csv,
           f"train manifests identical {same_train}, checkpoints identical {same_ckpt}, "
           f"gradnorm CSVs identical {same_csv}")
