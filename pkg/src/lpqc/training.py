"""Training loop, evaluation, and run manifests.

Every random draw flows through named Philox substreams of the master seed
(dataset, weight init, prior, baselines, eval, split) with epoch/step
indices folded in, so a rerun with the same config and seed reproduces
every logged number bit-exactly. The manifest stores the resolved config,
the per-epoch train/test losses, and final metrics; wall-clock time is
recorded as metadata but takes no part in any computation.
"""
from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np

from . import __version__
from .backend import BACKEND_NAME
from .circuits import QubitLayout, hea_apply_batch, partial_trace_batch
from .config import DataError, ExperimentConfig
from .datasets import gen_multicluster
from .gradients import (
    adam_init,
    adam_step,
    backward_full,
    backward_lmlp,
    ensemble_loss_and_theta_grads,
)
from .networks import LmlpGenerator, MoeGenerator, NoLatentGenerator, RdGenerator, save_checkpoint
from .priors import LatentPrior, init_mode_centers, sample_prior
from .rng import (
    STREAM_BASELINE,
    STREAM_DATASET,
    STREAM_EVAL,
    STREAM_INIT,
    STREAM_PRIOR,
    STREAM_SPLIT,
    philox,
    substream,
)
from .storage import ensemble_as_density_matrices, read_ensemble
from .transport import wasserstein_loss


def build_prior(cfg: ExperimentConfig) -> LatentPrior:
    centers = None
    if cfg.prior_modes > 1:
        centers = init_mode_centers(cfg.latent_dim, cfg.prior_modes, cfg.seed, STREAM_PRIOR)
    return LatentPrior(cfg.prior_family, cfg.latent_dim, cfg.prior_modes, centers)


def build_generator(cfg: ExperimentConfig, layout: QubitLayout):
    rng = philox(cfg.seed, STREAM_INIT)
    if cfg.family == "lpqc":
        return MoeGenerator.init(
            layout, cfg.latent_dim, cfg.experts, cfg.hidden_dim, cfg.hidden_layers,
            rng, cfg.activation, cfg.gating_hidden_dim,
        )
    if cfg.family == "no-latent":
        return NoLatentGenerator(layout)
    if cfg.family == "rd":
        return RdGenerator.init(layout, cfg.rd_modes, rng)
    if cfg.family == "lmlp":
        variant = "matrix" if layout.m_anc > 0 else "vector"
        return LmlpGenerator.init(
            layout.n_data, variant, cfg.latent_dim, cfg.hidden_dim, cfg.hidden_layers,
            rng, cfg.activation,
        )
    raise DataError(f"unknown generator family {cfg.family!r}")


def build_dataset(cfg: ExperimentConfig) -> np.ndarray:
    if cfg.task == "multicluster":
        return gen_multicluster(
            cfg.n_data, cfg.m_anc, cfg.dataset_count,
            philox(cfg.seed, STREAM_DATASET), cfg.angle_scale,
        )
    data = read_ensemble(cfg.dataset_path)
    if data.n_data != cfg.n_data:
        raise DataError(
            f"{cfg.dataset_path}: file has n_data={data.n_data}, config wants {cfg.n_data}"
        )
    return ensemble_as_density_matrices(data)


def split_train_test(states: np.ndarray, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic shuffled 50/50 split."""
    perm = philox(seed, STREAM_SPLIT).permutation(states.shape[0])
    half = states.shape[0] // 2
    return states[perm[:half]], states[perm[half:]]


def _generate_states(cfg, gen, prior, layout, count: int, rng) -> tuple[np.ndarray, np.ndarray | None]:
    """Sample ``count`` model states; returns (rho batch, gate probs or None)."""
    if cfg.family == "lpqc":
        zs = sample_prior(prior, rng, count)
        theta, pi, _ = gen.forward(zs)
        psi = hea_apply_batch(layout, theta)
        return partial_trace_batch(psi, layout), pi
    if cfg.family in ("no-latent", "rd"):
        theta, _ = gen.sample(rng, count)
        psi = hea_apply_batch(layout, theta)
        return partial_trace_batch(psi, layout), None
    zs = sample_prior(prior, rng, count)
    rho, _ = gen.forward(zs)
    return rho, None


def _train_step(cfg, gen, prior, layout, targets, rng) -> tuple[float, list[np.ndarray]]:
    batch = targets.shape[0]
    if cfg.family == "lpqc":
        zs = sample_prior(prior, rng, batch)
        loss, grads, _ = backward_full(zs, gen, targets, lam=cfg.entropy_weight,
                                       ot_method=cfg.ot_method)
        return loss, grads
    if cfg.family in ("no-latent", "rd"):
        theta, cache = gen.sample(rng, batch)
        loss, dtheta, _ = ensemble_loss_and_theta_grads(layout, theta, targets,
                                                        ot_method=cfg.ot_method)
        return loss, gen.backward(cache, dtheta)
    zs = sample_prior(prior, rng, batch)
    loss, grads, _ = backward_lmlp(zs, gen, targets, ot_method=cfg.ot_method)
    return loss, grads


def train(cfg: ExperimentConfig, write_outputs: bool = True) -> dict:
    """Run one training experiment; returns (and optionally writes) the manifest."""
    started = time.time()
    layout = QubitLayout(cfg.n_data, cfg.m_anc, cfg.layers)
    dataset = build_dataset(cfg)
    train_set, test_set = split_train_test(dataset, cfg.seed)
    prior = build_prior(cfg)
    gen = build_generator(cfg, layout)
    params = gen.parameters()
    opt = adam_init(params, lr=cfg.lr)
    steps_per_epoch = max(1, train_set.shape[0] // cfg.batch_size)
    epochs_log: list[dict] = []
    for epoch in range(cfg.epochs):
        order = substream(cfg.seed, STREAM_DATASET, epoch).permutation(train_set.shape[0])
        train_losses = []
        for step in range(steps_per_epoch):
            idx = order[step * cfg.batch_size : (step + 1) * cfg.batch_size]
            if idx.size == 0:
                idx = order[: cfg.batch_size]
            stream = STREAM_PRIOR if cfg.family in ("lpqc", "lmlp") else STREAM_BASELINE
            rng = substream(cfg.seed, stream, epoch, step)
            loss, grads = _train_step(cfg, gen, prior, layout, train_set[idx], rng)
            adam_step(opt, params, grads)
            train_losses.append(loss)
        entry = {"epoch": epoch, "train_loss": float(np.mean(train_losses))}
        if epoch % cfg.eval_stride == 0 or epoch == cfg.epochs - 1:
            rng = substream(cfg.seed, STREAM_EVAL, epoch)
            generated, _ = _generate_states(cfg, gen, prior, layout, test_set.shape[0], rng)
            entry["test_loss"] = wasserstein_loss(generated, test_set, method=cfg.ot_method)
        epochs_log.append(entry)
    # final metrics on a fresh eval draw
    rng = substream(cfg.seed, STREAM_EVAL, cfg.epochs)
    generated, _ = _generate_states(cfg, gen, prior, layout, test_set.shape[0], rng)
    final_test = wasserstein_loss(generated, test_set, method=cfg.ot_method)
    mean_purity = float(np.mean(np.sum(np.abs(generated) ** 2, axis=(1, 2))))
    manifest = {
        "version": __version__,
        "backend": BACKEND_NAME,
        "config": cfg.resolved(),
        "seed": cfg.seed,
        "seed_streams": {
            "dataset": STREAM_DATASET,
            "init": STREAM_INIT,
            "prior": STREAM_PRIOR,
            "baseline": STREAM_BASELINE,
            "eval": STREAM_EVAL,
            "split": STREAM_SPLIT,
        },
        "epochs": epochs_log,
        "final": {"test_loss": final_test, "mean_purity": mean_purity},
        "wall_clock_sec": time.time() - started,
    }
    if write_outputs:
        out = Path(cfg.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_checkpoint(out / "weights.lpqw", gen.spec_dict(), params)
        manifest["checkpoint"] = "weights.lpqw"
        with open(out / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
        with open(out / "losses.csv", "w", encoding="utf-8") as fh:
            fh.write("epoch,train_loss,test_loss\n")
            for entry in epochs_log:
                test = repr(entry["test_loss"]) if "test_loss" in entry else ""
                fh.write(f"{entry['epoch']},{entry['train_loss']!r},{test}\n")
    return manifest
