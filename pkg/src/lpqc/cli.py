"""Command-line entry points.

Subcommands: train, gradnorm, gen-dataset, encode, decode, eval. Exit
codes: 0 on success, 2 for configuration errors, 3 for data errors.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .circuits import QubitLayout, dm_to_real_vector
from .config import ConfigError, DataError, load_config
from .datasets import gen_multicluster, pca_project
from .gradients import BENCHMARK_FAMILIES, grad_norm_benchmark
from .molecules import MoleculeError, decode_state, encode_molecule, infer_bonds, complete_valences
from .rng import STREAM_BENCH, substream
from .storage import (
    EnsembleFormatError,
    ensemble_as_density_matrices,
    read_context,
    read_ensemble,
    read_molecules,
    write_ensemble,
    write_graph_report,
    write_molecules,
)
from .training import train
from .transport import cross_super_fidelity, wasserstein_loss


def cmd_train(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.output is not None:
        cfg.output_dir = args.output
    if args.epochs is not None:
        cfg.epochs = args.epochs
    cfg.validate()
    manifest = train(cfg)
    final = manifest["final"]
    print(f"final test loss {final['test_loss']:.6g}, mean purity {final['mean_purity']:.4f}")
    print(f"outputs in {cfg.output_dir}")
    return 0


def cmd_gradnorm(args) -> int:
    families = [f.strip() for f in args.families.split(",") if f.strip()]
    for family in families:
        if family not in BENCHMARK_FAMILIES:
            raise ConfigError(f"unknown family {family!r}; choose from {BENCHMARK_FAMILIES}")
    n_list = [int(v) for v in args.n_list.split(",")]
    l_list = [int(v) for v in args.l_list.split(",")]
    rows = []
    for n in n_list:
        # Reference batch: drawn once per (n, seed) from the multi-cluster set.
        reference = gen_multicluster(
            n, args.m, args.ref_count, substream(args.seed, STREAM_BENCH, n)
        )
        for layers in l_list:
            layout = QubitLayout(n, args.m, layers)
            for fi, family in enumerate(families):
                rng = substream(args.seed, STREAM_BENCH, fi, n, layers)
                mean, std = grad_norm_benchmark(
                    family, layout, reference, args.trials, rng,
                    latent_dim=args.latent_dim, rd_modes=args.rd_modes, batch=args.batch,
                )
                rows.append((family, n, args.m, layers, args.trials, mean, std, args.seed))
                print(f"{family:20s} n={n} L={layers}: mean {mean:.3e} std {std:.3e}")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", encoding="utf-8") as fh:
        fh.write("family,n,m,L,trials,mean_sq_grad_norm,std,seed\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")
    protocol = {
        "loss": "wasserstein distance of a generated batch against the fixed reference batch",
        "generated_batch": args.batch,
        "reference_count": args.ref_count,
        "reference": "multicluster states drawn once per (n, seed)",
        "normalization": "squared gradient norm divided by the full angle dimension of the batch",
        "per_trial_sampling": {
            "no-latent-uniform": "i.i.d. uniform angles on [-pi, pi]",
            "rd": "per-sample mixture random blocks, one shared uniform trainable block",
            "lpqc-*": "one fresh Xavier-initialized network, one latent draw per sample",
        },
        "latent_dim": args.latent_dim,
        "rd_modes": args.rd_modes,
        "seed": args.seed,
    }
    with open(out.with_suffix(".protocol.json"), "w", encoding="utf-8") as fh:
        json.dump(protocol, fh, indent=2)
    print(f"wrote {out}")
    return 0


def cmd_gen_dataset(args) -> int:
    states = gen_multicluster(args.n, args.m, args.count, args.seed, args.angle_scale)
    write_ensemble(args.out, states, n_data=args.n, m_anc=args.m)
    print(f"wrote {args.count} mixed states to {args.out}")
    return 0


def cmd_encode(args) -> int:
    ctx = read_context(args.context)
    molecules, errors = read_molecules(args.molecules, on_error="collect")
    for err in errors:
        print(f"skipped {err}", file=sys.stderr)
    states = []
    for idx, mol in enumerate(molecules):
        try:
            states.append(encode_molecule(mol, ctx, store_count=args.store_count))
        except MoleculeError as exc:
            print(f"skipped record {idx}: {exc}", file=sys.stderr)
    if not states:
        raise DataError("no molecules could be encoded")
    write_ensemble(args.out, np.array(states, dtype=np.complex128), n_data=7)
    print(f"encoded {len(states)} molecules to {args.out}")
    return 0


def cmd_decode(args) -> int:
    ctx = read_context(args.context)
    data = read_ensemble(args.ensemble)
    if data.mixed:
        raise DataError("decode expects a pure-state ensemble")
    molecules = []
    graphs = []
    failures = 0
    from .molecules import MoleculeRecord

    for idx, state in enumerate(data.states):
        try:
            positions, elements = decode_state(
                state, ctx, scale_mode=args.scale_mode, m_override=args.m_override
            )
            molecules.append(MoleculeRecord(elements, positions))
            if args.graphs:
                bonds = infer_bonds(positions, elements)
                graphs.append(complete_valences(bonds.adjacency, elements, bonds.connected))
        except MoleculeError as exc:
            failures += 1
            print(f"record {idx}: {exc}", file=sys.stderr)
    write_molecules(args.out, molecules)
    print(f"decoded {len(molecules)} molecules to {args.out} ({failures} failures)")
    if args.graphs:
        write_graph_report(args.graphs, graphs)
        print(f"wrote molecular graphs to {args.graphs}")
    return 0


def cmd_eval(args) -> int:
    gen_data = read_ensemble(args.generated)
    tgt_data = read_ensemble(args.target)
    gen_states = ensemble_as_density_matrices(gen_data)
    tgt_states = ensemble_as_density_matrices(tgt_data)
    if gen_states.shape[1] != tgt_states.shape[1]:
        raise DataError("generated and target ensembles have different dimensions")
    metrics = {
        "wasserstein": wasserstein_loss(gen_states, tgt_states),
        "mean_purity_generated": float(np.mean(np.sum(np.abs(gen_states) ** 2, axis=(1, 2)))),
        "mean_purity_target": float(np.mean(np.sum(np.abs(tgt_states) ** 2, axis=(1, 2)))),
        "count_generated": int(gen_states.shape[0]),
        "count_target": int(tgt_states.shape[0]),
        "mean_self_kappa": float(np.mean(cross_super_fidelity(gen_states, gen_states))),
    }
    with open(args.out, "w", encoding="utf-8") as fh:
        json.dump(metrics, fh, indent=2)
    print(json.dumps(metrics, indent=2))
    if args.pca:
        vectors = np.array(
            [dm_to_real_vector(r) for r in gen_states]
            + [dm_to_real_vector(r) for r in tgt_states]
        )
        res = pca_project(vectors, 2)
        with open(args.pca, "w", encoding="utf-8") as fh:
            fh.write("x,y,source\n")
            for i, point in enumerate(res.points):
                src = "generated" if i < gen_states.shape[0] else "target"
                fh.write(f"{point[0]!r},{point[1]!r},{src}\n")
        print(f"wrote PCA points to {args.pca}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lpqc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a generator on an ensemble task")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--output")
    p.add_argument("--epochs", type=int)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("gradnorm", help="gradient-norm benchmark over generator families")
    p.add_argument("--families", default=",".join(BENCHMARK_FAMILIES))
    p.add_argument("--n-list", default="4,6,8")
    p.add_argument("--l-list", default="10")
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--trials", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ref-count", type=int, default=32)
    p.add_argument("--batch", type=int, default=128,
                   help="generated batch size per trial (training batch size)")
    p.add_argument("--latent-dim", type=int, default=4)
    p.add_argument("--rd-modes", type=int, default=1)
    p.add_argument("--out", default="gradnorm.csv")
    p.set_defaults(func=cmd_gradnorm)

    p = sub.add_parser("gen-dataset", help="write a multi-cluster ensemble file")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--angle-scale", type=float, default=0.05)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_dataset)

    p = sub.add_parser("encode", help="molecule text file -> state ensemble")
    p.add_argument("--molecules", required=True)
    p.add_argument("--context", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--store-count", action="store_true")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="state ensemble -> molecule text file")
    p.add_argument("--ensemble", required=True)
    p.add_argument("--context", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--scale-mode", choices=("paper2x", "strict1x"), default="paper2x")
    p.add_argument("--m-override", type=int)
    p.add_argument("--graphs", help="also emit bond/valence graphs to this file")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="metrics between two ensemble files")
    p.add_argument("--generated", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", default="metrics.json")
    p.add_argument("--pca", help="write 2-D PCA point file")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (DataError, EnsembleFormatError, MoleculeError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
