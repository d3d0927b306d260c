"""Command-line pipeline: generate, train, decode, eval, baseline, ablate.

Every command is reproducible from its flags and seed; flag defaults can be
overridden through MOTIFMINE_<FLAG> environment variables (explicit flags
always win). Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import baseline as baseline_mod
from . import decoder as decoder_mod
from . import evaluation, features, graphs, miner

ENV_PREFIX = "MOTIFMINE_"


def _env(name: str, default):
    raw = os.environ.get(ENV_PREFIX + name.upper().replace("-", "_"))
    if raw is None:
        return default
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if default is None or isinstance(default, str):
        return raw
    return type(default)(raw)


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _k_list(text: str) -> list[int | None]:
    return [None if part == "all" else int(part) for part in text.split(",") if part]


def cmd_generate(args) -> int:
    spec = graphs.MotifSpec(args.topology, args.size, args.k,
                            args.concentration, args.epsilon)
    bundle = graphs.build_dataset(spec, args.n, args.seed, jobs=args.jobs)
    graphs.save_dataset(bundle, args.out)
    print(f"wrote {len(bundle)} graphs to {args.out}")
    return 0


def _miner_config(args) -> miner.MinerConfig:
    return miner.MinerConfig(
        n_layers=args.layers, dim=args.dim, d_in=args.d_in, beta=args.beta,
        lam=args.lam, k_nn=args.knn, delta_sign=args.delta_sign,
        dummy=args.dummy, epochs=args.epochs, batch_size=args.batch_size,
        lr=args.lr, n_pairs=args.pairs, wl_iters=args.wl_iters,
        gamma=args.gamma, seed=args.seed,
    )


def cmd_train(args) -> int:
    bundle = graphs.load_dataset(args.data)
    config = _miner_config(args)
    model, history = miner.train(bundle, config)
    miner.save_model(model, args.out)
    if args.log:
        history.to_csv(args.log)
    last = history.epochs[-1] if history.epochs else {"l_rep": float("nan"), "l_conc": float("nan")}
    print(f"trained {config.epochs} epochs; final l_rep={last['l_rep']:.4f} "
          f"l_conc={last['l_conc']:.4f}; model -> {args.out}")
    return 0


def cmd_decode(args) -> int:
    bundle = graphs.load_dataset(args.data)
    model = miner.load_model(args.model)
    passes = miner.run_forward_passes(model, bundle.graphs, args.seed)
    result = decoder_mod.decode_grid_search(
        passes, bundle.truth, table_sizes=_int_list(args.hash_sizes),
        layer_indices=_int_list(args.layers), r_values=_int_list(args.rs),
        n_repeats=args.repeats, seed=args.seed)
    config = dict(result.config, grid_mean_m_jaccard=result.score, seed=args.seed)
    with open(args.out, "w") as f:
        f.write(decoder_mod.assignments_to_json(result.assignments, config))
    if args.csv:
        scores = [evaluation.m_jaccard(a.values, y)[0]
                  for a, y in zip(result.assignments, bundle.truth)]
        decoder_mod.scores_to_csv(scores, args.csv)
    print(f"best config {result.config} mean M-Jaccard {result.score:.4f} -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    bundle = graphs.load_dataset(args.data)
    assignments, config = decoder_mod.assignments_from_json(open(args.assign).read())
    report = evaluation.evaluate_assignments(assignments, bundle.truth)
    report.config = config
    if args.model:
        model = miner.load_model(args.model)
        layer = int(config.get("layer", model.config.n_layers))
        _, _, auc = evaluation.sigma_separation(model, bundle, layer,
                                                seed=int(config.get("seed", 0)))
        report.sigma_auc = auc
    with open(args.out, "w") as f:
        f.write(report.to_json())
    if args.csv:
        report.write_csv(args.csv, condition=args.condition,
                         epsilon=bundle.spec.distortion)
    print(f"mean M-Jaccard {report.mean:.4f} +/- {report.std:.4f}"
          + (f", sigma AUC {report.sigma_auc:.4f}" if report.sigma_auc is not None else ""))
    return 0


def cmd_baseline(args) -> int:
    bundle = graphs.load_dataset(args.data)
    classes, assignments = baseline_mod.exact_mine(bundle, args.k, args.c,
                                                   budget=args.budget)
    baseline_mod.classes_to_csv(classes, args.out)
    if args.assign_out:
        mats = [decoder_mod.AssignmentMatrix(a.astype(float)) for a in assignments]
        config = {"k": args.k, "c": args.c, "rank_threshold": bundle.spec.count,
                  "method": "exact"}
        with open(args.assign_out, "w") as f:
            f.write(decoder_mod.assignments_to_json(mats, config))
    mean_mj = float(np.mean([
        evaluation.m_jaccard(a, y)[0] for a, y in zip(assignments, bundle.truth)
    ]))
    print(f"{len(classes)} over-represented classes; mean M-Jaccard {mean_mj:.4f} -> {args.out}")
    return 0


def cmd_ablate(args) -> int:
    bundle = graphs.load_dataset(args.data)
    model = miner.load_model(args.model)
    labels = features.motif_presence_labels(bundle)
    rows = features.ablation_study(model, bundle, labels, _k_list(args.ks),
                                   seed=args.seed, folds=args.folds)
    features.ablation_to_csv(rows, args.out)
    print(f"wrote {len(rows)} ablation rows to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motifmine",
                                     description="Approximate network motif mining pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="build a planted-motif dataset")
    gen.add_argument("--topology", default=_env("topology", "clique"),
                     choices=graphs.MOTIF_TOPOLOGIES)
    gen.add_argument("--size", type=int, default=_env("size", 5))
    gen.add_argument("--k", type=int, default=_env("k", 1), help="number of motifs")
    gen.add_argument("--concentration", type=float, default=_env("concentration", 1.0))
    gen.add_argument("--epsilon", type=float, default=_env("epsilon", 0.0))
    gen.add_argument("--n", type=int, default=_env("n", 1000))
    gen.add_argument("--seed", type=int, default=_env("seed", 7))
    gen.add_argument("--jobs", type=int, default=_env("jobs", 1))
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_generate)

    tr = sub.add_parser("train", help="train the contraction miner")
    tr.add_argument("--data", required=True)
    tr.add_argument("--layers", type=int, default=_env("layers", 4))
    tr.add_argument("--dim", type=int, default=_env("dim", 8))
    tr.add_argument("--d-in", dest="d_in", type=int, default=_env("d_in", 10))
    tr.add_argument("--beta", type=float, default=_env("beta", 1.0))
    tr.add_argument("--lambda", dest="lam", type=float, default=_env("lambda", 1.0))
    tr.add_argument("--epochs", type=int, default=_env("epochs", 50))
    tr.add_argument("--batch-size", type=int, default=_env("batch_size", 32))
    tr.add_argument("--lr", type=float, default=_env("lr", 1e-3))
    tr.add_argument("--pairs", type=int, default=_env("pairs", 128))
    tr.add_argument("--knn", type=int, default=_env("knn", 16))
    tr.add_argument("--wl-iters", dest="wl_iters", type=int, default=_env("wl_iters", 2))
    tr.add_argument("--gamma", type=float, default=_env("gamma", 0.1))
    tr.add_argument("--delta-sign", dest="delta_sign",
                    choices=("prose", "paper"), default=_env("delta_sign", "prose"))
    tr.add_argument("--dummy", action="store_true", default=_env("dummy", False),
                    help="clamp all contraction scores to 0.5 (control model)")
    tr.add_argument("--seed", type=int, default=_env("seed", 0))
    tr.add_argument("--log", default=None, help="write per-epoch loss CSV")
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    dec = sub.add_parser("decode", help="grid-searched hash decoding")
    dec.add_argument("--model", required=True)
    dec.add_argument("--data", required=True)
    dec.add_argument("--hash-sizes", dest="hash_sizes", default=_env("hash_sizes", "8,16,32"))
    dec.add_argument("--layers", default=_env("layers", "2,3,4"))
    dec.add_argument("--rs", default=_env("rs", "1,2"), help="bucket rank cutoffs")
    dec.add_argument("--repeats", type=int, default=_env("repeats", 5))
    dec.add_argument("--seed", type=int, default=_env("seed", 0))
    dec.add_argument("--csv", default=None, help="write per-graph score CSV")
    dec.add_argument("--out", required=True)
    dec.set_defaults(func=cmd_decode)

    ev = sub.add_parser("eval", help="score assignments against ground truth")
    ev.add_argument("--assign", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--model", default=None, help="also report score-separation AUC")
    ev.add_argument("--condition", default=_env("condition", ""))
    ev.add_argument("--csv", default=None)
    ev.add_argument("--out", required=True)
    ev.set_defaults(func=cmd_eval)

    base = sub.add_parser("baseline", help="exact enumeration miner")
    base.add_argument("--data", required=True)
    base.add_argument("--k", type=int, default=_env("k", 4))
    base.add_argument("--c", type=float, default=_env("c", 2.0))
    base.add_argument("--budget", type=int, default=_env("budget", 5_000_000))
    base.add_argument("--assign-out", dest="assign_out", default=None)
    base.add_argument("--out", required=True)
    base.set_defaults(func=cmd_baseline)

    abl = sub.add_parser("ablate", help="top-k vs random-k probe accuracy")
    abl.add_argument("--model", required=True)
    abl.add_argument("--data", required=True)
    abl.add_argument("--ks", default=_env("ks", "1,2,5,all"))
    abl.add_argument("--folds", type=int, default=_env("folds", 5))
    abl.add_argument("--seed", type=int, default=_env("seed", 0))
    abl.add_argument("--out", required=True)
    abl.set_defaults(func=cmd_ablate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
