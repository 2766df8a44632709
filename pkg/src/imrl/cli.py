"""Command-line surface: data generation, training, evaluation, geometry
inspection, and embedding export.

Artifacts embed the config hash; reruns with the same config and seed
produce byte-identical CSV output.
"""
import argparse
import csv
import json
import os
import sys

import numpy as np

from . import config as cfgmod
from . import geometry, losses
from .errors import ImrlError, IoError
from .pipeline import (analysis, dataset, encoder as enc, evaluation,
                       training)


def _fmt(value):
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def write_report(report, path):
    """Write a metrics report as CSV plus a JSON summary sidecar.

    report is a dict with keys "config_hash" and "rows" (list of dicts
    sharing one key set). Reading the files back reproduces the report
    exactly up to the CSV's fixed 6-decimal float format.
    """
    rows = report["rows"]
    if not rows:
        raise IoError("report has no rows")
    keys = list(rows[0])
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["config_hash", report["config_hash"]])
            writer.writerow(keys)
            for row in rows:
                writer.writerow([_fmt(row[k]) for k in keys])
        with open(path + ".json", "w") as fh:
            json.dump(report, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as e:
        raise IoError(f"cannot write report to {path}: {e}") from e


def read_report(path):
    """Inverse of write_report (from the JSON sidecar)."""
    try:
        with open(path + ".json") as fh:
            return json.load(fh)
    except OSError as e:
        raise IoError(f"cannot read report at {path}: {e}") from e


def _load_config(args):
    if args.config:
        return cfgmod.parse_config(args.config)
    return cfgmod.RunConfig()


def _weights(cfg):
    return losses.LossWeights(ce=cfg.lambda_ce, tri=cfg.lambda_tri,
                              temp=cfg.lambda_temp, full=cfg.lambda_full)


def _dataset(cfg):
    return dataset.gen_food_dataset(per_class=cfg.per_class, seed=cfg.seed)


def _demos(cfg, path=None):
    if path and os.path.exists(path):
        return evaluation.load_trajectories(path)
    return evaluation.gen_demos(cfg.n_demos, seed=cfg.seed,
                                horizon=cfg.horizon)


def cmd_gen_data(args):
    cfg = _load_config(args)
    ds = _dataset(cfg)
    os.makedirs(cfg.data_dir, exist_ok=True)
    out = os.path.join(cfg.data_dir, "food_images.npz")
    np.savez_compressed(
        out, images=ds.images, type_labels=ds.type_labels,
        prop_labels=ds.prop_labels, fullness=ds.fullness, split=ds.split,
        type_names=np.array(ds.type_names), config_hash=cfg.hash())
    print(f"wrote {len(ds)} images to {out}")
    return 0


def cmd_gen_demos(args):
    cfg = _load_config(args)
    demos = _demos(cfg)
    os.makedirs(cfg.data_dir, exist_ok=True)
    out = os.path.join(cfg.data_dir, "demos.jsonl")
    evaluation.save_trajectories(demos, out)
    print(f"wrote {len(demos)} demos to {out}")
    return 0


def cmd_train_repr(args):
    cfg = _load_config(args)
    ds = _dataset(cfg)
    demos = _demos(cfg, os.path.join(cfg.data_dir, "demos.jsonl"))
    spoon = dataset.gen_spoon_dataset(n=480, seed=cfg.seed)
    encoder, history = training.train_repr(
        ds, evaluation.demo_videos(demos), _weights(cfg),
        epochs=cfg.repr_epochs, seed=cfg.seed, lr=cfg.lr,
        margin=cfg.margin_alpha, n_frames=cfg.n_frames, load_set=spoon)
    os.makedirs(cfg.out_dir, exist_ok=True)
    enc.save_encoder(encoder, os.path.join(cfg.out_dir, "encoder"))
    _write_history(history, os.path.join(cfg.out_dir, "repr_losses.csv"), cfg)
    print(f"encoder saved to {os.path.join(cfg.out_dir, 'encoder')}")
    return 0


def _write_history(history, path, cfg):
    rows = [{"epoch": i, **h} for i, h in enumerate(history)]
    if not rows:
        rows = [{"epoch": -1}]
    write_report({"config_hash": cfg.hash(), "rows": rows}, path)


def cmd_train_bc(args):
    cfg = _load_config(args)
    demos = _demos(cfg, os.path.join(cfg.data_dir, "demos.jsonl"))
    enc_dir = os.path.join(cfg.out_dir, "encoder")
    encoder = enc.load_encoder(enc_dir, n_frames=cfg.n_frames)
    policy, encoder, history = training.train_bc(
        demos, encoder, k=cfg.history_k, epochs=cfg.bc_epochs,
        seed=cfg.seed, lr=cfg.lr, density_radius=cfg.density_radius,
        margin=cfg.safety_margin, finetune_encoder=False,
        input_noise=cfg.input_noise)
    training.save_policy(policy, os.path.join(cfg.out_dir, "policy"))
    rows = [{"epoch": i, "nll": v} for i, v in enumerate(history)]
    write_report({"config_hash": cfg.hash(), "rows": rows},
                 os.path.join(cfg.out_dir, "bc_losses.csv"))
    print(f"policy saved to {os.path.join(cfg.out_dir, 'policy')}")
    return 0


def cmd_eval(args):
    cfg = _load_config(args)
    encoder = enc.load_encoder(os.path.join(cfg.out_dir, "encoder"),
                               n_frames=cfg.n_frames)
    policy = training.load_policy(os.path.join(cfg.out_dir, "policy"))
    suites = {
        "in_distribution": evaluation.in_distribution_suite(
            cfg.n_eval, cfg.seed + 1000),
        "generalization": evaluation.generalization_suite(
            cfg.n_eval, cfg.seed + 2000),
    }
    rows = []
    for name, suite in suites.items():
        metrics = evaluation.evaluate(policy, encoder, suite,
                                      horizon=cfg.horizon)
        rows.append({"suite": name, "seed": cfg.seed, **metrics})
        print(f"{name}: sur {metrics['sur']:.3f} sfr {metrics['sfr']:.3f} "
              f"afs {metrics['afs']:.4f}")
    write_report({"config_hash": cfg.hash(), "rows": rows},
                 os.path.join(cfg.out_dir, "metrics.csv"))
    return 0


def cmd_ablate(args):
    cfg = _load_config(args)
    ds = _dataset(cfg)
    demos = _demos(cfg, os.path.join(cfg.data_dir, "demos.jsonl"))
    spoon = dataset.gen_spoon_dataset(n=480, seed=cfg.seed)
    suites = {
        "in_distribution": evaluation.in_distribution_suite(
            cfg.n_eval, cfg.seed + 1000),
        "generalization": evaluation.generalization_suite(
            cfg.n_eval, cfg.seed + 2000),
    }
    rows = evaluation.ablation_suite(
        demos, ds, suites, seed=cfg.seed, repr_epochs=cfg.repr_epochs,
        bc_epochs=cfg.bc_epochs, k=cfg.history_k,
        input_noise=cfg.input_noise, load_set=spoon)
    for row in rows:
        row["seed"] = cfg.seed
        print(f"{row['variant']}: gen sur {row['generalization_sur']:.3f}")
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_report({"config_hash": cfg.hash(), "rows": rows},
                 os.path.join(cfg.out_dir, "ablations.csv"))
    return 0


def cmd_scoop_point(args):
    mask = geometry.read_pgm(args.mask)
    pt = geometry.optimal_scoop_point(mask, r=args.r, m=args.m)
    print(f"{pt.x} {pt.y} {pt.density:.6f} {pt.boundary_distance:.6f}")
    return 0


def cmd_embed(args):
    cfg = _load_config(args)
    ds = _dataset(cfg)
    encoder = enc.load_encoder(os.path.join(cfg.out_dir, "encoder"),
                               n_frames=cfg.n_frames)
    idx = ds.indices("test")
    if len(idx) < 5:
        idx = np.arange(len(ds))
    idx = idx[:analysis.TSNE_MAX_POINTS]
    emb = enc.embed_images(encoder, ds.images[idx])
    coords, kl = analysis.tsne_2d(emb, perplexity=min(30.0, len(idx) / 4),
                                  iters=args.iters, seed=cfg.seed)
    rows = [
        {"index": int(i), "prop_label": int(ds.prop_labels[i]),
         "x": float(cx), "y": float(cy)}
        for i, (cx, cy) in zip(idx, coords)
    ]
    os.makedirs(cfg.out_dir, exist_ok=True)
    write_report({"config_hash": cfg.hash(), "rows": rows},
                 os.path.join(cfg.out_dir, "tsne.csv"))
    print(f"kl {kl[0]:.4f} -> {kl[-1]:.4f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="imrl", description="food-scooping representation learning")
    sub = parser.add_subparsers(dest="command")
    for name, fn in _COMMANDS.items():
        p = sub.add_parser(name)
        if name == "scoop-point":
            p.add_argument("--mask", required=True)
            p.add_argument("--r", type=int, default=9)
            p.add_argument("--m", type=float, default=3.0)
        else:
            p.add_argument("--config", default=None)
            if name == "embed":
                p.add_argument("--iters", type=int, default=300)
        p.set_defaults(func=fn)
    return parser


_COMMANDS = {
    "gen-data": cmd_gen_data,
    "gen-demos": cmd_gen_demos,
    "train-repr": cmd_train_repr,
    "train-bc": cmd_train_bc,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
    "scoop-point": cmd_scoop_point,
    "embed": cmd_embed,
}


def run_command(argv):
    """Dispatch one subcommand; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return 2 if e.code not in (0, None) else int(e.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        return 2
    try:
        return args.func(args)
    except ImrlError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


def main():
    sys.exit(run_command(sys.argv[1:]))


if __name__ == "__main__":
    main()
