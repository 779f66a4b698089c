"""Command-line interface.

Subcommands:
  gen         render a synthetic dataset to a directory
  train       train a variant on a dataset directory, write a checkpoint
  eval        score a checkpoint on a dataset split, write JSON + CSV reports
  infer       classify one PPM crop, optionally dumping the attention map
  grad-check  verify analytic gradients against finite differences

All commands share one JSON run config (see :mod:`poseattn.config`); --seed,
--variant, and --lambda override the corresponding config fields.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from .checkpoint import checkpoint_ppe, load_checkpoint, save_checkpoint
from .config import RunConfig, build_run_config, load_run_config
from .dataio import load_dataset, manifest_ppe, save_dataset
from .gradcheck import standard_checks
from .metrics import classification_report
from .model import classify_crop
from .netpbm import read_ppm, write_pgm
from .synthdata import generate_dataset
from .training import (evaluate_accuracy, predict, stratified_split, train)

__all__ = ["main"]

SPLIT_NAMES = ("train", "val", "test")


def _load_config(args) -> RunConfig:
    rc = load_run_config(args.config) if args.config else build_run_config({})
    train_cfg = rc.train
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
        rc.synth = dataclasses.replace(rc.synth, seed=args.seed)
    if getattr(args, "variant", None) is not None:
        overrides["variant"] = args.variant
    if getattr(args, "lambda_", None) is not None:
        overrides["lambda_"] = args.lambda_
    if overrides:
        rc.train = dataclasses.replace(train_cfg, **overrides)
    return rc


def _cmd_gen(args) -> int:
    rc = _load_config(args)
    samples = generate_dataset(rc.synth)
    out = save_dataset(samples, rc.synth, args.out, force=args.force)
    n_pos = sum(s.label for s in samples)
    print(f"wrote {len(samples)} samples ({n_pos} positive) to {out}")
    return 0


def _cmd_train(args) -> int:
    rc = _load_config(args)
    samples, manifest = load_dataset(args.data)
    ppe = manifest_ppe(manifest) or rc.ppe
    train_set, val_set, test_set = stratified_split(samples, rc.split_ratios,
                                                    rc.train.seed)
    result = train(train_set, val_set, rc.train, ppe)
    for h in result.history:
        print(f"epoch {h.epoch}: train_loss={h.train_loss!r} "
              f"val_loss={h.val_loss!r} val_accuracy={h.val_accuracy!r}",
              file=sys.stderr)
    val_accuracy = evaluate_accuracy(result.model, val_set)
    out = Path(args.out)
    save_checkpoint(out, result.model, rc.train, ppe, rc.split_ratios,
                    metrics={"val_accuracy": val_accuracy,
                             "best_epoch": result.best_epoch,
                             "best_val_loss": result.best_val_loss,
                             "epochs_run": len(result.history)})
    _write_history_csv(out / "history.csv", result.history)
    print(f"best_epoch={result.best_epoch} best_val_loss={result.best_val_loss!r}")
    print(f"val_accuracy={val_accuracy!r}")
    print(f"checkpoint={out}")
    return 0


def _write_history_csv(path, history) -> None:
    lines = ["epoch,train_loss,val_loss,val_accuracy"]
    for h in history:
        lines.append(f"{h.epoch},{h.train_loss!r},{h.val_loss!r},{h.val_accuracy!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def _cmd_eval(args) -> int:
    model, manifest = load_checkpoint(args.checkpoint)
    samples, _ = load_dataset(args.data)
    ratios = tuple(manifest.get("split_ratios", (0.70, 0.15, 0.15)))
    seed = manifest["train_config"].get("seed", 0)
    splits = stratified_split(samples, ratios, seed)
    subset = splits[SPLIT_NAMES.index(args.split)]
    probs, _ = predict(model, subset)
    preds = (probs >= 0.5).astype(int)
    labels = [s.label for s in subset]
    report = classification_report(preds, labels)
    out = Path(args.out)
    out.write_text(report.to_json())
    out.with_suffix(".csv").write_text(report.to_csv())
    print(f"split={args.split} n={len(subset)} accuracy={report.accuracy!r}")
    print(f"report={out}")
    return 0


def _cmd_infer(args) -> int:
    model, manifest = load_checkpoint(args.checkpoint)
    if args.emit_mask and model.variant == "plain":
        raise ValueError("--emit-mask is not available for the plain variant "
                         "(it has no attention map)")
    image = read_ppm(args.image)
    if image.shape != (3, 64, 64):
        raise ValueError(f"{args.image}: expected a 64x64 RGB PPM, got shape {image.shape}")
    prob, mask = classify_crop(model, image)
    print(f"label={int(prob >= 0.5)} prob={prob!r}")
    if args.emit_mask:
        write_pgm(args.emit_mask, mask)
        print(f"mask={args.emit_mask}")
    return 0


def _cmd_grad_check(args) -> int:
    report = standard_checks(tolerance=args.tolerance)
    for entry in report.entries:
        status = "PASS" if entry.passed(report.tolerance) else "FAIL"
        print(f"{status} {entry.name}: max_rel_error={entry.max_rel_error:.3e} "
              f"({entry.n_checked} elements)")
    print(f"overall: max_rel_error={report.max_rel_error:.3e} "
          f"tolerance={report.tolerance:g} "
          f"{'PASS' if report.passed else 'FAIL'}")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poseattn",
        description="Pose-supervised spatial attention classifier toolkit.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, config=True, seed=True):
        if config:
            p.add_argument("--config", help="path to the JSON run config")
        if seed:
            p.add_argument("--seed", type=int, help="override every configured seed")

    p_gen = sub.add_parser("gen", help="render a synthetic dataset")
    add_common(p_gen)
    p_gen.add_argument("--out", required=True, help="output dataset directory")
    p_gen.add_argument("--force", action="store_true",
                       help="overwrite a non-empty output directory")
    p_gen.set_defaults(func=_cmd_gen)

    p_train = sub.add_parser("train", help="train a classifier variant")
    add_common(p_train)
    p_train.add_argument("--data", required=True, help="dataset directory")
    p_train.add_argument("--out", required=True, help="checkpoint directory to write")
    p_train.add_argument("--variant", choices=("plain", "sam", "super_sam"),
                         help="override the configured variant")
    p_train.add_argument("--lambda", dest="lambda_", type=float,
                         help="override the loss blend weight in [0, 1]")
    p_train.set_defaults(func=_cmd_train)

    p_eval = sub.add_parser("eval", help="score a checkpoint on a dataset split")
    p_eval.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p_eval.add_argument("--data", required=True, help="dataset directory")
    p_eval.add_argument("--out", required=True, help="JSON report path (CSV twin written alongside)")
    p_eval.add_argument("--split", choices=SPLIT_NAMES, default="test",
                        help="which split to score (default: test)")
    p_eval.set_defaults(func=_cmd_eval)

    p_infer = sub.add_parser("infer", help="classify a single 64x64 PPM crop")
    p_infer.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p_infer.add_argument("--image", required=True, help="input PPM path")
    p_infer.add_argument("--emit-mask", metavar="PATH",
                         help="write the 8x8 attention map as a PGM")
    p_infer.set_defaults(func=_cmd_infer)

    p_gc = sub.add_parser("grad-check",
                          help="verify gradients against finite differences")
    p_gc.add_argument("--tolerance", type=float, default=1e-4,
                      help="max allowed relative error (default 1e-4)")
    p_gc.set_defaults(func=_cmd_grad_check)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, FileExistsError, RuntimeError,
            FloatingPointError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
