"""Pipeline command-line interface.

Subcommands compose the full experiment: gen-data -> train-gan -> augment
-> train-clf -> eval -> report. Each command is idempotent given a fixed
seed and unchanged inputs, and re-running overwrites its outputs with
byte-identical artifacts in single-threaded mode.

Exit codes: 0 success, 1 usage/config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from . import cgan, classifier, data, evaluation, mixers, shapes
from .config import ConfigError, RunConfig, RunPaths, load_config, run_paths
from .sampling import substream


class MissingArtifactError(RuntimeError):
    """A prerequisite pipeline artifact does not exist yet."""


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _fresh_dir(path: Path) -> Path:
    if path.exists():
        shutil.rmtree(path)
    path.mkdir(parents=True)
    return path


def _write_jsonl(records: list[dict], path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")


def _require(path: Path, what: str, hint: str) -> Path:
    if not path.exists():
        raise MissingArtifactError(f"missing {what} at {path}; run '{hint}' first")
    return path


def _load_clf_split(cfg: RunConfig, paths: RunPaths) -> data.DatasetSplit:
    pool_dir = _require(paths.data_clf, "classifier image pool", "gemix gen-data")
    pool = data.load_class_folders(pool_dir, cfg.num_classes, cfg.image_size, cfg.channels)
    return data.split_train_val(pool, cfg.data.train_fraction, substream(cfg.seed, "split"))


def cmd_gen_data(cfg: RunConfig, args) -> int:
    paths = run_paths(cfg)
    pools = (("gan", cfg.data.gan_per_class, paths.data_gan),
             ("clf", cfg.data.clf_per_class, paths.data_clf),
             ("test", cfg.data.test_per_class, paths.data_test))
    for name, per_class, out in pools:
        samples = shapes.make_shape_samples(cfg.num_classes, per_class, cfg.image_size,
                                            substream(cfg.seed, f"data:{name}"))
        shapes.write_class_folders(samples, _fresh_dir(out))
        print(f"wrote {len(samples)} images ({cfg.num_classes} classes x {per_class}) to {out}")
    return 0


def cmd_train_gan(cfg: RunConfig, args) -> int:
    paths = run_paths(cfg)
    pool_dir = _require(paths.data_gan, "GAN image pool", "gemix gen-data")
    samples = data.load_class_folders(pool_dir, cfg.num_classes, cfg.image_size, cfg.channels)
    print(f"training conditional GAN on {len(samples)} images for {cfg.gan.steps} steps ...")
    ckpt = cgan.train_cgan(samples, cfg.gan)
    cgan.save_checkpoint(ckpt, paths.checkpoint)
    _write_jsonl(ckpt.train_log, paths.gan_log)
    if ckpt.train_log:
        last = ckpt.train_log[-1]
        print(f"final losses: d={last['d_loss']:.4f} g={last['g_loss']:.4f}")
    print(f"checkpoint: {paths.checkpoint}")
    return 0


def cmd_augment(cfg: RunConfig, args) -> int:
    paths = run_paths(cfg)
    kind = args.kind
    n = cfg.mix.num_synthetic
    split = _load_clf_split(cfg, paths)
    if kind == "mixup":
        batch = mixers.mixup_batch(split.train, n, cfg.mix.mixup_alpha,
                                   substream(cfg.seed, "augment:mixup"))
    elif kind == "mmixup":
        by_class = data.group_by_class(split.train, cfg.num_classes)
        batch = mixers.mmixup_batch(by_class, n, cfg.mix.a_eq, cfg.mix.a_neq,
                                    substream(cfg.seed, "augment:mmixup"))
    else:  # gemix
        ckpt_path = _require(paths.checkpoint, "conditional-GAN checkpoint", "gemix train-gan")
        handle = cgan.as_generator_handle(cgan.load_checkpoint(ckpt_path))
        batch = mixers.gemix_batch(handle, n, cfg.mix.a_eq, cfg.mix.a_neq,
                                   substream(cfg.seed, "augment:gemix"))
    out = _fresh_dir(paths.aug_dir(kind))
    manifest = data.save_dataset(batch, out)
    print(f"wrote {len(batch)} {kind} samples to {out} ({manifest.name})")
    return 0


def cmd_train_clf(cfg: RunConfig, args) -> int:
    paths = run_paths(cfg)
    tag = args.setup
    split = _load_clf_split(cfg, paths)
    setup = classifier.standard_setups(len(split.train), cfg.mix.num_synthetic)[tag]
    pools: dict[str, list] = {"real": split.train}
    for source in setup.components:
        if source == "real":
            continue
        aug_dir = paths.aug_dir(source)
        _require(aug_dir / "manifest.json", f"augmented dataset aug/{source}",
                 f"gemix augment --kind {source}")
        pools[source] = data.load_dataset(aug_dir)
    assembled = classifier.assemble_training_set(
        setup, real=pools.get("real"), mixup_data=pools.get("mixup"),
        mmixup_data=pools.get("mmixup"), gemix_data=pools.get("gemix"),
        rng=substream(cfg.seed, "shuffle"))
    print(f"training {cfg.classifier.backbone} on setup {tag} "
          f"({len(assembled)} samples, {cfg.classifier.epochs} epochs) ...")
    model = classifier.train_classifier(assembled, cfg.classifier, val=split.val)
    model_dir = _fresh_dir(paths.model_dir(tag))
    classifier.save_classifier(model, model_dir / "model.pt")
    _write_jsonl(model.epoch_log, model_dir / "epoch_log.jsonl")
    if model.epoch_log:
        print(f"final epoch: {model.epoch_log[-1]}")
    print(f"model: {model_dir / 'model.pt'}")
    return 0


def cmd_eval(cfg: RunConfig, args) -> int:
    paths = run_paths(cfg)
    tag = args.setup
    model_path = Path(args.model) if args.model else paths.model_dir(tag) / "model.pt"
    _require(model_path, f"trained model for setup {tag}", f"gemix train-clf --setup {tag}")
    model = classifier.load_classifier(model_path)
    test_dir = _require(paths.data_test, "test image pool", "gemix gen-data")
    test = data.load_class_folders(test_dir, cfg.num_classes, cfg.image_size, cfg.channels)
    images = np.stack([s.image for s in test])
    truths = [data.label_class(s) for s in test]
    cm = evaluation.confusion_matrix(classifier.predict(model, images), truths)
    report = evaluation.build_report(cm, setup=tag, backbone=model.config.backbone,
                                     positive_class=cfg.positive_class)
    out = evaluation.write_report(report, paths.report_path(tag))
    if args.features:
        feats = classifier.extract_features(model, images)
        ids = list(range(len(test)))
        classifier.save_feature_table(args.features, ids, [s.provenance for s in test], feats)
        print(f"feature table: {args.features}")
    print(evaluation.render_table_row(report))
    print(f"report: {out}")
    return 0


def cmd_report(cfg: RunConfig, args) -> int:
    paths = run_paths(cfg)
    if args.reports:
        files = [Path(p) for p in args.reports]
    else:
        _require(paths.reports_dir, "reports directory", "gemix eval")
        files = sorted(paths.reports_dir.glob("*.json"))
    if not files:
        raise MissingArtifactError(f"no report files under {paths.reports_dir}; run 'gemix eval' first")
    reports = [evaluation.read_report(p) for p in files]
    table = evaluation.render_comparison(reports)
    out = paths.reports_dir / "comparison.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(table)
    print(table, end="")
    print(f"comparison table: {out}")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="gemix", description="Conditional-GAN mixup augmentation pipeline")
    parser.add_argument("--config", help="YAML run configuration file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY.PATH=VALUE", help="override one config value (repeatable)")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", help="override the output root directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gen-data", help="generate the procedural class-folder datasets")

    p = sub.add_parser("train-gan", help="train the stage-1 conditional GAN")
    p.add_argument("--steps", type=int, help="override gan.steps")

    p = sub.add_parser("augment", help="produce one augmented dataset")
    p.add_argument("--kind", required=True, choices=("mixup", "mmixup", "gemix"))
    p.add_argument("--num", type=int, help="override mix.num_synthetic")

    p = sub.add_parser("train-clf", help="train a classifier on one setup")
    p.add_argument("--setup", required=True, choices=classifier.SETUP_TAGS)
    p.add_argument("--epochs", type=int, help="override classifier.epochs")

    p = sub.add_parser("eval", help="evaluate a trained model on the test pool")
    p.add_argument("--setup", required=True, choices=classifier.SETUP_TAGS)
    p.add_argument("--model", help="model path (default: models/<setup>/model.pt)")
    p.add_argument("--features", help="also export a penultimate-feature table to this CSV")

    p = sub.add_parser("report", help="render the comparison table over reports")
    p.add_argument("reports", nargs="*", help="report files (default: reports/*.json)")
    return parser


_HANDLERS = {
    "gen-data": cmd_gen_data,
    "train-gan": cmd_train_gan,
    "augment": cmd_augment,
    "train-clf": cmd_train_clf,
    "eval": cmd_eval,
    "report": cmd_report,
}


def _collect_overrides(args) -> list[str]:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output_root={args.out}")
    if getattr(args, "steps", None) is not None:
        overrides.append(f"gan.steps={args.steps}")
    if getattr(args, "num", None) is not None:
        overrides.append(f"mix.num_synthetic={args.num}")
    if getattr(args, "epochs", None) is not None:
        overrides.append(f"classifier.epochs={args.epochs}")
    return overrides


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = load_config(args.config, _collect_overrides(args))
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return _HANDLERS[args.command](cfg, args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
