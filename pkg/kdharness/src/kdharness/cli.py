"""Command line: train-teacher, train-primer, distill, evaluate,
export-embeddings, contrast.

Every subcommand takes --config <json file> plus repeated --set key=value
overrides (values parsed as JSON when they parse, else kept as strings).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import torch

from .contrast import optimize_dataset
from .data import load_priors, load_real_dataset, make_noise_images
from .evaluate import evaluate, plot_training_curves, write_report
from .io import read_manifest
from .models import build_from_checkpoint, load_checkpoint, save_checkpoint
from .oracle import TeacherOracle
from .train import (
    TrainRunConfig,
    distill_student,
    export_embeddings,
    train_primer,
    train_teacher,
)


def _load_config(path: str | None, overrides: list[str]) -> dict:
    config = {}
    if path:
        config = json.loads(Path(path).read_text(encoding="utf-8"))
    for item in overrides or []:
        if "=" not in item:
            raise ValueError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        config[key.strip()] = value
    return config


def _require(config: dict, *keys):
    missing = [k for k in keys if k not in config]
    if missing:
        raise ValueError(f"config is missing required keys: {', '.join(missing)}")


def _train_run_config(config: dict) -> TrainRunConfig:
    fields = {k: config[k] for k in TrainRunConfig.__dataclass_fields__ if k in config}
    return TrainRunConfig(**fields)


def _cmd_train_teacher(config: dict) -> int:
    _require(config, "out")
    name = config.get("dataset", "mnist")
    train, test = load_real_dataset(name, config.get("data_dir"), config.get("seed", 0))
    model, curves = train_teacher(
        train,
        arch=config.get("arch", "lenet5"),
        epochs=config.get("epochs", 10),
        batch_size=config.get("batch_size", 128),
        lr=config.get("lr", 1e-3),
        seed=config.get("seed", 0),
    )
    report = evaluate(model, test)
    save_checkpoint(
        config["out"],
        model,
        {
            "arch": config.get("arch", "lenet5"),
            "num_classes": train.num_classes,
            "in_channels": int(train.images.shape[1]),
            "role": "teacher",
            "dataset": name,
            "test_accuracy": report.accuracy,
        },
    )
    print(f"teacher test accuracy: {report.accuracy * 100:.2f}% ({report.n} images)")
    if config.get("report"):
        write_report(config["report"], {"config": config, "curves": curves, "eval": report.to_dict()})
    return 0


def _load_teacher(config: dict) -> TeacherOracle:
    model = build_from_checkpoint(config["teacher_checkpoint"])
    return TeacherOracle(model)


def _primer_images(config: dict, run: TrainRunConfig) -> torch.Tensor:
    manifest = read_manifest(run.dataset_manifest)
    if run.mode == "naive_noise":
        shape = manifest["config"]
        count = config.get("noise_count", manifest["total_count"])
        return make_noise_images(
            count, shape["channels"], shape["height"], shape["width"], run.seed
        )
    return load_priors(run.dataset_manifest)


def _cmd_train_primer(config: dict) -> int:
    _require(config, "dataset_manifest", "teacher_checkpoint", "out")
    run = _train_run_config(config)
    if run.mode not in ("naive_noise", "hard_only"):
        raise ValueError("train-primer expects mode naive_noise or hard_only")
    oracle = _load_teacher(config)
    images = _primer_images(config, run)
    model, curves, _ = train_primer(run, oracle, images)
    save_checkpoint(
        config["out"],
        model,
        {
            "arch": run.arch,
            "num_classes": run.num_classes,
            "in_channels": int(images.shape[1]),
            "role": "primer",
            "mode": run.mode,
            "teacher_queries": oracle.query_count,
        },
    )
    print(f"primer trained ({run.mode}); teacher queries: {oracle.query_count}")
    if config.get("report"):
        write_report(
            config["report"],
            {"config": run.to_dict(), "curves": curves, "teacher_queries": oracle.query_count},
        )
    if config.get("plot"):
        plot_training_curves(curves, config["plot"])
    return 0


def _cmd_distill(config: dict) -> int:
    _require(config, "dataset_manifest", "teacher_checkpoint", "primer_checkpoint", "out")
    run = _train_run_config(config)
    oracle = _load_teacher(config)
    primer = build_from_checkpoint(config["primer_checkpoint"])
    images = load_priors(run.dataset_manifest)
    model, curves, _ = distill_student(run, oracle, primer, images)
    save_checkpoint(
        config["out"],
        model,
        {
            "arch": run.arch,
            "num_classes": run.num_classes,
            "in_channels": int(images.shape[1]),
            "role": "student",
            "teacher_queries": oracle.query_count,
        },
    )
    print(f"student distilled; teacher queries: {oracle.query_count}")
    if config.get("report"):
        write_report(
            config["report"],
            {"config": run.to_dict(), "curves": curves, "teacher_queries": oracle.query_count},
        )
    if config.get("plot"):
        plot_training_curves(curves, config["plot"])
    return 0


def _cmd_evaluate(config: dict) -> int:
    _require(config, "model", "dataset")
    model = build_from_checkpoint(config["model"])
    _, test = load_real_dataset(config["dataset"], config.get("data_dir"), config.get("seed", 0))
    report = evaluate(model, test)
    print(f"accuracy: {report.accuracy * 100:.2f}% over {report.n} images")
    for cls, acc in enumerate(report.per_class_accuracy):
        print(f"  class {cls}: {acc * 100:.2f}%")
    if config.get("report"):
        write_report(config["report"], {"config": config, "eval": report.to_dict()})
    return 0


def _cmd_export_embeddings(config: dict) -> int:
    _require(config, "model", "out")
    model = build_from_checkpoint(config["model"])
    if config.get("manifest"):
        images = load_priors(config["manifest"])
    else:
        _require(config, "dataset")
        train, test = load_real_dataset(
            config["dataset"], config.get("data_dir"), config.get("seed", 0)
        )
        images = (test if config.get("split", "test") == "test" else train).images
    matrix = export_embeddings(model, images, config["out"], config.get("batch_size", 512))
    print(f"wrote {matrix.shape[0]} embeddings of dim {matrix.shape[1]} to {config['out']}")
    return 0


def _cmd_contrast(config: dict) -> int:
    _require(config, "dataset_manifest", "primer_checkpoint", "out_dir")
    primer = build_from_checkpoint(config["primer_checkpoint"])
    manifest = optimize_dataset(
        config["dataset_manifest"],
        primer,
        config["out_dir"],
        steps=config.get("steps", 200),
        image_lr=config.get("image_lr", 1e-2),
        discriminator_lr=config.get("discriminator_lr", 1e-3),
        batch_size=config.get("batch_size", 256),
        seed=config.get("seed", 0),
        standard_infonce=config.get("standard_infonce", False),
        temperature=config.get("temperature", 1.0),
    )
    print(f"optimized dataset written: {manifest}")
    return 0


_COMMANDS = {
    "train-teacher": _cmd_train_teacher,
    "train-primer": _cmd_train_primer,
    "distill": _cmd_distill,
    "evaluate": _cmd_evaluate,
    "export-embeddings": _cmd_export_embeddings,
    "contrast": _cmd_contrast,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="kdharness",
        description="Black-box hard-label distillation harness over synthetic image priors.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file")
        p.add_argument(
            "--set", action="append", default=[], metavar="KEY=VALUE",
            help="override a config key (value parsed as JSON when possible)",
        )
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config, args.set)
        return _COMMANDS[args.command](config)
    except (ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
