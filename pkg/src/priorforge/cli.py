"""Command-line surface: synth, verify, metrics.

Exit status: 0 on success, 2 on validation failure (bad arguments,
failed verification, malformed files), 1 on I/O errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .formats import FormatError
from .metrics import DEFAULT_K, compute_metrics, load_embeddings
from .pipeline import (
    OUTPUT_FORMATS,
    SynthesisConfig,
    synthesize_dataset,
    verify_dataset,
)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="priorforge",
        description="Deterministic image-prior synthesis and distribution metrics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    synth = sub.add_parser(
        "synth",
        help="generate a sharded image-prior dataset",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    synth.add_argument("out_dir", help="output directory for shards and manifest.json")
    synth.add_argument("--channels", type=int, default=3, help="image channels")
    synth.add_argument("--height", type=int, default=32, help="image height in pixels")
    synth.add_argument("--width", type=int, default=32, help="image width in pixels")
    synth.add_argument("--count", type=int, default=10_000, help="number of images")
    synth.add_argument("--master-seed", type=int, default=0, help="master seed (u64)")
    synth.add_argument(
        "--upscale-mode", choices=["nearest", "bilinear"], default="nearest",
        help="noise upscaling interpolation",
    )
    synth.add_argument(
        "--elastic-alpha", type=float, default=None,
        help="elastic displacement in pixels (default: 8 scaled with side/32)",
    )
    synth.add_argument(
        "--elastic-sigma", type=float, default=None,
        help="elastic smoothing radius in pixels (default: 4 scaled with side/32)",
    )
    synth.add_argument("--mask-epsilon", type=float, default=1e-2, help="mask steady-state threshold")
    synth.add_argument("--mask-max-iters", type=int, default=50, help="mask iteration cap")
    synth.add_argument(
        "--mask-blur-sigma", type=float, default=None,
        help="mask blur sigma (default: 1.5 scaled with side/32)",
    )
    synth.add_argument(
        "--mask-blur-kernel", type=int, default=None,
        help="mask blur kernel side, odd (default: 5 scaled with side/32)",
    )
    synth.add_argument("--mono-prob", type=float, default=0.25, help="monochrome partner probability")
    synth.add_argument("--format", choices=list(OUTPUT_FORMATS), default="f32bin", help="output format")
    synth.add_argument("--shard-size", type=int, default=10_000, help="images per shard")
    synth.add_argument("--workers", type=int, default=1, help="parallel worker processes")

    verify = sub.add_parser("verify", help="verify a dataset against its manifest")
    verify.add_argument("manifest", help="path to manifest.json")
    verify.add_argument(
        "--sample", type=int, default=64,
        help="images checked per shard for range/shape (0 = all, default 64)",
    )

    metrics = sub.add_parser("metrics", help="distribution metrics between two embedding files")
    metrics.add_argument("--real", required=True, help="real embeddings (DIPE file)")
    metrics.add_argument("--fake", required=True, help="fake embeddings (DIPE file)")
    metrics.add_argument("--k", type=int, default=DEFAULT_K, help=f"neighbor count (default {DEFAULT_K})")
    metrics.add_argument("--report", default=None, help="optional JSON report output path")
    return parser


def _cmd_synth(args) -> int:
    cfg = SynthesisConfig(
        channels=args.channels,
        height=args.height,
        width=args.width,
        count=args.count,
        master_seed=args.master_seed,
        upscale_mode=args.upscale_mode,
        elastic_alpha=args.elastic_alpha,
        elastic_sigma=args.elastic_sigma,
        mask_epsilon=args.mask_epsilon,
        mask_max_iters=args.mask_max_iters,
        mask_blur_sigma=args.mask_blur_sigma,
        mask_blur_kernel=args.mask_blur_kernel,
        mono_prob=args.mono_prob,
        output_format=args.format,
        shard_size=args.shard_size,
    )
    manifest = synthesize_dataset(cfg, args.out_dir, workers=args.workers)
    print(f"wrote {manifest.total_count} images in {len(manifest.shards)} shard(s) to {args.out_dir}")
    print(f"manifest: {Path(args.out_dir) / 'manifest.json'}")
    print(f"config hash: {manifest.config_hash}")
    return 0


def _cmd_verify(args) -> int:
    report = verify_dataset(args.manifest, sample_per_shard=args.sample)
    for check in report.shard_checks:
        status = "ok" if check.ok else "FAIL"
        line = f"{status:4s} {check.label} [{check.start}:{check.start + check.count}]"
        print(line)
        for err in check.errors:
            print(f"     {err}")
    print(f"checked {report.images_checked} image(s) across {len(report.shard_checks)} shard(s)")
    if not report.passed:
        print("verification FAILED", file=sys.stderr)
        return 2
    print("verification passed")
    return 0


def _cmd_metrics(args) -> int:
    real = load_embeddings(args.real)
    fake = load_embeddings(args.fake)
    report = compute_metrics(real, fake, k=args.k)
    print(f"precision {report.precision * 100:.2f}%")
    print(f"recall    {report.recall * 100:.2f}%")
    print(f"density   {report.density * 100:.2f}%")
    print(f"coverage  {report.coverage * 100:.2f}%")
    if args.report:
        Path(args.report).write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
        print(f"report: {args.report}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "verify":
            return _cmd_verify(args)
        return _cmd_metrics(args)
    except (FormatError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
