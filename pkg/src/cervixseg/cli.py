"""Command-line entry point chaining the whole pipeline.

Subcommands: phantom, preprocess, split, train, eval, gradcam,
annotate-serve. Each is idempotent for fixed seeds, writes its artifacts
under the configured directory together with a snapshot of the exact
configuration that produced them, and exits 0 on success, 1 on
runtime/config errors, 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import PipelineConfig, load_pipeline_config
from .errors import ConfigError, TrainingError

__all__ = ["main", "build_parser"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cervixseg",
        description="Cervix segmentation + preterm-birth classification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, default=None, help="pipeline YAML config")
        p.add_argument(
            "--set",
            dest="overrides",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="dotted-path config override, e.g. training.epochs=5",
        )

    p = sub.add_parser("phantom", help="generate the synthetic dataset")
    common(p)

    p = sub.add_parser("preprocess", help="marker removal + resize of a raw image directory")
    common(p)
    p.add_argument("--input", type=Path, required=True, help="manifest of raw images")
    p.add_argument("--out", type=Path, required=True, help="output dataset directory")

    p = sub.add_parser("split", help="patient-level train/val/test split")
    common(p)

    p = sub.add_parser("train", help="train the multi-task network")
    common(p)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    common(p)
    p.add_argument("--split", default="test", help="split name (default test)")
    p.add_argument("--checkpoint", default="best", help="'best', 'last' or a path")
    p.add_argument("--threshold", type=float, default=0.5)

    p = sub.add_parser("gradcam", help="export a Grad-CAM heatmap for one image")
    common(p)
    p.add_argument("--image", required=True, help="sample id from the dataset manifest")
    p.add_argument("--class", dest="target_class", choices=("control", "preterm"), default="preterm")
    p.add_argument("--layer", default="bottleneck")
    p.add_argument("--checkpoint", default="best")
    p.add_argument("--out", type=Path, default=None, help="output directory (default run_dir/gradcam)")

    p = sub.add_parser("annotate-serve", help="serve the annotation backend")
    common(p)
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--root", type=Path, default=None, help="store root (default paths.data_dir)")

    return parser


def _resolve_checkpoint(cfg: PipelineConfig, name: str) -> Path:
    if name in ("best", "last"):
        return Path(cfg.paths.run_dir) / "checkpoints" / f"{name}.pt"
    return Path(name)


def _load_dataset(cfg: PipelineConfig):
    from .phantom import load_manifest

    manifest_path = Path(cfg.paths.data_dir) / "manifest.json"
    if not manifest_path.exists():
        raise FileNotFoundError(f"dataset manifest not found: {manifest_path} (run `cervixseg phantom` first)")
    return load_manifest(manifest_path)


def cmd_phantom(cfg: PipelineConfig, args) -> int:
    from .phantom import generate_dataset

    out = Path(cfg.paths.data_dir)
    generate_dataset(cfg.phantom, cfg.n_samples, out)
    cfg.snapshot(out / "config_phantom.json")
    print(f"wrote {cfg.n_samples} samples and manifest to {out}")
    return 0


def cmd_preprocess(cfg: PipelineConfig, args) -> int:
    from .phantom import load_manifest
    from .pngio import save_gray_png
    from .preprocess import prepare_image

    manifest, _ = load_manifest(args.input)
    root_in = Path(args.input).parent
    root_out = Path(args.out)
    (root_out / "images").mkdir(parents=True, exist_ok=True)
    (root_out / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for entry in manifest["samples"]:
        image = prepare_image(root_in / entry["path"], out_size=cfg.preprocess_size)
        save_gray_png(image, root_out / entry["path"])
        mask_src = root_in / entry["mask_path"]
        if mask_src.exists():
            from .pngio import load_mask_png, save_mask_png
            from .preprocess import resize_mask_nearest

            mask = resize_mask_nearest(
                load_mask_png(mask_src), (cfg.preprocess_size, cfg.preprocess_size)
            )
            save_mask_png(mask, root_out / entry["mask_path"])
        entries.append(entry)
    manifest["samples"] = entries
    manifest["preprocessed_size"] = cfg.preprocess_size
    (root_out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    cfg.snapshot(root_out / "config_preprocess.json")
    print(f"preprocessed {len(entries)} images into {root_out}")
    return 0


def cmd_split(cfg: PipelineConfig, args) -> int:
    from .preprocess import split_by_patient

    _, samples = _load_dataset(cfg)
    manifest = split_by_patient(samples, fractions=cfg.split.fractions, seed=cfg.split.seed)
    out = Path(cfg.paths.data_dir) / "splits.json"
    manifest.save(out)
    cfg.snapshot(Path(cfg.paths.data_dir) / "config_split.json")
    counts = {k: len(v) for k, v in manifest.splits.items()}
    print(f"wrote {out} with counts {counts}")
    return 0


def cmd_train(cfg: PipelineConfig, args) -> int:
    from .preprocess import SplitManifest
    from .report import save_loss_curves
    from .trainer import train

    _, samples = _load_dataset(cfg)
    splits_path = Path(cfg.paths.data_dir) / "splits.json"
    if not splits_path.exists():
        raise FileNotFoundError(f"split manifest not found: {splits_path} (run `cervixseg split` first)")
    splits = SplitManifest.load(splits_path)
    run_dir = Path(cfg.paths.run_dir)
    record = train(cfg.training, samples, splits, run_dir)
    cfg.snapshot(run_dir / "config_pipeline.json")
    save_loss_curves(record.history, run_dir / "loss_curves.png")
    print(
        f"trained {cfg.training.epochs} epochs; best val loss {record.best_val_loss:.4f} "
        f"at epoch {record.best_epoch}; artifacts in {run_dir}"
    )
    return 0


def cmd_eval(cfg: PipelineConfig, args) -> int:
    from .preprocess import SplitManifest
    from .report import render_eval_report
    from .trainer import evaluate, load_split_samples

    checkpoint = _resolve_checkpoint(cfg, args.checkpoint)
    if not checkpoint.exists():
        raise FileNotFoundError(f"checkpoint not found: {checkpoint}")
    _, samples = _load_dataset(cfg)
    splits = SplitManifest.load(Path(cfg.paths.data_dir) / "splits.json")
    per_split = load_split_samples(samples, splits)
    if args.split not in per_split:
        raise ConfigError(f"split: unknown split {args.split!r}; have {sorted(per_split)}")
    report, rows = evaluate(checkpoint, per_split[args.split], threshold=args.threshold)
    run_dir = Path(cfg.paths.run_dir)
    written = render_eval_report(report, rows, run_dir, args.split)
    cfg.snapshot(run_dir / "config_pipeline.json")
    print(report)
    print("wrote " + ", ".join(str(w) for w in written))
    return 0


def cmd_gradcam(cfg: PipelineConfig, args) -> int:
    from .explain import grad_cam, save_heatmap_artifacts
    from .model import load_checkpoint

    checkpoint = _resolve_checkpoint(cfg, args.checkpoint)
    if not checkpoint.exists():
        raise FileNotFoundError(f"checkpoint not found: {checkpoint}")
    _, samples = _load_dataset(cfg)
    by_id = {s.sample_id: s for s in samples}
    if args.image not in by_id:
        raise ConfigError(f"image: unknown sample id {args.image!r}")
    sample = by_id[args.image]
    model, _ = load_checkpoint(checkpoint)
    cam = grad_cam(model, sample.image, target_layer=args.layer, target=args.target_class)
    cam.image_id = sample.sample_id
    out_dir = args.out or Path(cfg.paths.run_dir) / "gradcam"
    prefix = Path(out_dir) / f"{sample.sample_id}_{args.target_class}"
    save_heatmap_artifacts(cam, sample.image, prefix)
    cfg.snapshot(Path(out_dir) / "config_gradcam.json")
    print(f"wrote {prefix}.png and sidecar {prefix}.json")
    return 0


def cmd_annotate_serve(cfg: PipelineConfig, args) -> int:
    from .service import serve

    root = args.root or Path(cfg.paths.data_dir)
    serve(port=args.port, store_root=root, host=args.host)
    return 0


_COMMANDS = {
    "phantom": cmd_phantom,
    "preprocess": cmd_preprocess,
    "split": cmd_split,
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcam": cmd_gradcam,
    "annotate-serve": cmd_annotate_serve,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_pipeline_config(args.config, args.overrides)
        cfg.validate()
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, TrainingError, ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
