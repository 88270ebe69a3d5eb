"""Command-line entry point: dataset evaluation, single-image segmentation,
weight-archive validation.

Exit status is 0 on success and 1 on any handled error; diagnostics name the
failing stage and file on stderr.  Metrics JSON is deterministic (sorted
keys, no timestamps): the same command on the same inputs produces
byte-identical output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from PIL import Image

from .api import OpenVocabSegmenter
from .config import text_preset, vision_preset
from .debug import attention_grid_image, final_block_attention
from .errors import NasegError
from .evaluate import ConfusionMatrix, DatasetSpec, miou
from .imageio import load_image, load_mask, load_palette, save_mask, save_overlay
from .segmenter import normalize_image, resize_short_side, to_chw_float
from .weights import full_manifest, load_archive, validate

VARIANT_CHOICES = ("vanilla", "n-only", "kk", "naclip")


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--weights", required=True, help="tensor archive with model weights")
    p.add_argument("--vocab", required=True, help="ranked BPE merges file (.txt or .txt.gz)")
    p.add_argument("--preset", default="b16", choices=("b16", "b32", "l14"))
    p.add_argument("--model-config", help="JSON file with custom vision/text configs "
                                          "(overrides --preset)")
    p.add_argument("--variant", default="naclip", choices=VARIANT_CHOICES,
                   help="final-block attention logits")
    p.add_argument("--arch", default="reduced", choices=("vanilla", "reduced"),
                   help="final-block architecture")
    p.add_argument("--sigma", type=float, default=5.0, help="neighbourhood kernel width (patches)")
    p.add_argument("--attn-scope", default="last", choices=("last", "all"),
                   help="experimental: apply the modified attention to all blocks")
    p.add_argument("--no-pamr", action="store_true", help="disable mask refinement")
    p.add_argument("--pamr-iterations", type=int, default=10)
    p.add_argument("--pamr-dilations", default="1,2,4,8,12,24",
                   help="comma-separated dilation set")
    p.add_argument("--short-side", type=int, default=336)
    p.add_argument("--stride", type=int, default=112)
    p.add_argument("--temperature", type=float, default=100.0)
    p.add_argument("--templates", help="prompt template file, one per line with {}")


def _read_lines(path: str) -> list[str]:
    lines = [
        line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()
        if line.strip() and not line.startswith("#")
    ]
    if not lines:
        raise NasegError(f"{path}: file lists no entries")
    return lines


def _load_model_config(path: str):
    from .config import TextConfig, VisionConfig

    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return VisionConfig(**raw["vision"]), TextConfig(**raw["text"])
    except (KeyError, TypeError, json.JSONDecodeError) as e:
        raise NasegError(f"{path}: bad model config: {e}") from e


def _estimator(args) -> OpenVocabSegmenter:
    templates = _read_lines(args.templates) if args.templates else None
    vision_cfg = text_cfg = None
    if args.model_config:
        vision_cfg, text_cfg = _load_model_config(args.model_config)
    return OpenVocabSegmenter(
        weights=args.weights,
        vocab=args.vocab,
        preset=args.preset,
        vision_config=vision_cfg,
        text_config=text_cfg,
        variant=args.variant,
        arch=args.arch,
        sigma=args.sigma,
        attn_scope=args.attn_scope,
        templates=templates,
        pamr=not args.no_pamr,
        pamr_iterations=args.pamr_iterations,
        pamr_dilations=tuple(int(d) for d in args.pamr_dilations.split(",")),
        short_side=args.short_side,
        stride=args.stride,
        temperature=args.temperature,
    )


def _dump_attention(est: OpenVocabSegmenter, image, out_path: Path) -> None:
    vision_cfg, _ = est._configs()
    chw = normalize_image(
        resize_short_side(to_chw_float(image), est.short_side),
        est.image_mean, est.image_std,
    )
    window = chw[:, :vision_cfg.input_side, :vision_cfg.input_side]
    maps = final_block_attention(
        window, est.bundle_.visual, vision_cfg, est._attention_config(vision_cfg), est.attn_scope
    )
    grid = attention_grid_image(maps, vision_cfg.grid, vision_cfg.grid)
    Image.fromarray(grid, mode="L").save(out_path)


def cmd_eval(args) -> int:
    spec = DatasetSpec.from_root(
        args.dataset, ignore_index=args.ignore_index,
        include_background=not args.no_background,
    )
    names = _read_lines(args.classes) if args.classes else spec.class_names()
    est = _estimator(args).fit(names)

    pairs = spec.pairs()
    if args.limit is not None:
        pairs = pairs[:args.limit]

    for directory in (args.save_masks, args.overlays, args.dump_attention):
        if directory:
            Path(directory).mkdir(parents=True, exist_ok=True)
    palette = load_palette(args.palette) if args.palette else None

    cm = ConfusionMatrix(len(names))
    for img_path, mask_path in pairs:
        try:
            image = load_image(img_path)
            gt = load_mask(mask_path)
            pred = est.predict(image)
            cm.accumulate(pred, gt, spec.ignore_index)
            if args.save_masks:
                save_mask(Path(args.save_masks) / (img_path.stem + ".png"), pred)
            if args.overlays:
                save_overlay(Path(args.overlays) / (img_path.stem + ".png"),
                             image, pred, palette)
            if args.dump_attention:
                _dump_attention(est, image, Path(args.dump_attention) / (img_path.stem + "_attn.png"))
        except NasegError as e:
            raise NasegError(f"[segment stage] {img_path.name}: {e}") from e

    config = est.describe()
    config.update({
        "dataset": str(args.dataset),
        "ignore_index": spec.ignore_index,
        "include_background": spec.include_background,
        "limit": args.limit,
        "num_images": len(pairs),
    })
    report = miou(cm, spec.scored_class_mask(len(names)), config=config)
    payload = report.to_dict()
    payload["class_names"] = names
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(f"mIoU over {len(pairs)} images: {report.miou:.4f}", file=sys.stderr)
    return 0


def cmd_segment(args) -> int:
    classes_arg = args.classes
    if Path(classes_arg).exists():
        names = _read_lines(classes_arg)
    else:
        names = [c.strip() for c in classes_arg.split(",") if c.strip()]
    est = _estimator(args).fit(names)
    image = load_image(args.image)
    pred = est.predict(image)
    save_mask(args.out, pred)
    if args.overlay:
        palette = load_palette(args.palette) if args.palette else None
        save_overlay(args.overlay, image, pred, palette)
    if args.dump_attention:
        _dump_attention(est, image, Path(args.dump_attention))
    return 0


def cmd_validate_weights(args) -> int:
    archive = load_archive(args.weights)
    if args.model_config:
        vision_cfg, text_cfg = _load_model_config(args.model_config)
        label = args.model_config
    else:
        vision_cfg, text_cfg = vision_preset(args.preset), text_preset(args.preset)
        label = args.preset
    checked = validate(archive, full_manifest(vision_cfg, text_cfg))
    print(f"{args.weights}: {len(checked.tensors)} tensors match the {label} manifest")
    for extra in checked.extra_names:
        print(f"warning: extra tensor {extra!r}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="naseg",
                                     description="Training-free open-vocabulary segmentation")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate mIoU on an images/+masks/ dataset")
    _add_model_args(p_eval)
    p_eval.add_argument("--dataset", required=True, help="root with images/, masks/, classes.txt")
    p_eval.add_argument("--classes", help="override class-name file")
    p_eval.add_argument("--ignore-index", type=int, default=255)
    p_eval.add_argument("--no-background", action="store_true",
                        help="exclude class 0 from the mean IoU")
    p_eval.add_argument("--limit", type=int, help="evaluate only the first N images")
    p_eval.add_argument("--out", help="write metrics JSON here (default: stdout)")
    p_eval.add_argument("--save-masks", help="directory for predicted index masks")
    p_eval.add_argument("--overlays", help="directory for color overlays")
    p_eval.add_argument("--palette", help="palette file for overlays (R G B per line)")
    p_eval.add_argument("--dump-attention", help="directory for attention-map grids")
    p_eval.set_defaults(func=cmd_eval)

    p_seg = sub.add_parser("segment", help="segment one image")
    _add_model_args(p_seg)
    p_seg.add_argument("--image", required=True)
    p_seg.add_argument("--classes", required=True,
                       help="class-name file or comma-separated names")
    p_seg.add_argument("--out", required=True, help="output mask PNG")
    p_seg.add_argument("--overlay", help="also write a color overlay PNG")
    p_seg.add_argument("--palette", help="palette file for the overlay")
    p_seg.add_argument("--dump-attention", help="write the attention-map grid PNG here")
    p_seg.set_defaults(func=cmd_segment)

    p_val = sub.add_parser("validate-weights", help="check an archive against a preset manifest")
    p_val.add_argument("--weights", required=True)
    p_val.add_argument("--preset", default="b16", choices=("b16", "b32", "l14"))
    p_val.add_argument("--model-config", help="JSON file with custom vision/text configs")
    p_val.set_defaults(func=cmd_validate_weights)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NasegError as e:
        print(f"naseg: error: {e}", file=sys.stderr)
        return 1
    except FileNotFoundError as e:
        print(f"naseg: error: missing file: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
