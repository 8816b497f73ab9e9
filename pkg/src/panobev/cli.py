"""Command-line interface.

Subcommands: remap-build, stitch, stats, gradcheck, train-toy, eval.
Flags use kebab-case.  Every flag of a subcommand may also be supplied
via --config (a JSON object keyed by flag name, without the leading
dashes); explicit command-line values win over the file.  Exit codes:
0 success, 1 validation failure, 2 IO failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

__all__ = ["main"]

GRADCHECK_TOLERANCE = 1e-4


class _Parser(argparse.ArgumentParser):
    """argparse variant whose usage errors exit with the validation code."""

    def error(self, message: str):  # noqa: D401 - argparse hook
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="panobev", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    rb = sub.add_parser("remap-build", help="resolve panorama pixels to rig cameras")
    rb.add_argument("--config", type=str)
    rb.add_argument("--rig", type=str)
    rb.add_argument("--out", type=str)
    rb.add_argument("--width", type=int)
    rb.add_argument("--height", type=int)
    rb.add_argument("--vfov-deg", type=float)
    rb.add_argument("--policy", choices=["nearest", "order"])
    rb.add_argument("--jobs", type=int)

    st = sub.add_parser("stitch", help="assemble a panorama from camera images")
    st.add_argument("--config", type=str)
    st.add_argument("--rig", type=str)
    st.add_argument("--remap", type=str)
    st.add_argument("--images", type=str)
    st.add_argument("--out", type=str)
    st.add_argument("--width", type=int)
    st.add_argument("--height", type=int)
    st.add_argument("--vfov-deg", type=float)
    st.add_argument("--policy", choices=["nearest", "order"])
    st.add_argument("--jobs", type=int)

    sa = sub.add_parser("stats", help="per-class pixel and presence ratios")
    sa.add_argument("--config", type=str)
    sa.add_argument("--labels", type=str)
    sa.add_argument("--classes", type=str)
    sa.add_argument("--out", type=str)
    sa.add_argument("--min-pixels", type=int)
    sa.add_argument("--apply-merges", action="store_true", default=None)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    gc.add_argument("--config", type=str)
    gc.add_argument("--seed", type=int)
    gc.add_argument("--eps", type=float)

    tt = sub.add_parser("train-toy", help="overfit the model on a synthetic set")
    tt.add_argument("--config", type=str)
    tt.add_argument("--steps", type=int)
    tt.add_argument("--seed", type=int)
    tt.add_argument("--lr", type=float)
    tt.add_argument("--samples", type=int)
    tt.add_argument("--out", type=str)

    ev = sub.add_parser("eval", help="mean IoU of predictions against references")
    ev.add_argument("--config", type=str)
    ev.add_argument("--pred", type=str)
    ev.add_argument("--gt", type=str)
    ev.add_argument("--classes", type=str)
    ev.add_argument("--out", type=str)
    return parser


_DEFAULTS: dict[str, dict] = {
    "remap-build": {
        "rig": None,
        "out": None,
        "width": 9600,
        "height": 600,
        "vfov_deg": 25.0,
        "policy": "nearest",
        "jobs": 1,
    },
    "stitch": {
        "rig": None,
        "remap": None,
        "images": None,
        "out": None,
        "width": 9600,
        "height": 600,
        "vfov_deg": 25.0,
        "policy": "nearest",
        "jobs": 1,
    },
    "stats": {
        "labels": None,
        "classes": None,
        "out": None,
        "min_pixels": 2,
        "apply_merges": False,
    },
    "gradcheck": {"seed": 0, "eps": 1e-5},
    "train-toy": {"steps": 500, "seed": 0, "lr": 4e-3, "samples": 8, "out": None},
    "eval": {"pred": None, "gt": None, "classes": None, "out": None},
}


def _effective_config(args: argparse.Namespace) -> dict:
    """defaults <- config file <- explicit command-line flags."""
    cfg = dict(_DEFAULTS[args.command])
    if args.config is not None:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ValueError(f"config file {args.config} must hold a JSON object")
        for key, value in doc.items():
            norm = key.replace("-", "_")
            if norm not in cfg:
                raise ValueError(
                    f"config key {key!r} is not a flag of {args.command}"
                )
            cfg[norm] = value
    for key in cfg:
        cli_value = getattr(args, key, None)
        if cli_value is not None:
            cfg[key] = cli_value
    return cfg


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        flags = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise ValueError(f"missing required flags: {flags}")


def _print_config(command: str, cfg: dict) -> None:
    print("effective-config: " + json.dumps({"command": command, **cfg}, sort_keys=True))


def _cmd_remap_build(cfg: dict) -> int:
    from .stitcher import build_remap_table, load_rig, save_remap

    _require(cfg, "rig", "out")
    cameras = load_rig(cfg["rig"])
    table = build_remap_table(
        cameras,
        height=cfg["height"],
        width=cfg["width"],
        v_half_fov=math.radians(cfg["vfov_deg"]),
        policy=cfg["policy"],
        jobs=cfg["jobs"],
    )
    save_remap(cfg["out"], table)
    invalid = int(np.count_nonzero(table.camera_id == -1))
    print(f"remap table {table.height}x{table.width} written to {cfg['out']} "
          f"({invalid} unresolved pixels)")
    return 0


def _cmd_stitch(cfg: dict) -> int:
    from .imageio import read_rgb, write_rgb
    from .stitcher import build_remap_table, load_remap, load_rig, stitch

    _require(cfg, "images", "out")
    if cfg["rig"] is None and cfg["remap"] is None:
        raise ValueError("stitch needs --rig or --remap")
    names: dict[int, str] = {}
    if cfg["rig"] is not None:
        cameras = load_rig(cfg["rig"])
        names = {c.order_index: c.name for c in cameras}
    if cfg["remap"] is not None:
        table = load_remap(cfg["remap"])
    else:
        table = build_remap_table(
            cameras,
            height=cfg["height"],
            width=cfg["width"],
            v_half_fov=math.radians(cfg["vfov_deg"]),
            policy=cfg["policy"],
            jobs=cfg["jobs"],
        )
    image_dir = Path(cfg["images"])
    ids = sorted(int(v) for v in np.unique(table.camera_id) if v != -1)
    images = {}
    for cam_id in ids:
        stem = names.get(cam_id, f"cam{cam_id}")
        path = image_dir / f"{stem}.png"
        if not path.exists():
            raise FileNotFoundError(
                f"missing image for camera {stem!r} (id {cam_id}): {path}"
            )
        images[cam_id] = read_rgb(path)
    pano = stitch(images, table, jobs=cfg["jobs"])
    write_rgb(cfg["out"], pano)
    print(f"panorama {pano.shape[0]}x{pano.shape[1]} written to {cfg['out']}")
    return 0


def _cmd_stats(cfg: dict) -> int:
    from .imageio import read_label
    from .stats import (
        apply_class_merges,
        load_class_table,
        stats_report,
        validate_raster,
        write_stats_csv,
    )

    _require(cfg, "labels", "classes", "out")
    table = load_class_table(cfg["classes"])
    label_dir = Path(cfg["labels"])
    files = sorted(label_dir.glob("*.png"))
    if not files:
        raise FileNotFoundError(f"no label rasters (*.png) found in {label_dir}")
    frames = []
    for path in files:
        arr = read_label(path)
        validate_raster(arr, table)
        frames.append(apply_class_merges(arr, table) if cfg["apply_merges"] else arr)
    rows = stats_report(frames, table, min_pixels=cfg["min_pixels"])
    write_stats_csv(cfg["out"], rows)
    for name, pix, pres in rows:
        print(f"{name}: pixel_ratio={pix:.6f} presence_ratio={pres:.6f}")
    print(f"report written to {cfg['out']}")
    return 0


def _cmd_gradcheck(cfg: dict) -> int:
    from .nn import grad_check_suite

    results = grad_check_suite(seed=cfg["seed"], eps=cfg["eps"])
    failed = []
    for name in sorted(results):
        err = results[name]
        status = "ok" if err <= GRADCHECK_TOLERANCE else "FAIL"
        print(f"{name}: max_rel_err={err:.3e} [{status}]")
        if err > GRADCHECK_TOLERANCE:
            failed.append(name)
    if failed:
        print(f"gradient check failed for: {', '.join(failed)}")
        return 1
    print(f"all {len(results)} gradient checks passed (tolerance {GRADCHECK_TOLERANCE:g})")
    return 0


def _toy_config(seed: int):
    from .model import ModelConfig

    return ModelConfig(
        emb_dims=16,
        layers=1,
        locs=4,
        points=16,
        scan_depth=1,
        query_h=8,
        query_w=8,
        out_h=16,
        out_w=16,
        num_classes=4,
        state_dim=4,
        seed=seed,
    )


def _cmd_train_toy(cfg: dict) -> int:
    from .model import init_params
    from .nn import save_checkpoint
    from .synthetic import toy_dataset
    from .train import train_toy

    mcfg = _toy_config(cfg["seed"])
    dataset = toy_dataset(
        cfg["samples"], mcfg.num_classes, mcfg.out_h, mcfg.out_w, seed=cfg["seed"]
    )
    params = init_params(mcfg)

    def log(step: int, loss: float, lr: float) -> None:
        print(f"step {step}: loss={loss:.5f} lr={lr:.2e}")

    result = train_toy(
        params,
        dataset,
        mcfg,
        steps=cfg["steps"],
        base_lr=cfg["lr"],
        warmup_steps=min(50, cfg["steps"] // 10),
        on_log=log,
    )
    print(f"final train mIoU: {result.final_miou:.4f}")
    if cfg["out"] is not None:
        save_checkpoint(cfg["out"], result.params, config=mcfg.__dict__)
        print(f"checkpoint written to {cfg['out']}")
    return 0


def _cmd_eval(cfg: dict) -> int:
    from .imageio import read_label
    from .metrics import ConfusionAccumulator, miou, write_iou_csv
    from .stats import load_class_table, validate_raster

    _require(cfg, "pred", "gt", "classes")
    table = load_class_table(cfg["classes"])
    pred_dir, gt_dir = Path(cfg["pred"]), Path(cfg["gt"])
    gt_files = sorted(gt_dir.glob("*.png"))
    if not gt_files:
        raise FileNotFoundError(f"no label rasters (*.png) found in {gt_dir}")
    acc = ConfusionAccumulator(class_ids=tuple(table.indices))
    for gt_path in gt_files:
        pred_path = pred_dir / gt_path.name
        if not pred_path.exists():
            raise FileNotFoundError(f"missing prediction for {gt_path.name}: {pred_path}")
        gt = read_label(gt_path)
        pred = read_label(pred_path)
        validate_raster(gt, table)
        acc.add(pred, gt)
    per_class = acc.iou_per_class()
    mean_value = miou(acc)
    rows = []
    for idx in table.indices:
        value = per_class[idx]
        rows.append((table.name(idx), value))
        shown = "undefined" if value is None else f"{value:.6f}"
        print(f"{table.name(idx)}: iou={shown}")
    print(f"mIoU: {mean_value:.6f}")
    if cfg["out"] is not None:
        write_iou_csv(cfg["out"], rows, mean_value)
        print(f"report written to {cfg['out']}")
    return 0


_HANDLERS = {
    "remap-build": _cmd_remap_build,
    "stitch": _cmd_stitch,
    "stats": _cmd_stats,
    "gradcheck": _cmd_gradcheck,
    "train-toy": _cmd_train_toy,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _effective_config(args)
        _print_config(args.command, cfg)
        return _HANDLERS[args.command](cfg)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return code
    except (FileNotFoundError, IsADirectoryError, PermissionError, OSError) as exc:
        print(f"panobev: io error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, RuntimeError, FloatingPointError) as exc:
        print(f"panobev: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
