"""Command-line surface: synth, track, preprocess, fit, eval, grid, render.

Every subcommand reads defaults from one YAML config (``--config`` or
``$BIRDFIT_CONFIG``), exits nonzero on error, and prints a single-line
machine-parseable message to stderr when it fails.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, load_config
from .errors import BirdfitError
from .fitter import FitConfig, fit_track
from .grid import (
    crop_cameras,
    evaluate_tracks,
    load_dataset,
    load_grid_spec,
    paper_grid_spec,
    run_grid,
)
from .preprocess import normalize_crop
from .silhouette import silhouette_bbox
from .skeleton import default_bird_model, load_model, save_model
from .synthgen import MotionSpec, generate_trajectory
from .tracker import IouTracker
from .viz import render_overlay


def _add_config_arg(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--config", default=None, help="YAML config path (or set $BIRDFIT_CONFIG)"
    )


def _fit_overrides(args: argparse.Namespace, fit: FitConfig) -> FitConfig:
    updates = {}
    for name in (
        "window_size", "lambda_vel", "lambda_acc", "use_median_filter",
        "common_size", "stage1_iters", "stage2_iters", "learning_rate",
        "mask_downsample", "init_per_frame",
    ):
        value = getattr(args, name, None)
        if value is not None:
            updates[name] = value
    return dataclasses.replace(fit, **updates) if updates else fit


def _add_fit_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--window-size", type=int, dest="window_size")
    parser.add_argument("--lambda-vel", type=float, dest="lambda_vel")
    parser.add_argument("--lambda-acc", type=float, dest="lambda_acc")
    parser.add_argument(
        "--use-median-filter", action=argparse.BooleanOptionalAction, dest="use_median_filter"
    )
    parser.add_argument(
        "--common-size", action=argparse.BooleanOptionalAction, dest="common_size"
    )
    parser.add_argument("--stage1-iters", type=int, dest="stage1_iters")
    parser.add_argument("--stage2-iters", type=int, dest="stage2_iters")
    parser.add_argument("--learning-rate", type=float, dest="learning_rate")
    parser.add_argument("--mask-downsample", type=int, dest="mask_downsample")
    parser.add_argument(
        "--init-per-frame", action=argparse.BooleanOptionalAction, dest="init_per_frame"
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    camera = config.camera.build()
    model = load_model(args.model) if args.model else default_bird_model()
    frames = args.frames if args.frames is not None else config.synth.frames
    birds = args.birds if args.birds is not None else config.synth.birds
    seed = args.seed if args.seed is not None else config.synth.seed

    motion = config.synth.motion
    if args.noise_px is not None:
        motion = dataclasses.replace(motion, noise_px=args.noise_px)
    if args.outlier_prob is not None:
        motion = dataclasses.replace(motion, outlier_prob=args.outlier_prob)

    detections: dict[tuple[int, int], np.ndarray] = {}
    masks: dict[tuple[int, int], np.ndarray] = {}
    gt: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
    w, h = camera.image_size
    spread = 0.35 * min(w, h) * camera.fixed_depth / camera.focal
    for bird in range(birds):
        # Spread birds around the view so their tracks rarely collide.
        angle = 2.0 * np.pi * bird / max(1, birds)
        base = (spread * np.cos(angle), spread * np.sin(angle)) if birds > 1 else (0.0, 0.0)
        seq = generate_trajectory(
            model,
            camera,
            frames,
            dataclasses.replace(motion, base_kappa=base),
            seed=seed + bird,
        )
        for t, obs in enumerate(seq.observations):
            detections[(t, bird)] = obs.keypoints
            masks[(t, bird)] = obs.mask
            gt[(t, bird)] = (seq.keypoints[t], seq.visible[t])

    io.write_detections(out / "detections.csv", detections)
    io.write_masks_rle(out / "masks.jsonl", masks)
    io.write_ground_truth(out / "gt_keypoints.csv", gt)
    io.save_camera(out / "camera.yaml", camera)
    save_model(model, out / "model.yaml")
    print(f"wrote synthetic dataset: {birds} bird(s) x {frames} frames under {out}")
    return 0


def cmd_track(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    masks = io.read_masks(args.masks)
    frames: dict[int, list[tuple[np.ndarray, int]]] = {}
    for (frame, bird), mask in masks.items():
        box = silhouette_bbox(mask)
        if box is None:
            continue
        frames.setdefault(frame, []).append((box, bird))
    tracker = IouTracker(
        iou_threshold=args.iou_threshold or config.tracker.iou_threshold,
        memory=config.tracker.memory,
    )
    for frame in sorted(frames):
        dets = sorted(frames[frame], key=lambda d: d[1])
        tracker.associate(frame, [d[0] for d in dets], [d[1] for d in dets])
    tracks = tracker.close()
    rows = [
        (t.track_id, e.frame_index, int(e.ref), e.bbox)
        for t in tracks
        for e in t.entries
    ]
    io.write_tracks(args.out, rows)
    print(f"tracked {len(masks)} detections into {len(tracks)} track(s)")
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    pp = config.preprocess
    detections = io.read_detections(args.detections)
    masks = io.read_masks(args.masks)
    track_rows = io.read_tracks(args.tracks)
    out_dir = Path(args.out_dir) / "observations"
    out_dir.mkdir(parents=True, exist_ok=True)

    by_track: dict[int, list[tuple[int, int, np.ndarray]]] = {}
    for track_id, frame, bird, bbox in track_rows:
        by_track.setdefault(track_id, []).append((frame, bird, bbox))

    written = 0
    for track_id, entries in sorted(by_track.items()):
        observations, transforms, bird_ids = [], [], []
        for frame, bird, bbox in sorted(entries):
            key = (frame, bird)
            if key not in masks or key not in detections:
                continue
            crop = normalize_crop(
                bbox,
                masks[key],
                detections[key],
                frame_index=frame,
                bbox_pad=pp.bbox_pad,
                dilate_width=pp.dilate_width,
                crop_size=pp.crop_size,
            )
            if crop is None:
                continue
            observations.append(crop.observation)
            transforms.append(crop.transform)
            bird_ids.append(bird)
        if not observations:
            continue
        io.save_observations(
            out_dir / f"track_{track_id:03d}.npz",
            observations,
            transforms,
            track_id=track_id,
            bird_ids=np.array(bird_ids),
        )
        written += 1
    print(f"wrote {written} observation file(s) under {out_dir}")
    return 0


def cmd_fit(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    fit_cfg = _fit_overrides(args, config.fit)
    dataset = load_dataset(args.dataset)
    out_dir = Path(args.out_dir) if args.out_dir else dataset.root / "fits"
    out_dir.mkdir(parents=True, exist_ok=True)
    for track in dataset.tracks:
        cams = crop_cameras(dataset.camera, track.transforms)
        result = fit_track(dataset.model, cams, track.observations, fit_cfg, config.weights)
        io.save_fit_result(
            out_dir / f"fit_track_{track.track_id:03d}.npz",
            result,
            fit_cfg,
            track_id=track.track_id,
        )
        print(
            f"track {track.track_id}: {len(track.observations)} frames, "
            f"loss {result.diagnostics.initial_loss:.2f} -> {result.diagnostics.final_loss:.2f}"
        )
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    dataset = load_dataset(args.dataset)
    fits_dir = Path(args.fits) if args.fits else dataset.root / "fits"
    results, tracks = [], []
    for track in dataset.tracks:
        path = fits_dir / f"fit_track_{track.track_id:03d}.npz"
        if not path.exists():
            print(f"warning: no fit for track {track.track_id}, skipping", file=sys.stderr)
            continue
        result, _, _ = io.load_fit_result(path)
        results.append(result)
        tracks.append(track)
    per_track, aggregate = evaluate_tracks(
        results, tracks, dataset.gt, config.preprocess.crop_size
    )
    if not aggregate:
        raise BirdfitError("no evaluated tracks (missing fits or ground truth)")
    io.write_metrics_report(args.out, per_track, aggregate)
    print(f"me_p={aggregate['me_p']!r} me_v={aggregate['me_v']!r} tracks={aggregate['tracks']}")
    return 0


def cmd_grid(args: argparse.Namespace) -> int:
    config = load_config(args.config)
    spec = paper_grid_spec() if args.paper_grid else load_grid_spec(args.spec)
    rows = run_grid(
        args.dataset,
        spec,
        base_fit=config.fit,
        weights=config.weights,
        workers=args.workers,
    )
    io.write_grid_table(args.out, rows)
    ok = sum(1 for r in rows if r["status"] == "ok")
    print(f"grid finished: {ok}/{len(rows)} cells ok, table at {args.out}")
    return 0


def cmd_render(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset)
    by_id = {t.track_id: t for t in dataset.tracks}
    fit_path = Path(args.fit)
    result, _, track_id = io.load_fit_result(fit_path)
    if track_id not in by_id:
        raise BirdfitError(f"track {track_id} not found in dataset observations")
    track = by_id[track_id]
    written = render_overlay(
        result,
        track.transforms,
        dataset.model,
        dataset.camera,
        args.frames_dir,
        args.out_dir,
    )
    print(f"wrote {len(written)} overlay image(s) under {args.out_dir}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="birdfit",
        description="Temporally consistent 3D bird pose fitting from 2D detections",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--frames", type=int)
    p.add_argument("--birds", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--model", help="model YAML (default: built-in bird)")
    p.add_argument("--noise-px", type=float, dest="noise_px")
    p.add_argument("--outlier-prob", type=float, dest="outlier_prob")
    _add_config_arg(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("track", help="associate detections into tracks")
    p.add_argument("--masks", required=True, help="RLE .jsonl file or PNG directory")
    p.add_argument("--out", required=True)
    p.add_argument("--iou-threshold", type=float, dest="iou_threshold")
    _add_config_arg(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("preprocess", help="normalize per-track observation crops")
    p.add_argument("--detections", required=True)
    p.add_argument("--masks", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_config_arg(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("fit", help="fit the model to preprocessed tracks")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out-dir", dest="out_dir")
    _add_fit_args(p)
    _add_config_arg(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="evaluate fits against ground truth")
    p.add_argument("--dataset", required=True)
    p.add_argument("--fits")
    p.add_argument("--out", required=True)
    _add_config_arg(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("grid", help="run an experiment grid")
    p.add_argument("--dataset", required=True)
    p.add_argument("--spec")
    p.add_argument("--paper-grid", action="store_true", dest="paper_grid",
                   help="use the built-in 66-cell sweep")
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    _add_config_arg(p)
    p.set_defaults(func=cmd_grid)

    p = sub.add_parser("render", help="overlay fitted skeletons on frames")
    p.add_argument("--dataset", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--frames-dir", dest="frames_dir")
    p.add_argument("--out-dir", required=True, dest="out_dir")
    _add_config_arg(p)
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "grid" and not args.paper_grid and not args.spec:
        parser.error("grid requires --spec or --paper-grid")
    try:
        return args.func(args)
    except BirdfitError as exc:
        print(exc.oneline(), file=sys.stderr)
        return 1
    except (OSError, ValueError, KeyError) as exc:
        message = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {message}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
