"""Overlay rendering: projected skeleton and silhouette outline on frames."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw
from scipy import ndimage

from .fitter import FitResult
from .preprocess import CropTransform
from .silhouette import render_soft_silhouette
from .skeleton import Camera, SkeletonModel, forward_kinematics, project

_KP_COLOR = (255, 64, 64)
_BONE_COLOR = (64, 200, 255)
_OUTLINE_COLOR = (64, 255, 96)

FRAME_PATTERN = "frame_{:06d}.png"


def overlay_keypoints(result: FitResult, transforms: list[CropTransform]) -> np.ndarray:
    """Projected keypoints mapped back to original image pixels, (T, K, 2)."""
    return np.stack(
        [tr.invert(kp) for tr, kp in zip(transforms, result.projected_keypoints)]
    )


def _silhouette_outline(model, pose, camera) -> np.ndarray:
    soft = render_soft_silhouette(model, pose, camera).values > 0.5
    eroded = ndimage.binary_erosion(soft)
    return soft & ~eroded


def render_overlay(
    result: FitResult,
    transforms: list[CropTransform],
    model: SkeletonModel,
    camera: Camera,
    frames_dir: str | Path | None,
    output_dir: str | Path,
    frame_pattern: str = FRAME_PATTERN,
) -> list[Path]:
    """Draw skeleton and silhouette outline over each frame image.

    Frames are looked up as ``frames_dir/frame_pattern.format(frame_index)``;
    a missing file is skipped with a warning. Without a frames directory the
    overlay is drawn on a blank canvas. Returns the written paths.
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    keypoints = overlay_keypoints(result, transforms)
    for i, frame_index in enumerate(result.frame_indices):
        frame_index = int(frame_index)
        if frames_dir is not None:
            frame_path = Path(frames_dir) / frame_pattern.format(frame_index)
            if not frame_path.exists():
                print(f"warning: missing frame file {frame_path}, skipping", file=sys.stderr)
                continue
            image = Image.open(frame_path).convert("RGB")
        else:
            image = Image.new("RGB", camera.image_size, (32, 32, 32))
        draw = ImageDraw.Draw(image)
        pose = result.poses[i]
        transform = transforms[i]

        joints, _ = forward_kinematics(model, pose)
        joints_px = transform.invert(project(camera.crop_view(transform.scale, transform.offset), joints))
        parents = model.parents
        for j in range(1, model.num_joints):
            a = joints_px[parents[j]]
            b = joints_px[j]
            draw.line([tuple(a), tuple(b)], fill=_BONE_COLOR, width=2)

        outline = _silhouette_outline(model, pose, camera.crop_view(transform.scale, transform.offset))
        ys, xs = np.nonzero(outline)
        pts = transform.invert(np.column_stack([xs, ys]).astype(np.float64))
        for x, y in pts:
            draw.point((x, y), fill=_OUTLINE_COLOR)

        for x, y in keypoints[i]:
            draw.ellipse([x - 2, y - 2, x + 2, y + 2], outline=_KP_COLOR, width=1)

        out_path = output_dir / f"overlay_{frame_index:06d}.png"
        image.save(out_path)
        written.append(out_path)
    return written
