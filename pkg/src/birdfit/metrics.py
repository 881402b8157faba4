"""Evaluation metrics: normalized RMS error of keypoint positions and velocities.

Residuals are normalized per frame by the longest side of that frame's
bounding box so birds at different scales compare fairly, then pooled into
a single RMS over all visible keypoints and frames.
"""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, MetricsError


def _check_inputs(projected, gt, bboxes, visible):
    proj = np.asarray(projected, dtype=np.float64)
    gtk = np.asarray(gt, dtype=np.float64)
    boxes = np.asarray(bboxes, dtype=np.float64)
    if proj.ndim != 3 or proj.shape[2] != 2:
        raise DimensionMismatchError("projected", "(T, K, 2)", proj.shape)
    if gtk.shape != proj.shape:
        raise DimensionMismatchError("gt", proj.shape, gtk.shape)
    if boxes.shape != (proj.shape[0], 4):
        raise DimensionMismatchError("bboxes", (proj.shape[0], 4), boxes.shape)
    if visible is None:
        vis = np.ones(proj.shape[:2], dtype=bool)
    else:
        vis = np.asarray(visible, dtype=bool)
        if vis.shape != proj.shape[:2]:
            raise DimensionMismatchError("visible", proj.shape[:2], vis.shape)
    return proj, gtk, boxes, vis


def _longest_sides(boxes: np.ndarray) -> np.ndarray:
    sides = np.maximum(boxes[:, 2] - boxes[:, 0], boxes[:, 3] - boxes[:, 1])
    if np.any(sides <= 0):
        raise MetricsError("bounding boxes must have positive extent")
    return sides


def me_p(
    projected: np.ndarray,
    gt: np.ndarray,
    bboxes: np.ndarray,
    visible: np.ndarray | None = None,
) -> float:
    """Normalized RMS position error of projected keypoints.

    Per visible keypoint: Euclidean residual divided by the frame's longest
    bbox side; the result is the RMS over all of them.

    Raises:
        MetricsError: no visible keypoints.
    """
    proj, gtk, boxes, vis = _check_inputs(projected, gt, bboxes, visible)
    if not vis.any():
        raise MetricsError("no visible keypoints")
    sides = _longest_sides(boxes)
    residual = np.linalg.norm(proj - gtk, axis=2) / sides[:, None]
    return float(np.sqrt(np.mean(residual[vis] ** 2)))


def me_v(
    projected: np.ndarray,
    gt: np.ndarray,
    bboxes: np.ndarray,
    visible: np.ndarray | None = None,
) -> float:
    """Normalized RMS velocity error of projected keypoints.

    Velocities are consecutive-frame differences; a pair contributes only
    when the keypoint is visible in both frames, and is normalized by the
    earlier frame's longest bbox side.

    Raises:
        MetricsError: fewer than 2 frames, or no valid velocity pairs.
    """
    proj, gtk, boxes, vis = _check_inputs(projected, gt, bboxes, visible)
    if proj.shape[0] < 2:
        raise MetricsError("me_v requires at least 2 frames")
    v_proj = proj[1:] - proj[:-1]
    v_gt = gtk[1:] - gtk[:-1]
    pair_vis = vis[1:] & vis[:-1]
    if not pair_vis.any():
        raise MetricsError("no visible keypoint pairs")
    sides = _longest_sides(boxes)[:-1]
    residual = np.linalg.norm(v_proj - v_gt, axis=2) / sides[:, None]
    return float(np.sqrt(np.mean(residual[pair_vis] ** 2)))


def pooled_rms(values_and_counts: list[tuple[float, int]]) -> float:
    """Combine per-track RMS values into one RMS weighted by sample count."""
    total = sum(c for _, c in values_and_counts)
    if total == 0:
        raise MetricsError("nothing to aggregate")
    return float(np.sqrt(sum(v * v * c for v, c in values_and_counts) / total))
