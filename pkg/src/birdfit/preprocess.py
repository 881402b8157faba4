"""Detection preprocessing: keypoint jitter filtering and crop normalization.

Raw per-frame detections (keypoints, segmentation mask, bounding box) are
turned into fixed-size observation crops: the box is padded, the mask
dilated to absorb segmentation error, and everything is mapped through one
recorded affine into a square 256x256 frame. A confidence-weighted median
filter over a short temporal window suppresses occasional misdetections.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatchError
from .losses import ObservationFrame

DEFAULT_BBOX_PAD = 40
DEFAULT_DILATE_WIDTH = 70
DEFAULT_CROP_SIZE = 256


def weighted_median(values: np.ndarray, weights: np.ndarray) -> float:
    """Value at which cumulative weight first reaches half the total.

    Ties take the lower sorted value. An all-zero weight vector falls back
    to equal weights (plain lower median).
    """
    values = np.asarray(values, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if values.shape != weights.shape or values.ndim != 1:
        raise DimensionMismatchError("weights", values.shape, weights.shape)
    total = weights.sum()
    if total <= 0:
        weights = np.ones_like(weights)
        total = weights.sum()
    order = np.argsort(values, kind="stable")
    csum = np.cumsum(weights[order])
    idx = int(np.searchsorted(csum, 0.5 * total, side="left"))
    return float(values[order[idx]])


def weighted_median_filter(track_keypoints: np.ndarray, window: int = 5) -> np.ndarray:
    """Filter a (T, K, 3) keypoint track with a confidence-weighted median.

    x and y are filtered independently over a centered window (truncated at
    the sequence ends); the output confidence is the center frame's input
    confidence. Output coordinates are always members of the input window.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 1, got {window}")
    kp = np.asarray(track_keypoints, dtype=np.float64)
    if kp.ndim != 3 or kp.shape[2] != 3:
        raise DimensionMismatchError("track_keypoints", "(T, K, 3)", kp.shape)
    if window == 1:
        return kp.copy()
    t = kp.shape[0]
    half = window // 2
    out = kp.copy()
    for i in range(t):
        lo, hi = max(0, i - half), min(t, i + half + 1)
        conf = kp[lo:hi, :, 2]
        for k in range(kp.shape[1]):
            out[i, k, 0] = weighted_median(kp[lo:hi, k, 0], conf[:, k])
            out[i, k, 1] = weighted_median(kp[lo:hi, k, 1], conf[:, k])
    return out


@dataclass(frozen=True)
class CropTransform:
    """Affine map into crop space: crop = (original - offset) * scale."""

    scale: float
    offset: tuple[float, float]

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return (pts - np.asarray(self.offset)) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return pts / self.scale + np.asarray(self.offset)

    @staticmethod
    def identity() -> "CropTransform":
        return CropTransform(scale=1.0, offset=(0.0, 0.0))


@dataclass(frozen=True, eq=False)
class CropResult:
    """normalize_crop output: the observation plus its recorded affine.

    ``dilated_mask`` is the padded/dilated region in crop space, kept for
    masking image pixels in visualizations; the observation's own mask is
    the undilated segmentation, which is the silhouette fitting target.
    """

    observation: ObservationFrame
    transform: CropTransform
    dilated_mask: np.ndarray


def _nearest_resize(arr: np.ndarray, out_size: int) -> np.ndarray:
    """Center-aligned nearest-neighbor resample of a square array."""
    s = arr.shape[0]
    idx = np.clip(np.rint((np.arange(out_size) + 0.5) * s / out_size - 0.5).astype(int), 0, s - 1)
    return arr[np.ix_(idx, idx)]


def normalize_crop(
    image_bbox: np.ndarray,
    mask: np.ndarray,
    keypoints: np.ndarray,
    frame_index: int = 0,
    bbox_pad: int = DEFAULT_BBOX_PAD,
    dilate_width: int = DEFAULT_DILATE_WIDTH,
    crop_size: int = DEFAULT_CROP_SIZE,
) -> CropResult | None:
    """Build a normalized square observation crop for one detection.

    The detection box is padded by ``bbox_pad`` pixels per side (clamped to
    the image), the mask is dilated with a ``dilate_width`` square element,
    and the padded box is centered in a square window that is rescaled to
    ``crop_size``. Keypoints travel through the same affine, which is
    returned for inverse mapping.

    Returns None when the mask is empty (frame flagged missing).
    """
    bbox = np.asarray(image_bbox, dtype=np.float64)
    if bbox.shape != (4,):
        raise DimensionMismatchError("image_bbox", (4,), bbox.shape)
    mask = np.asarray(mask)
    if mask.ndim != 2:
        raise DimensionMismatchError("mask", "(H, W)", mask.shape)
    kp = np.asarray(keypoints, dtype=np.float64)
    if kp.ndim != 2 or kp.shape[1] != 3:
        raise DimensionMismatchError("keypoints", "(K, 3)", kp.shape)

    binary = mask > 0
    if not binary.any():
        return None

    img_h, img_w = mask.shape
    x0 = max(0, int(np.floor(bbox[0])) - bbox_pad)
    y0 = max(0, int(np.floor(bbox[1])) - bbox_pad)
    x1 = min(img_w, int(np.ceil(bbox[2])) + bbox_pad)
    y1 = min(img_h, int(np.ceil(bbox[3])) + bbox_pad)
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"bbox {bbox.tolist()} does not intersect the image")

    dilated = ndimage.maximum_filter(
        binary.astype(np.uint8), size=dilate_width, mode="constant", cval=0
    )

    crop_mask = binary[y0:y1, x0:x1]
    crop_dilated = dilated[y0:y1, x0:x1]
    h, w = crop_mask.shape
    side = max(h, w)
    pad_x = (side - w) // 2
    pad_y = (side - h) // 2
    square = np.zeros((side, side), dtype=np.uint8)
    square[pad_y:pad_y + h, pad_x:pad_x + w] = crop_mask
    square_dilated = np.zeros((side, side), dtype=np.uint8)
    square_dilated[pad_y:pad_y + h, pad_x:pad_x + w] = crop_dilated

    scale = crop_size / side
    transform = CropTransform(scale=scale, offset=(x0 - pad_x, y0 - pad_y))
    out_mask = _nearest_resize(square, crop_size)
    out_dilated = _nearest_resize(square_dilated, crop_size)

    kp_out = kp.copy()
    kp_out[:, :2] = transform.apply(kp[:, :2])

    obs = ObservationFrame(
        keypoints=kp_out, mask=out_mask, bbox=bbox, frame_index=frame_index
    )
    return CropResult(observation=obs, transform=transform, dilated_mask=out_dilated)
