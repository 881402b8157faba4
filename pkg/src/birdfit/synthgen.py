"""Synthetic ground-truth trajectories and corrupted observations.

The generator drives every pose parameter with a band-limited random walk
(cumulative Gaussian steps, low-pass filtered), renders exact keypoints and
silhouette masks from the ground-truth poses, then corrupts the keypoints
with Gaussian noise and sporadic low-confidence outliers. It is the
verification oracle for the temporal fitting pipeline: every corrupted
observation has a known clean counterpart.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from scipy import ndimage

from .errors import InvalidSpecError
from .losses import ObservationFrame
from .silhouette import DEFAULT_SHARPNESS, render_batch, silhouette_bbox
from .skeleton import (
    DTYPE,
    Camera,
    PoseParams,
    SkeletonModel,
    camera_tensors,
    forward_kinematics_batch,
    model_tensors,
    project_batch,
    scale_camera_tensors,
)


@dataclass
class MotionSpec:
    """Parameters of the synthetic motion and observation corruption.

    Step sizes are per-frame standard deviations of the random-walk
    increments before low-pass filtering; kappa steps are in model units,
    angle steps in radians. Noise and outlier magnitudes are in pixels.
    """

    kappa_step: float = 0.02
    yaw_step: float = 0.03
    tilt_step: float = 0.008
    theta_p_step: float = 0.015
    smooth_frames: float = 3.0
    sigma_range: tuple[float, float] = (0.9, 1.1)
    base_kappa: tuple[float, float] = (0.0, 0.0)
    base_yaw: float | None = None  # None: drawn uniformly from [0, 2pi)
    noise_px: float = 0.0
    outlier_prob: float = 0.0
    outlier_px: tuple[float, float] = (15.0, 40.0)
    outlier_conf: tuple[float, float] = (0.05, 0.30)
    inlier_conf: tuple[float, float] = (0.75, 0.99)
    mask_resolution: tuple[int, int] | None = None  # None: camera image size
    mask_sharpness: float = DEFAULT_SHARPNESS

    def __post_init__(self):
        for name in ("kappa_step", "yaw_step", "tilt_step", "theta_p_step",
                     "smooth_frames", "noise_px"):
            if getattr(self, name) < 0:
                raise InvalidSpecError(f"{name} must be >= 0")
        if not 0.0 <= self.outlier_prob <= 1.0:
            raise InvalidSpecError("outlier_prob must be in [0, 1]")
        for name in ("sigma_range", "outlier_px", "outlier_conf", "inlier_conf"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise InvalidSpecError(f"{name} must be (lo, hi) with lo <= hi")
        if self.sigma_range[0] <= 0:
            raise InvalidSpecError("sigma_range must be positive")
        for name in ("outlier_conf", "inlier_conf"):
            lo, hi = getattr(self, name)
            if lo < 0 or hi > 1:
                raise InvalidSpecError(f"{name} must lie within [0, 1]")


@dataclass(frozen=True, eq=False)
class SynthSequence:
    """Ground truth plus corrupted observations for one synthetic bird."""

    poses: list[PoseParams]
    keypoints: np.ndarray            # (T, K, 2) exact projections
    visible: np.ndarray              # (T, K) bool, all True here
    observations: list[ObservationFrame]
    bboxes: np.ndarray               # (T, 4) tight ground-truth mask boxes
    outliers: np.ndarray             # (T, K) bool, injected outlier flags


def _band_limited_walk(
    rng: np.random.Generator, frames: int, dims: int, step: float, smooth: float
) -> np.ndarray:
    """Cumulative Gaussian steps, Gaussian low-pass filtered along time."""
    if step == 0.0:
        return np.zeros((frames, dims))
    walk = np.cumsum(rng.normal(0.0, step, size=(frames, dims)), axis=0)
    if smooth > 0:
        walk = ndimage.gaussian_filter1d(walk, sigma=smooth, axis=0, mode="nearest")
    return walk - walk[0]


def generate_trajectory(
    model: SkeletonModel,
    camera: Camera,
    frames: int,
    spec: MotionSpec | None = None,
    seed: int = 0,
) -> SynthSequence:
    """Generate a ground-truth pose sequence and its corrupted observations.

    With zero noise and zero outlier probability the observed keypoints are
    exactly the projected ground truth. Fully reproducible from the seed.
    """
    if frames < 1:
        raise InvalidSpecError(f"frames must be >= 1, got {frames}")
    spec = spec or MotionSpec()
    rng = np.random.default_rng(seed)

    sigma = float(rng.uniform(*spec.sigma_range))
    base_yaw = float(rng.uniform(0.0, 2.0 * np.pi)) if spec.base_yaw is None else spec.base_yaw

    kappa = np.asarray(spec.base_kappa, dtype=np.float64) + _band_limited_walk(
        rng, frames, 2, spec.kappa_step, spec.smooth_frames
    )
    yaw = base_yaw + _band_limited_walk(rng, frames, 1, spec.yaw_step, spec.smooth_frames)[:, 0]
    tilt = _band_limited_walk(rng, frames, 2, spec.tilt_step, spec.smooth_frames)
    theta_g = np.column_stack([tilt, yaw])
    theta_p = model.pose_prior_mean + _band_limited_walk(
        rng, frames, model.pose_dim, spec.theta_p_step, spec.smooth_frames
    )

    poses = [
        PoseParams(kappa=kappa[t], sigma=sigma, theta_g=theta_g[t], theta_p=theta_p[t])
        for t in range(frames)
    ]

    mt = model_tensors(model)
    ct = camera_tensors(camera)
    kappa_t = torch.as_tensor(kappa, dtype=DTYPE)
    sigma_t = torch.full((frames,), sigma, dtype=DTYPE)
    tg_t = torch.as_tensor(theta_g, dtype=DTYPE)
    tp_t = torch.as_tensor(theta_p, dtype=DTYPE)
    w, h = camera.image_size
    resolution = spec.mask_resolution or (h, w)
    mask_scale = resolution[1] / w
    if abs(resolution[0] / h - mask_scale) > 1e-12:
        raise InvalidSpecError("mask_resolution must rescale the image uniformly")
    with torch.no_grad():
        _, kp3d = forward_kinematics_batch(mt, kappa_t, sigma_t, tg_t, tp_t)
        keypoints = project_batch(ct, kp3d).numpy()
        soft = render_batch(
            mt,
            scale_camera_tensors(ct, mask_scale),
            kappa_t,
            sigma_t,
            tg_t,
            tp_t,
            spec.mask_sharpness / mask_scale,
            resolution,
        ).numpy()
    masks = (soft > 0.5).astype(np.uint8)

    num_kp = model.num_keypoints
    observed = keypoints.copy()
    if spec.noise_px > 0:
        observed += rng.normal(0.0, spec.noise_px, size=observed.shape)
    conf = rng.uniform(*spec.inlier_conf, size=(frames, num_kp))
    outliers = rng.random((frames, num_kp)) < spec.outlier_prob
    if outliers.any():
        n = int(outliers.sum())
        angle = rng.uniform(0.0, 2.0 * np.pi, size=n)
        mag = rng.uniform(*spec.outlier_px, size=n)
        observed[outliers] += np.column_stack([mag * np.cos(angle), mag * np.sin(angle)])
        conf[outliers] = rng.uniform(*spec.outlier_conf, size=n)

    observations = []
    bboxes = np.zeros((frames, 4))
    for t in range(frames):
        box = silhouette_bbox(masks[t])
        if box is None:
            # Bird left the frame; fall back to the full image so downstream
            # normalization stays defined.
            box = np.array([0.0, 0.0, float(resolution[1]), float(resolution[0])])
        box = box / mask_scale
        bboxes[t] = box
        observations.append(
            ObservationFrame(
                keypoints=np.column_stack([observed[t], conf[t]]),
                mask=masks[t],
                bbox=box,
                frame_index=t,
            )
        )

    return SynthSequence(
        poses=poses,
        keypoints=keypoints,
        visible=np.ones((frames, num_kp), dtype=bool),
        observations=observations,
        bboxes=bboxes,
        outliers=outliers,
    )
