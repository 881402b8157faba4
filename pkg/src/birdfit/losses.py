"""Energy terms of the fitting objective and their combination.

The frame-wise objective is a confidence-weighted Geman-McLure keypoint
reprojection error, an L1 silhouette error against the predicted mask, and
a squared-Mahalanobis body-pose prior. Temporal consistency adds two
sequence terms penalizing the L2 norms of consecutive pose differences
(velocity) and of consecutive velocity differences (acceleration), with
separate weights for the global orientation and the body pose.

Everything is built from torch ops so the combined objective is
differentiable end to end; the public functions accept numpy arrays and
return python floats.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import torch

from .errors import DimensionMismatchError
from .silhouette import DEFAULT_SHARPNESS, SoftSilhouette, render_batch
from .skeleton import (
    DTYPE,
    Camera,
    CameraTensors,
    ModelTensors,
    PoseParams,
    SkeletonModel,
    camera_tensors,
    forward_kinematics_batch,
    model_tensors,
    project_batch,
    scale_camera_tensors,
)

# Smoothing floor for the temporal L2 norms: sqrt(|d|^2 + eps^2) keeps the
# gradient finite at zero difference without visibly changing the value.
NORM_EPS = 1e-8


@dataclass
class LossWeights:
    """Weights of the combined objective.

    gm_sigma is the Geman-McLure scale in pixels; beta_g / beta_p weight the
    global-orientation and body-pose parts of the temporal terms.
    """

    lambda_kpt: float = 1.0
    lambda_msk: float = 1.0
    lambda_pp: float = 100.0
    lambda_vel: float = 0.0
    lambda_acc: float = 0.0
    beta_g: float = 10.0
    beta_p: float = 1.0
    gm_sigma: float = 50.0

    def __post_init__(self):
        for name in ("lambda_kpt", "lambda_msk", "lambda_pp", "lambda_vel",
                     "lambda_acc", "beta_g", "beta_p"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not self.gm_sigma > 0:
            raise ValueError("gm_sigma must be > 0")


@dataclass(frozen=True, eq=False)
class ObservationFrame:
    """Detections for one bird in one frame, in normalized crop space.

    Attributes:
        keypoints: (K, 3) columns x, y, confidence; confidence in [0, 1].
        mask: (H, W) binary segmentation target.
        bbox: (4,) x0, y0, x1, y1 of the detection in original image pixels.
        frame_index: source frame number.
    """

    keypoints: np.ndarray
    mask: np.ndarray
    bbox: np.ndarray
    frame_index: int = 0

    def __post_init__(self):
        kp = np.asarray(self.keypoints, dtype=np.float64)
        if kp.ndim != 2 or kp.shape[1] != 3:
            raise DimensionMismatchError("keypoints", "(K, 3)", kp.shape)
        conf = kp[:, 2]
        if np.any(conf < 0) or np.any(conf > 1):
            raise ValueError("keypoint confidences must lie in [0, 1]")
        mask = np.asarray(self.mask)
        if mask.ndim != 2:
            raise DimensionMismatchError("mask", "(H, W)", mask.shape)
        bbox = np.asarray(self.bbox, dtype=np.float64)
        if bbox.shape != (4,):
            raise DimensionMismatchError("bbox", (4,), bbox.shape)
        if not (bbox[2] > bbox[0] and bbox[3] > bbox[1]):
            raise ValueError(f"bbox must be well-ordered, got {bbox.tolist()}")
        object.__setattr__(self, "keypoints", kp)
        object.__setattr__(self, "mask", (mask > 0).astype(np.float64))
        object.__setattr__(self, "bbox", bbox)
        object.__setattr__(self, "frame_index", int(self.frame_index))


@dataclass(frozen=True)
class PoseGradient:
    """Gradient of the objective w.r.t. one frame's pose parameters."""

    kappa: np.ndarray
    sigma: float
    theta_g: np.ndarray
    theta_p: np.ndarray


# ---------------------------------------------------------------------------
# torch building blocks (batched over frames)
# ---------------------------------------------------------------------------

def geman_mclure(r2: torch.Tensor, gm_sigma: float) -> torch.Tensor:
    """sigma^2 r^2 / (sigma^2 + r^2), applied to squared residuals."""
    s2 = gm_sigma * gm_sigma
    return s2 * r2 / (s2 + r2)


def keypoint_energy(
    projected: torch.Tensor,  # (T, K, 2)
    observed: torch.Tensor,   # (T, K, 2)
    confidence: torch.Tensor, # (T, K)
    gm_sigma: float,
) -> torch.Tensor:
    """Per-frame keypoint reprojection energy, shape (T,)."""
    r2 = ((projected - observed) ** 2).sum(dim=-1)
    return (confidence * geman_mclure(r2, gm_sigma)).sum(dim=-1)


def prior_energy(theta_p: torch.Tensor, mt: ModelTensors) -> torch.Tensor:
    """Per-frame squared Mahalanobis distance to the prior mean, shape (T,)."""
    d = theta_p - mt.prior_mean
    return ((d @ mt.prior_cov_inv) * d).sum(dim=-1)


def mask_energy(rendered: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Per-frame mean absolute silhouette difference, shape (T,)."""
    return (rendered - target).abs().mean(dim=(-2, -1))


def smooth_norm(x: torch.Tensor, eps: float = NORM_EPS) -> torch.Tensor:
    """Epsilon-smoothed L2 norm over the last axis."""
    return torch.sqrt((x * x).sum(dim=-1) + eps * eps)


def velocity_energy(
    theta_g: torch.Tensor, theta_p: torch.Tensor, beta_g: float, beta_p: float
) -> torch.Tensor:
    """Sum of consecutive pose-difference norms; zero tensor if < 2 frames."""
    if theta_g.shape[0] < 2:
        return torch.zeros((), dtype=theta_g.dtype)
    dg = theta_g[1:] - theta_g[:-1]
    dp = theta_p[1:] - theta_p[:-1]
    return beta_g * smooth_norm(dg).sum() + beta_p * smooth_norm(dp).sum()


def acceleration_energy(
    theta_g: torch.Tensor, theta_p: torch.Tensor, beta_g: float, beta_p: float
) -> torch.Tensor:
    """Velocity term applied to consecutive velocity differences."""
    if theta_g.shape[0] < 3:
        return torch.zeros((), dtype=theta_g.dtype)
    return velocity_energy(
        theta_g[1:] - theta_g[:-1], theta_p[1:] - theta_p[:-1], beta_g, beta_p
    )


def frame_energies(
    mt: ModelTensors,
    ct: CameraTensors,
    kappa: torch.Tensor,
    sigma: torch.Tensor,
    theta_g: torch.Tensor,
    theta_p: torch.Tensor,
    observed_xy: torch.Tensor,
    confidence: torch.Tensor,
    weights: LossWeights,
) -> torch.Tensor:
    """lambda_kpt * E_kpt + lambda_pp * E_pp per frame, shape (T,)."""
    _, keypoints = forward_kinematics_batch(mt, kappa, sigma, theta_g, theta_p)
    projected = project_batch(ct, keypoints)
    e_kpt = keypoint_energy(projected, observed_xy, confidence, weights.gm_sigma)
    e_pp = prior_energy(theta_p, mt)
    return weights.lambda_kpt * e_kpt + weights.lambda_pp * e_pp


def mask_view(
    ct: CameraTensors,
    image_size: tuple[int, int],
    mask_resolution: tuple[int, int],
    sharpness: float,
) -> tuple[CameraTensors, float]:
    """Camera and sharpness adjusted for masks on a rescaled pixel grid.

    Mask targets may live at a lower resolution than the keypoint space;
    the render then uses a uniformly scaled camera and a sharpness kept
    constant in original pixels.
    """
    w, h = image_size
    scale = mask_resolution[1] / w
    if abs(mask_resolution[0] / h - scale) > 1e-9:
        raise DimensionMismatchError(
            "mask", f"uniform rescale of {(h, w)}", mask_resolution
        )
    if scale == 1.0:
        return ct, sharpness
    return scale_camera_tensors(ct, scale), sharpness / scale


def masks_energy(
    mt: ModelTensors,
    ct: CameraTensors,
    kappa: torch.Tensor,
    sigma: torch.Tensor,
    theta_g: torch.Tensor,
    theta_p: torch.Tensor,
    target_masks: torch.Tensor,
    sharpness: float = DEFAULT_SHARPNESS,
    grid: torch.Tensor | None = None,
) -> torch.Tensor:
    """Per-frame L1 silhouette energy against binary targets, shape (T,).

    ``ct`` must already be expressed in the mask pixel grid (see mask_view).
    """
    resolution = tuple(target_masks.shape[-2:])
    rendered = render_batch(
        mt, ct, kappa, sigma, theta_g, theta_p, sharpness, resolution, grid
    )
    return mask_energy(rendered, target_masks)


# ---------------------------------------------------------------------------
# public single-call losses
# ---------------------------------------------------------------------------

def keypoint_loss(projected: np.ndarray, obs: ObservationFrame, gm_sigma: float = 50.0) -> float:
    """Confidence-weighted Geman-McLure reprojection error of one frame.

    Each term is c_i * sigma^2 r_i^2 / (sigma^2 + r_i^2) with r_i the
    Euclidean reprojection residual; bounded by c_i * sigma^2.
    """
    proj = np.asarray(projected, dtype=np.float64)
    k = obs.keypoints.shape[0]
    if proj.shape != (k, 2):
        raise DimensionMismatchError("projected", (k, 2), proj.shape)
    p = torch.as_tensor(proj).unsqueeze(0)
    xy = torch.as_tensor(obs.keypoints[:, :2]).unsqueeze(0)
    conf = torch.as_tensor(obs.keypoints[:, 2]).unsqueeze(0)
    return float(keypoint_energy(p, xy, conf, gm_sigma)[0])


def mask_loss(rendered: SoftSilhouette | np.ndarray, target: np.ndarray) -> float:
    """Mean absolute per-pixel difference between silhouettes, in [0, 1]."""
    values = rendered.values if isinstance(rendered, SoftSilhouette) else np.asarray(rendered)
    tgt = np.asarray(target, dtype=np.float64)
    if values.shape != tgt.shape:
        raise DimensionMismatchError("target", values.shape, tgt.shape)
    return float(np.abs(values - tgt).mean())


def pose_prior_loss(theta_p: np.ndarray, model: SkeletonModel) -> float:
    """Squared Mahalanobis distance of the body pose to the prior mean."""
    tp = np.asarray(theta_p, dtype=np.float64)
    if tp.shape != (model.pose_dim,):
        raise DimensionMismatchError("theta_p", (model.pose_dim,), tp.shape)
    return float(prior_energy(torch.as_tensor(tp).unsqueeze(0), model_tensors(model))[0])


def _stack_thetas(poses: Sequence[PoseParams]) -> tuple[torch.Tensor, torch.Tensor]:
    theta_g = torch.as_tensor(np.stack([p.theta_g for p in poses]), dtype=DTYPE)
    theta_p = torch.as_tensor(np.stack([p.theta_p for p in poses]), dtype=DTYPE)
    return theta_g, theta_p


def velocity_loss(poses: Sequence[PoseParams], beta_g: float = 10.0, beta_p: float = 1.0) -> float:
    """Temporal velocity energy of a pose sequence; 0 for fewer than 2 frames."""
    if len(poses) < 2:
        return 0.0
    theta_g, theta_p = _stack_thetas(poses)
    return float(velocity_energy(theta_g, theta_p, beta_g, beta_p))


def acceleration_loss(
    poses: Sequence[PoseParams], beta_g: float = 10.0, beta_p: float = 1.0
) -> float:
    """Temporal acceleration energy of a pose sequence; 0 for fewer than 3 frames."""
    if len(poses) < 3:
        return 0.0
    theta_g, theta_p = _stack_thetas(poses)
    return float(acceleration_energy(theta_g, theta_p, beta_g, beta_p))


@dataclass
class ObjectiveValue:
    """total_objective result: scalar value, per-frame gradients, term values."""

    value: float
    gradients: list[PoseGradient]
    terms: dict = field(default_factory=dict)


def stack_observations(
    observations: Sequence[ObservationFrame],
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor]:
    """(observed_xy (T,K,2), confidence (T,K), masks (T,H,W)) torch tensors."""
    kp = np.stack([o.keypoints for o in observations])
    masks = np.stack([o.mask for o in observations])
    return (
        torch.as_tensor(kp[:, :, :2], dtype=DTYPE),
        torch.as_tensor(kp[:, :, 2], dtype=DTYPE),
        torch.as_tensor(masks, dtype=DTYPE),
    )


def total_objective(
    poses: Sequence[PoseParams],
    observations: Sequence[ObservationFrame],
    model: SkeletonModel,
    camera: Camera | Sequence[Camera],
    weights: LossWeights,
    stage: int = 2,
    sharpness: float = DEFAULT_SHARPNESS,
) -> ObjectiveValue:
    """Combined objective over a window and its exact gradient.

    E = sum_frames(lambda_kpt E_kpt + [stage 2] lambda_msk E_msk
    + lambda_pp E_pp) + lambda_vel E_vel + lambda_acc E_acc. Stage 1 drops
    the silhouette term; stage 2 includes it.
    """
    if stage not in (1, 2):
        raise ValueError(f"stage must be 1 or 2, got {stage}")
    if len(poses) != len(observations):
        raise DimensionMismatchError("observations", len(poses), len(observations))
    if not poses:
        raise ValueError("at least one frame is required")

    mt = model_tensors(model)
    ct = camera_tensors(camera)
    kappa = torch.as_tensor(np.stack([p.kappa for p in poses]), dtype=DTYPE)
    sigma = torch.as_tensor(np.array([p.sigma for p in poses]), dtype=DTYPE)
    theta_g, theta_p = _stack_thetas(poses)
    for t in (kappa, sigma, theta_g, theta_p):
        t.requires_grad_(True)

    observed_xy, confidence, masks = stack_observations(observations)
    terms: dict[str, float] = {}

    frames = frame_energies(mt, ct, kappa, sigma, theta_g, theta_p, observed_xy, confidence, weights)
    total = frames.sum()
    if stage == 2 and weights.lambda_msk > 0:
        cam0 = camera if isinstance(camera, Camera) else camera[0]
        mask_ct, mask_sharp = mask_view(
            ct, cam0.image_size, tuple(masks.shape[-2:]), sharpness
        )
        e_msk = masks_energy(mt, mask_ct, kappa, sigma, theta_g, theta_p, masks, mask_sharp)
        terms["mask"] = float(e_msk.sum().detach())
        total = total + weights.lambda_msk * e_msk.sum()
    e_vel = velocity_energy(theta_g, theta_p, weights.beta_g, weights.beta_p)
    e_acc = acceleration_energy(theta_g, theta_p, weights.beta_g, weights.beta_p)
    total = total + weights.lambda_vel * e_vel + weights.lambda_acc * e_acc
    terms["frames"] = float(frames.sum().detach())
    terms["velocity"] = float(e_vel.detach())
    terms["acceleration"] = float(e_acc.detach())

    total.backward()
    grads = [
        PoseGradient(
            kappa=kappa.grad[i].numpy().copy(),
            sigma=float(sigma.grad[i]),
            theta_g=theta_g.grad[i].numpy().copy(),
            theta_p=theta_p.grad[i].numpy().copy(),
        )
        for i in range(len(poses))
    ]
    return ObjectiveValue(value=float(total), gradients=grads, terms=terms)
