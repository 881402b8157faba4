"""Differentiable soft silhouette of the posed skeleton.

Each bone is rendered as a 2D capsule (projected segment plus a
depth-scaled radius); per-pixel occupancy is a sigmoid of the signed
distance to the capsule and bones combine with a probabilistic OR. The
result is smooth in every pose parameter, which is all the mask loss needs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

from .errors import DimensionMismatchError
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
)

# Sigmoid slope in 1/pixels; 2.0 puts the 0.1..0.9 transition band at
# roughly two pixels on a 256x256 grid.
DEFAULT_SHARPNESS = 2.0

_ZERO_LENGTH_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class SoftSilhouette:
    """Occupancy grid in [0, 1], row-major (values[y, x])."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DimensionMismatchError("values", "(H, W)", vals.shape)
        object.__setattr__(self, "values", vals)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.values.shape  # (H, W)

    def to_image(self) -> np.ndarray:
        """8-bit grayscale rendering of the occupancy grid."""
        return np.clip(np.rint(self.values * 255.0), 0, 255).astype(np.uint8)


def pixel_grid(resolution: tuple[int, int], dtype: torch.dtype = DTYPE) -> torch.Tensor:
    """(2, H*W) pixel x and y coordinates, x fastest, matching values[y, x]."""
    h, w = resolution
    ys = torch.arange(h, dtype=dtype)
    xs = torch.arange(w, dtype=dtype)
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    return torch.stack([gx.reshape(-1), gy.reshape(-1)])

# Sigmoid arguments are capped here so occupancies stay strictly inside
# (0, 1); keeps the union product and its gradient finite, changes values
# by < 5e-15.
_SIGMOID_ARG_CAP = 33.0


class _CapsuleProbs(torch.autograd.Function):
    """Per-bone occupancy sigmoid(sharpness * (radius - dist_to_segment)).

    Hand-written backward: by the envelope theorem the clamped segment
    parameter can be treated as constant, so the distance gradient w.r.t.
    the endpoints is exact and cheap. This runs every optimizer iteration
    over (frames x bones x pixels); the stock autograd chain through the
    same math moves several times more memory.
    """

    @staticmethod
    def forward(ctx, ax, ay, bx, by, radius, qx, qy, sharpness):
        # ax..radius: (T, B); qx, qy: (P,)
        abx = bx - ax
        aby = by - ay
        denom = (abx * abx + aby * aby).clamp_min(_ZERO_LENGTH_EPS).unsqueeze(-1)
        aqx = qx - ax.unsqueeze(-1)   # (T, B, P)
        aqy = qy - ay.unsqueeze(-1)
        tt = aqx * abx.unsqueeze(-1)
        tt += aqy * aby.unsqueeze(-1)
        tt /= denom
        tt.clamp_(0.0, 1.0)
        dx = aqx.sub_(tt * abx.unsqueeze(-1))  # reuses aqx storage
        dy = aqy.sub_(tt * aby.unsqueeze(-1))
        dist = dx * dx
        dist += dy * dy
        dist.clamp_(min=1e-30).sqrt_()
        arg = radius.unsqueeze(-1) - dist
        arg *= sharpness
        arg.clamp_(min=-_SIGMOID_ARG_CAP, max=_SIGMOID_ARG_CAP)
        p = torch.sigmoid(arg)
        ctx.save_for_backward(tt, dx, dy, dist, p)
        ctx.sharpness = sharpness
        return p

    @staticmethod
    def backward(ctx, grad_p):
        tt, dx, dy, dist, p = ctx.saved_tensors
        s = ctx.sharpness
        gdist = grad_p * (p * (1.0 - p))
        gdist *= -s                       # d p / d dist
        grad_radius = -gdist.sum(-1)      # d p / d radius = +s p (1 - p)
        inv = 1.0 / dist
        cx = gdist * dx
        cx *= inv
        cy = gdist * dy
        cy *= inv
        tm1 = tt - 1.0
        gax = (cx * tm1).sum(-1)
        gay = (cy * tm1).sum(-1)
        gbx = -(cx * tt).sum(-1)
        gby = -(cy * tt).sum(-1)
        return gax, gay, gbx, gby, grad_radius, None, None, None


def capsule_probs(a2, b2, radius, qx, qy, sharpness):
    """Occupancy of each bone capsule at each pixel, shape (T, B, P)."""
    return _CapsuleProbs.apply(
        a2[..., 0], a2[..., 1], b2[..., 0], b2[..., 1], radius, qx, qy, sharpness
    )


def render_batch(
    mt: ModelTensors,
    ct: CameraTensors,
    kappa: torch.Tensor,
    sigma: torch.Tensor,
    theta_g: torch.Tensor,
    theta_p: torch.Tensor,
    sharpness: float,
    resolution: tuple[int, int],
    grid: torch.Tensor | None = None,
) -> torch.Tensor:
    """Soft silhouettes (T, H, W) for a batch of poses.

    Per pixel and bone: sigmoid(-sharpness * (dist_to_segment - radius_px)),
    radius_px = sigma * bone_radius * focal / depth at the bone midpoint.
    Bones are combined as 1 - prod(1 - p). Zero-length projected bones
    degrade to discs via the clamped segment parameter.
    """
    joints, _ = forward_kinematics_batch(mt, kappa, sigma, theta_g, theta_p)
    parents = torch.as_tensor(mt.parents[1:], dtype=torch.long)
    a3 = joints[:, parents]   # (T, B, 3) bone start
    b3 = joints[:, 1:]        # (T, B, 3) bone end

    proj = project_batch(ct, torch.cat([a3, b3], dim=1))
    nbones = a3.shape[1]
    a2, b2 = proj[:, :nbones], proj[:, nbones:]

    mid_depth = 0.5 * (a3[..., 2] + b3[..., 2]) + ct.fixed_depth
    focal = ct.focal[..., None] if ct.focal.ndim else ct.focal
    radius_px = sigma.reshape(-1, 1) * mt.bone_radii * focal / mid_depth  # (T, B)

    if grid is None:
        grid = pixel_grid(resolution, dtype=kappa.dtype)
    occupancy = capsule_probs(a2, b2, radius_px, grid[0], grid[1], float(sharpness))
    union = 1.0 - torch.prod(1.0 - occupancy, dim=1)
    return union.reshape(-1, *resolution)


def render_soft_silhouette(
    model: SkeletonModel,
    pose: PoseParams,
    camera: Camera,
    sharpness: float = DEFAULT_SHARPNESS,
    resolution: tuple[int, int] | None = None,
) -> SoftSilhouette:
    """Render one pose to a soft occupancy grid.

    Args:
        sharpness: sigmoid slope in 1/pixels, must be > 0.
        resolution: (H, W); defaults to the camera image size.
    """
    if not sharpness > 0:
        raise ValueError(f"sharpness must be > 0, got {sharpness}")
    if resolution is None:
        w, h = camera.image_size
        resolution = (h, w)
    kappa = torch.as_tensor(pose.kappa, dtype=DTYPE).unsqueeze(0)
    sigma = torch.tensor([pose.sigma], dtype=DTYPE)
    theta_g = torch.as_tensor(pose.theta_g, dtype=DTYPE).unsqueeze(0)
    theta_p = torch.as_tensor(pose.theta_p, dtype=DTYPE).unsqueeze(0)
    with torch.no_grad():
        out = render_batch(
            model_tensors(model),
            camera_tensors(camera),
            kappa,
            sigma,
            theta_g,
            theta_p,
            sharpness,
            resolution,
        )
    return SoftSilhouette(values=out[0].numpy())


def silhouette_bbox(mask: np.ndarray, threshold: float = 0.5) -> np.ndarray | None:
    """Tight (x0, y0, x1, y1) box around mask > threshold; None if empty."""
    ys, xs = np.nonzero(np.asarray(mask) > threshold)
    if xs.size == 0:
        return None
    return np.array([xs.min(), ys.min(), xs.max() + 1, ys.max() + 1], dtype=np.float64)
