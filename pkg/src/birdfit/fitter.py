"""Two-stage temporal optimization of the bird model over frame windows.

A window of observation frames is fitted jointly: frame one is initialized
by a 30-candidate yaw sweep of the rest pose, later frames inherit and
re-center the previous initialization, then Adam minimizes the combined
objective in two stages (keypoints + prior + temporal terms first, the
silhouette term added second). An optional shared scale ties bone lengths
across the window.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import torch

from .errors import DimensionMismatchError, FitDivergedError, UninitializableFrameError
from .losses import (
    LossWeights,
    ObservationFrame,
    acceleration_energy,
    frame_energies,
    keypoint_energy,
    mask_view,
    masks_energy,
    stack_observations,
    velocity_energy,
)
from .preprocess import weighted_median_filter
from .silhouette import DEFAULT_SHARPNESS
from .skeleton import (
    DTYPE,
    Camera,
    CameraTensors,
    PoseParams,
    SkeletonModel,
    camera_tensors,
    forward_kinematics_batch,
    model_tensors,
    project_batch,
)

YAW_SWEEP_STEP_DEG = 12.0

# Frames per silhouette-render chunk are chosen so one (frames, bones, H*W)
# intermediate stays near this many elements.
_MASK_CHUNK_BUDGET = 8_000_000


@dataclass
class FitConfig:
    """Knobs of the windowed fit.

    lambda_vel / lambda_acc override the corresponding LossWeights fields so
    sweeps can vary them independently of the frame-wise weights.
    stage1_mask / stage2_mask control when the silhouette term is active
    (the two optimization steps are otherwise identical).
    """

    window_size: int = 100
    lambda_vel: float = 0.0
    lambda_acc: float = 0.0
    use_median_filter: bool = False
    common_size: bool = False
    stage1_iters: int = 600
    stage2_iters: int = 400
    learning_rate: float = 0.01
    adam_betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    stage1_mask: bool = False
    stage2_mask: bool = True
    sharpness: float = DEFAULT_SHARPNESS
    median_window: int = 5
    init_per_frame: bool = False
    # Silhouette targets are subsampled by this factor during optimization
    # (4 -> 64x64 on 256x256 crops); set 1 for full-resolution silhouettes.
    mask_downsample: int = 4

    def __post_init__(self):
        if self.window_size < 1:
            raise ValueError("window_size must be >= 1")
        if self.stage1_iters < 0 or self.stage2_iters < 0:
            raise ValueError("iteration counts must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.mask_downsample < 1:
            raise ValueError("mask_downsample must be >= 1")

    def weights_for(self, base: LossWeights) -> LossWeights:
        return dataclasses.replace(
            base, lambda_vel=self.lambda_vel, lambda_acc=self.lambda_acc
        )


@dataclass
class FitDiagnostics:
    """Convergence bookkeeping for one fitted window."""

    initial_loss: float
    final_loss: float
    stage1_final: float
    stage2_final: float
    iterations: int

    @property
    def improved(self) -> bool:
        return self.final_loss <= self.initial_loss


@dataclass
class FitResult:
    """Optimized poses for one window plus projected keypoints and traces."""

    poses: list[PoseParams]
    projected_keypoints: np.ndarray  # (T, K, 2)
    loss_trace: np.ndarray           # per-iteration objective values
    frame_indices: np.ndarray        # (T,)
    diagnostics: FitDiagnostics


def initialize(
    model: SkeletonModel,
    camera: Camera,
    first_frame_obs: ObservationFrame,
    weights: LossWeights | None = None,
    yaw_step_deg: float = YAW_SWEEP_STEP_DEG,
) -> PoseParams:
    """Initial pose from a full-circle yaw sweep of the top-view rest pose.

    kappa is chosen so the projected root lands on the centroid of the
    confident observed keypoints; the body pose is the prior mean; the yaw
    candidate with the lowest keypoint loss wins (ties to the lower angle).

    Raises:
        UninitializableFrameError: no keypoint has confidence > 0.
    """
    weights = weights or LossWeights()
    conf = first_frame_obs.keypoints[:, 2]
    confident = conf > 0
    if not confident.any():
        raise UninitializableFrameError(
            f"frame {first_frame_obs.frame_index} has no confident keypoints"
        )
    centroid = first_frame_obs.keypoints[confident, :2].mean(axis=0)
    kappa = (centroid - camera.principal) * camera.fixed_depth / camera.focal

    n = int(round(360.0 / yaw_step_deg))
    yaws = np.deg2rad(yaw_step_deg) * np.arange(n)
    theta_g = np.zeros((n, 3))
    theta_g[:, 2] = yaws
    mt = model_tensors(model)
    ct = camera_tensors(camera)
    with torch.no_grad():
        _, kp3d = forward_kinematics_batch(
            mt,
            torch.as_tensor(np.tile(kappa, (n, 1)), dtype=DTYPE),
            torch.ones(n, dtype=DTYPE),
            torch.as_tensor(theta_g, dtype=DTYPE),
            torch.as_tensor(np.tile(model.pose_prior_mean, (n, 1)), dtype=DTYPE),
        )
        projected = project_batch(ct, kp3d)
        obs_xy = torch.as_tensor(first_frame_obs.keypoints[:, :2], dtype=DTYPE).expand(n, -1, -1)
        obs_c = torch.as_tensor(conf, dtype=DTYPE).expand(n, -1)
        losses = keypoint_energy(projected, obs_xy, obs_c, weights.gm_sigma)
        best = int(torch.argmin(losses))
    return PoseParams(
        kappa=kappa, sigma=1.0, theta_g=theta_g[best], theta_p=model.pose_prior_mean.copy()
    )


def compute_initial_poses(
    model: SkeletonModel,
    cameras: list[Camera],
    observations: Sequence[ObservationFrame],
    config: FitConfig,
    weights: LossWeights,
) -> list[PoseParams]:
    """Per-frame starting poses: sweep on frame one, then propagate.

    Propagation copies the previous frame's initialization and re-centers
    kappa on the new frame's confident-keypoint centroid. With
    ``config.init_per_frame`` every frame runs its own sweep (matching how
    a window size of 1 initializes each frame independently).
    """
    poses = [initialize(model, cameras[0], observations[0], weights)]
    for f in range(1, len(observations)):
        obs = observations[f]
        if config.init_per_frame:
            try:
                poses.append(initialize(model, cameras[f], obs, weights))
                continue
            except UninitializableFrameError:
                pass
        prev = poses[-1]
        conf = obs.keypoints[:, 2]
        if (conf > 0).any():
            centroid = obs.keypoints[conf > 0, :2].mean(axis=0)
            cam = cameras[f]
            kappa = (centroid - cam.principal) * cam.fixed_depth / cam.focal
        else:
            kappa = prev.kappa
        poses.append(prev.replace(kappa=kappa))
    return poses


def _subsample_masks(masks: torch.Tensor, factor: int) -> torch.Tensor:
    """Center-aligned nearest subsample of (T, H, W) targets by an integer factor."""
    h, w = masks.shape[-2:]
    iy = torch.clamp(
        torch.round((torch.arange(h // factor, dtype=DTYPE) + 0.5) * factor - 0.5).long(), 0, h - 1
    )
    ix = torch.clamp(
        torch.round((torch.arange(w // factor, dtype=DTYPE) + 0.5) * factor - 0.5).long(), 0, w - 1
    )
    return masks[:, iy][:, :, ix]


def _slice_ct(ct: CameraTensors, lo: int, hi: int) -> CameraTensors:
    if ct.focal.ndim == 0:
        return ct
    return CameraTensors(
        focal=ct.focal[lo:hi], principal=ct.principal[lo:hi], fixed_depth=ct.fixed_depth
    )


def _term_diagnosis(values: dict[str, float]) -> str:
    for name, value in values.items():
        if not np.isfinite(value):
            return name
    return "total"


def fit_window(
    model: SkeletonModel,
    camera: Camera | Sequence[Camera],
    observations: Sequence[ObservationFrame],
    config: FitConfig | None = None,
    weights: LossWeights | None = None,
    initial_poses: Sequence[PoseParams] | None = None,
) -> FitResult:
    """Jointly fit one window of preprocessed observation frames.

    Stage 1 optimizes keypoint + prior + temporal terms for
    ``stage1_iters`` Adam iterations; stage 2 restarts the optimizer and
    adds the silhouette term for ``stage2_iters`` more. With
    ``config.common_size`` a single scale variable is shared by the whole
    window.

    Raises:
        FitDivergedError: a loss or gradient went non-finite.
        UninitializableFrameError: the first frame has no confident keypoints.
    """
    if not observations:
        raise ValueError("observations must be nonempty")
    config = config or FitConfig()
    base_weights = weights or LossWeights()
    eff = config.weights_for(base_weights)

    num_frames = len(observations)
    cameras = (
        [camera] * num_frames if isinstance(camera, Camera) else list(camera)
    )
    if len(cameras) != num_frames:
        raise DimensionMismatchError("camera", num_frames, len(cameras))

    if initial_poses is None:
        initial_poses = compute_initial_poses(model, cameras, observations, config, eff)
    elif len(initial_poses) != num_frames:
        raise DimensionMismatchError("initial_poses", num_frames, len(initial_poses))

    mt = model_tensors(model)
    ct = camera_tensors(cameras[0]) if len(set(id(c) for c in cameras)) == 1 else camera_tensors(cameras)
    obs_xy, obs_conf, masks = stack_observations(observations)
    if config.use_median_filter:
        kp = np.stack([o.keypoints for o in observations])
        filtered = weighted_median_filter(kp, window=config.median_window)
        obs_xy = torch.as_tensor(filtered[:, :, :2], dtype=DTYPE)
        obs_conf = torch.as_tensor(filtered[:, :, 2], dtype=DTYPE)

    if config.mask_downsample > 1:
        masks = _subsample_masks(masks, config.mask_downsample)
    mask_ct, mask_sharp = mask_view(
        ct, cameras[0].image_size, tuple(masks.shape[-2:]), config.sharpness
    )
    nbones = model.num_joints - 1
    mask_px = masks.shape[-2] * masks.shape[-1] * nbones
    chunk = max(1, min(num_frames, int(_MASK_CHUNK_BUDGET // max(1, mask_px))))

    kappa = torch.as_tensor(np.stack([p.kappa for p in initial_poses]), dtype=DTYPE)
    theta_g = torch.as_tensor(np.stack([p.theta_g for p in initial_poses]), dtype=DTYPE)
    theta_p = torch.as_tensor(np.stack([p.theta_p for p in initial_poses]), dtype=DTYPE)
    if config.common_size:
        sigma = torch.tensor([float(np.mean([p.sigma for p in initial_poses]))], dtype=DTYPE)
    else:
        sigma = torch.as_tensor(np.array([p.sigma for p in initial_poses]), dtype=DTYPE)
    variables = [kappa, sigma, theta_g, theta_p]
    for v in variables:
        v.requires_grad_(True)

    def base_terms() -> dict[str, torch.Tensor]:
        return {
            "frame": frame_energies(
                mt, ct, kappa, sigma, theta_g, theta_p, obs_xy, obs_conf, eff
            ).sum(),
            "velocity": eff.lambda_vel
            * velocity_energy(theta_g, theta_p, eff.beta_g, eff.beta_p),
            "acceleration": eff.lambda_acc
            * acceleration_energy(theta_g, theta_p, eff.beta_g, eff.beta_p),
        }

    def mask_chunks():
        for lo in range(0, num_frames, chunk):
            hi = min(num_frames, lo + chunk)
            yield eff.lambda_msk * masks_energy(
                mt,
                _slice_ct(mask_ct, lo, hi),
                kappa[lo:hi],
                sigma if config.common_size else sigma[lo:hi],
                theta_g[lo:hi],
                theta_p[lo:hi],
                masks[lo:hi],
                mask_sharp,
            ).sum()

    def step_value(with_mask: bool, backward: bool) -> tuple[float, dict[str, float]]:
        """Objective at the current variables; backward is chunked so only
        one silhouette-render graph is alive at a time."""
        terms = base_terms()
        values = {k: float(v.detach()) for k, v in terms.items()}
        if backward:
            total = sum(terms.values())
            total.backward()
        mask_total = 0.0
        if with_mask and eff.lambda_msk > 0:
            for part in mask_chunks():
                mask_total += float(part.detach())
                if backward:
                    part.backward()
            values["mask"] = mask_total
        return sum(values.values()), values

    def evaluate(with_mask: bool) -> float:
        with torch.no_grad():
            return step_value(with_mask, backward=False)[0]

    trace: list[float] = []
    stage_finals = [float("nan"), float("nan")]
    initial_full = evaluate(config.stage2_mask)

    iteration = 0
    for stage, iters, with_mask in (
        (1, config.stage1_iters, config.stage1_mask),
        (2, config.stage2_iters, config.stage2_mask),
    ):
        # Fresh optimizer state per stage: the two steps are distinct runs.
        optimizer = torch.optim.Adam(
            variables, lr=config.learning_rate, betas=config.adam_betas, eps=config.adam_eps
        )
        for _ in range(iters):
            optimizer.zero_grad()
            value, values = step_value(with_mask, backward=True)
            if not np.isfinite(value):
                raise FitDivergedError(iteration, stage, _term_diagnosis(values))
            for name, v in zip(("kappa", "sigma", "theta_g", "theta_p"), variables):
                if v.grad is not None and not torch.isfinite(v.grad).all():
                    raise FitDivergedError(iteration, stage, f"grad:{name}")
            optimizer.step()
            with torch.no_grad():
                sigma.clamp_(min=1e-4)
            trace.append(value)
            iteration += 1
        stage_finals[stage - 1] = evaluate(with_mask) if iters else float("nan")

    final_full = evaluate(config.stage2_mask)

    with torch.no_grad():
        sigma_full = sigma.expand(num_frames) if config.common_size else sigma
        _, kp3d = forward_kinematics_batch(mt, kappa, sigma_full, theta_g, theta_p)
        projected = project_batch(ct, kp3d).numpy()
        poses = [
            PoseParams(
                kappa=kappa[f].numpy().copy(),
                sigma=float(sigma_full[f]),
                theta_g=theta_g[f].numpy().copy(),
                theta_p=theta_p[f].numpy().copy(),
            )
            for f in range(num_frames)
        ]

    return FitResult(
        poses=poses,
        projected_keypoints=projected,
        loss_trace=np.asarray(trace),
        frame_indices=np.array([o.frame_index for o in observations]),
        diagnostics=FitDiagnostics(
            initial_loss=initial_full,
            final_loss=final_full,
            stage1_final=stage_finals[0],
            stage2_final=stage_finals[1],
            iterations=iteration,
        ),
    )


def fit_track(
    model: SkeletonModel,
    camera: Camera | Sequence[Camera],
    observations: Sequence[ObservationFrame],
    config: FitConfig | None = None,
    weights: LossWeights | None = None,
) -> FitResult:
    """Fit a whole track as consecutive non-overlapping windows."""
    config = config or FitConfig()
    results = []
    for lo in range(0, len(observations), config.window_size):
        window = observations[lo:lo + config.window_size]
        cams = camera if isinstance(camera, Camera) else camera[lo:lo + config.window_size]
        results.append(fit_window(model, cams, window, config, weights))
    return concat_results(results)


def concat_results(results: Sequence[FitResult]) -> FitResult:
    """Stitch per-window results of one track back together."""
    if not results:
        raise ValueError("no results to concatenate")
    if len(results) == 1:
        return results[0]
    return FitResult(
        poses=[p for r in results for p in r.poses],
        projected_keypoints=np.concatenate([r.projected_keypoints for r in results]),
        loss_trace=np.concatenate([r.loss_trace for r in results]),
        frame_indices=np.concatenate([r.frame_indices for r in results]),
        diagnostics=FitDiagnostics(
            initial_loss=sum(r.diagnostics.initial_loss for r in results),
            final_loss=sum(r.diagnostics.final_loss for r in results),
            stage1_final=sum(r.diagnostics.stage1_final for r in results),
            stage2_final=sum(r.diagnostics.stage2_final for r in results),
            iterations=sum(r.diagnostics.iterations for r in results),
        ),
    )
