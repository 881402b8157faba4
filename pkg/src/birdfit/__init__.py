"""Temporally consistent 3D articulated bird pose fitting.

Reconstructs per-frame 3D poses of an articulated bird model from 2D
keypoint detections and segmentation masks: preprocessing, IoU tracking,
robust frame-wise fitting with velocity/acceleration regularizers and an
optional shared bone scale, evaluation metrics, and a synthetic oracle.
"""

from .errors import BirdfitError
from .fitter import FitConfig, FitResult, fit_track, fit_window, initialize
from .losses import (
    LossWeights,
    ObservationFrame,
    acceleration_loss,
    keypoint_loss,
    mask_loss,
    pose_prior_loss,
    total_objective,
    velocity_loss,
)
from .metrics import me_p, me_v
from .preprocess import normalize_crop, weighted_median_filter
from .silhouette import SoftSilhouette, render_soft_silhouette
from .skeleton import (
    Camera,
    PoseParams,
    SkeletonModel,
    default_bird_model,
    forward_kinematics,
    load_model,
    project,
    save_model,
    topview_camera,
)
from .synthgen import MotionSpec, SynthSequence, generate_trajectory
from .tracker import IouTracker, Track, iou

__version__ = "0.1.0"

__all__ = [
    "BirdfitError",
    "Camera",
    "FitConfig",
    "FitResult",
    "IouTracker",
    "LossWeights",
    "MotionSpec",
    "ObservationFrame",
    "PoseParams",
    "SkeletonModel",
    "SoftSilhouette",
    "SynthSequence",
    "Track",
    "acceleration_loss",
    "default_bird_model",
    "fit_track",
    "fit_window",
    "forward_kinematics",
    "generate_trajectory",
    "initialize",
    "iou",
    "keypoint_loss",
    "load_model",
    "mask_loss",
    "me_p",
    "me_v",
    "normalize_crop",
    "pose_prior_loss",
    "project",
    "render_soft_silhouette",
    "save_model",
    "topview_camera",
    "total_objective",
    "velocity_loss",
    "weighted_median_filter",
]
