"""Articulated bird skeleton: model definition, forward kinematics, projection.

The skeleton is a rooted joint tree in topological order (root at index 0).
A pose is (kappa, sigma, theta_g, theta_p): in-plane root translation, a
single bone-scale factor, the global orientation and one axis-angle rotation
per non-root joint. Depth is fixed and only enters at projection time, which
suits a static top-down camera over a flat ledge.

Differentiable cores operate on batched torch tensors (leading frame
dimension); the public single-pose functions wrap them with numpy in/out.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import torch
import yaml

from .errors import DimensionMismatchError, ModelValidationError, ProjectionError

DTYPE = torch.float64
MODEL_FORMAT = "birdfit-model/1"

_SPD_EIG_TOL = 1e-10


def _as_f64(value, field: str, shape: tuple[int, ...] | None = None) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if shape is not None and arr.shape != shape:
        raise DimensionMismatchError(field, shape, arr.shape)
    return arr


@dataclass(frozen=True, eq=False)
class Camera:
    """Pinhole camera with a fixed subject depth.

    Attributes:
        focal: focal length in pixels.
        principal: (2,) principal point in pixels.
        fixed_depth: depth of the bird root plane, added to point z at
            projection time.
        image_size: (width, height) in pixels.
    """

    focal: float
    principal: np.ndarray
    fixed_depth: float
    image_size: tuple[int, int] = (256, 256)

    def __post_init__(self):
        object.__setattr__(self, "focal", float(self.focal))
        object.__setattr__(self, "fixed_depth", float(self.fixed_depth))
        object.__setattr__(self, "principal", _as_f64(self.principal, "principal", (2,)))
        object.__setattr__(self, "image_size", (int(self.image_size[0]), int(self.image_size[1])))
        if not self.focal > 0:
            raise ModelValidationError(f"focal must be > 0, got {self.focal}")
        if not self.fixed_depth > 0:
            raise ModelValidationError(f"fixed_depth must be > 0, got {self.fixed_depth}")

    def crop_view(self, scale: float, offset: Sequence[float]) -> "Camera":
        """Camera equivalent to viewing through an affine crop x' = (x - offset) * scale."""
        return Camera(
            focal=self.focal * scale,
            principal=(self.principal - np.asarray(offset, dtype=np.float64)) * scale,
            fixed_depth=self.fixed_depth,
            image_size=self.image_size,
        )


@dataclass(frozen=True, eq=False)
class SkeletonModel:
    """Joint tree, rest geometry, keypoint attachment and pose prior.

    Joints are stored in topological order: index 0 is the single root and
    every other joint's parent index is strictly smaller than its own.
    Bone b (0-based) is the segment from ``parents[b + 1]`` to joint
    ``b + 1`` and carries ``bone_radii[b]`` for silhouette geometry.
    """

    joint_names: tuple[str, ...]
    parents: np.ndarray            # (J,) int, -1 marks the root
    rest_offsets: np.ndarray       # (J, 3) offset from parent, model units
    keypoint_names: tuple[str, ...]
    keypoint_joints: np.ndarray    # (K,) int, joint each keypoint attaches to
    keypoint_offsets: np.ndarray   # (K, 3) local offset in the joint frame
    bone_radii: np.ndarray         # (J - 1,) capsule radii, model units
    pose_prior_mean: np.ndarray    # (3 * (J - 1),)
    pose_prior_cov_inv: np.ndarray # (3 * (J - 1), 3 * (J - 1)), SPD

    def __post_init__(self):
        names = tuple(str(n) for n in self.joint_names)
        object.__setattr__(self, "joint_names", names)
        object.__setattr__(self, "keypoint_names", tuple(str(n) for n in self.keypoint_names))
        parents = np.asarray(self.parents, dtype=np.int64)
        object.__setattr__(self, "parents", parents)
        j = len(names)
        object.__setattr__(self, "rest_offsets", _as_f64(self.rest_offsets, "rest_offsets", (j, 3)))
        k = len(self.keypoint_names)
        kp_joints = np.asarray(self.keypoint_joints, dtype=np.int64)
        if kp_joints.shape != (k,):
            raise DimensionMismatchError("keypoint_joints", (k,), kp_joints.shape)
        object.__setattr__(self, "keypoint_joints", kp_joints)
        object.__setattr__(
            self, "keypoint_offsets", _as_f64(self.keypoint_offsets, "keypoint_offsets", (k, 3))
        )
        object.__setattr__(self, "bone_radii", _as_f64(self.bone_radii, "bone_radii", (j - 1,)))
        p = 3 * (j - 1)
        object.__setattr__(
            self, "pose_prior_mean", _as_f64(self.pose_prior_mean, "pose_prior_mean", (p,))
        )
        object.__setattr__(
            self,
            "pose_prior_cov_inv",
            _as_f64(self.pose_prior_cov_inv, "pose_prior_cov_inv", (p, p)),
        )
        self._validate()

    def _validate(self) -> None:
        parents = self.parents
        if parents.shape[0] < 1 or parents[0] != -1:
            raise ModelValidationError("joint 0 must be the unique root (parent -1)")
        if np.count_nonzero(parents == -1) != 1:
            raise ModelValidationError("exactly one root joint is required")
        for j in range(1, parents.shape[0]):
            if not 0 <= parents[j] < j:
                raise ModelValidationError(
                    f"joint {j} has parent {parents[j]}; parents must precede children"
                )
        if self.keypoint_joints.size and (
            self.keypoint_joints.min() < 0 or self.keypoint_joints.max() >= self.num_joints
        ):
            raise ModelValidationError("keypoint_joints references an invalid joint index")
        cov_inv = self.pose_prior_cov_inv
        if not np.allclose(cov_inv, cov_inv.T, atol=1e-9):
            raise ModelValidationError("pose_prior_cov_inv must be symmetric")
        eigvals = np.linalg.eigvalsh(cov_inv)
        if eigvals.min() <= _SPD_EIG_TOL:
            raise ModelValidationError(
                f"pose_prior_cov_inv must be positive definite (min eigenvalue {eigvals.min():.3e})"
            )
        if np.any(self.bone_radii < 0):
            raise ModelValidationError("bone_radii must be non-negative")

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def num_keypoints(self) -> int:
        return len(self.keypoint_names)

    @property
    def pose_dim(self) -> int:
        """Length of theta_p: 3 per non-root joint."""
        return 3 * (self.num_joints - 1)


@dataclass(frozen=True, eq=False)
class PoseParams:
    """The per-frame optimization variable.

    Attributes:
        kappa: (2,) in-plane translation of the root, model units.
        sigma: uniform bone-scale factor, > 0.
        theta_g: (3,) global orientation, axis-angle in radians.
        theta_p: (3 * (J - 1),) per-joint axis-angle rotations, flattened in
            joint order.
    """

    kappa: np.ndarray
    sigma: float
    theta_g: np.ndarray
    theta_p: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "kappa", _as_f64(self.kappa, "kappa", (2,)))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "theta_g", _as_f64(self.theta_g, "theta_g", (3,)))
        theta_p = _as_f64(self.theta_p, "theta_p")
        if theta_p.ndim != 1 or theta_p.size % 3 != 0:
            raise DimensionMismatchError("theta_p", "(3 * non-root joints,)", theta_p.shape)
        object.__setattr__(self, "theta_p", theta_p)
        if not self.sigma > 0:
            raise ModelValidationError(f"sigma must be > 0, got {self.sigma}")
        for field in ("kappa", "theta_g", "theta_p"):
            if not np.all(np.isfinite(getattr(self, field))):
                raise ModelValidationError(f"{field} contains non-finite values")

    @staticmethod
    def rest(model: SkeletonModel) -> "PoseParams":
        """Identity pose: no translation, unit scale, prior-mean body pose."""
        return PoseParams(
            kappa=np.zeros(2),
            sigma=1.0,
            theta_g=np.zeros(3),
            theta_p=model.pose_prior_mean.copy(),
        )

    def replace(self, **changes) -> "PoseParams":
        return dataclasses.replace(self, **changes)


# ---------------------------------------------------------------------------
# torch cores
# ---------------------------------------------------------------------------

class ModelTensors(NamedTuple):
    parents: tuple[int, ...]
    rest_offsets: torch.Tensor     # (J, 3)
    keypoint_joints: torch.Tensor  # (K,) long
    keypoint_offsets: torch.Tensor # (K, 3)
    bone_radii: torch.Tensor       # (J - 1,)
    prior_mean: torch.Tensor       # (P,)
    prior_cov_inv: torch.Tensor    # (P, P)


class CameraTensors(NamedTuple):
    focal: torch.Tensor      # scalar or (T,)
    principal: torch.Tensor  # (2,) or (T, 2)
    fixed_depth: torch.Tensor


def model_tensors(model: SkeletonModel, dtype: torch.dtype = DTYPE) -> ModelTensors:
    return ModelTensors(
        parents=tuple(int(p) for p in model.parents),
        rest_offsets=torch.as_tensor(model.rest_offsets, dtype=dtype),
        keypoint_joints=torch.as_tensor(model.keypoint_joints, dtype=torch.long),
        keypoint_offsets=torch.as_tensor(model.keypoint_offsets, dtype=dtype),
        bone_radii=torch.as_tensor(model.bone_radii, dtype=dtype),
        prior_mean=torch.as_tensor(model.pose_prior_mean, dtype=dtype),
        prior_cov_inv=torch.as_tensor(model.pose_prior_cov_inv, dtype=dtype),
    )


def camera_tensors(camera: Camera | Sequence[Camera], dtype: torch.dtype = DTYPE) -> CameraTensors:
    """Stack one camera or a per-frame camera sequence into tensors."""
    if isinstance(camera, Camera):
        return CameraTensors(
            focal=torch.tensor(camera.focal, dtype=dtype),
            principal=torch.as_tensor(camera.principal, dtype=dtype),
            fixed_depth=torch.tensor(camera.fixed_depth, dtype=dtype),
        )
    cams = list(camera)
    depths = {c.fixed_depth for c in cams}
    if len(depths) != 1:
        raise ModelValidationError("per-frame cameras must share fixed_depth")
    return CameraTensors(
        focal=torch.tensor([c.focal for c in cams], dtype=dtype),
        principal=torch.stack([torch.as_tensor(c.principal, dtype=dtype) for c in cams]),
        fixed_depth=torch.tensor(cams[0].fixed_depth, dtype=dtype),
    )


def scale_camera_tensors(ct: CameraTensors, scale: float) -> CameraTensors:
    """Camera viewing the same scene on a uniformly rescaled pixel grid."""
    return CameraTensors(
        focal=ct.focal * scale, principal=ct.principal * scale, fixed_depth=ct.fixed_depth
    )


def axis_angle_to_matrix(vec: torch.Tensor) -> torch.Tensor:
    """Rodrigues' rotation formula, batched over leading dims.

    Smooth at the identity: below angle^2 = 1e-8 the sin/cos factors switch
    to their Taylor expansions so gradients stay finite.
    """
    theta2 = (vec * vec).sum(dim=-1)
    small = theta2 < 1e-8
    safe2 = torch.where(small, torch.ones_like(theta2), theta2)
    theta = torch.sqrt(safe2)
    sin_factor = torch.where(small, 1.0 - theta2 / 6.0, torch.sin(theta) / theta)
    cos_factor = torch.where(small, 0.5 - theta2 / 24.0, (1.0 - torch.cos(theta)) / safe2)

    x, y, z = vec[..., 0], vec[..., 1], vec[..., 2]
    zeros = torch.zeros_like(x)
    k = torch.stack(
        [
            torch.stack([zeros, -z, y], dim=-1),
            torch.stack([z, zeros, -x], dim=-1),
            torch.stack([-y, x, zeros], dim=-1),
        ],
        dim=-2,
    )
    eye = torch.eye(3, dtype=vec.dtype, device=vec.device).expand(k.shape)
    return eye + sin_factor[..., None, None] * k + cos_factor[..., None, None] * (k @ k)


def forward_kinematics_batch(
    mt: ModelTensors,
    kappa: torch.Tensor,    # (T, 2)
    sigma: torch.Tensor,    # (T,) or (1,)
    theta_g: torch.Tensor,  # (T, 3)
    theta_p: torch.Tensor,  # (T, P)
) -> tuple[torch.Tensor, torch.Tensor]:
    """Joint and keypoint positions for a batch of poses.

    Returns (joints (T, J, 3), keypoints (T, K, 3)). The root sits at
    (kappa_x, kappa_y, 0); depth enters only at projection. A joint's own
    rotation affects its descendants and attached keypoints, not its own
    offset from the parent.
    """
    t = kappa.shape[0]
    num_joints = len(mt.parents)
    scale = sigma.reshape(-1, 1)
    root_pos = torch.cat([kappa, torch.zeros(t, 1, dtype=kappa.dtype)], dim=1)

    local_rots = axis_angle_to_matrix(theta_p.reshape(t, num_joints - 1, 3))
    positions: list[torch.Tensor] = [root_pos]
    world_rots: list[torch.Tensor] = [axis_angle_to_matrix(theta_g)]
    for j in range(1, num_joints):
        parent = mt.parents[j]
        offset = scale * mt.rest_offsets[j]
        pos = positions[parent] + (world_rots[parent] @ offset.unsqueeze(-1)).squeeze(-1)
        positions.append(pos)
        world_rots.append(world_rots[parent] @ local_rots[:, j - 1])

    joints = torch.stack(positions, dim=1)
    rots = torch.stack(world_rots, dim=1)
    kp_rots = rots[:, mt.keypoint_joints]
    kp_offsets = scale.unsqueeze(-1) * mt.keypoint_offsets
    keypoints = joints[:, mt.keypoint_joints] + (kp_rots @ kp_offsets.unsqueeze(-1)).squeeze(-1)
    return joints, keypoints


def project_batch(ct: CameraTensors, points: torch.Tensor) -> torch.Tensor:
    """Pinhole projection of (T, N, 3) points to (T, N, 2) pixels."""
    z = points[..., 2] + ct.fixed_depth
    focal = ct.focal[..., None] if ct.focal.ndim else ct.focal
    principal = ct.principal if ct.principal.ndim == 1 else ct.principal[:, None, :]
    return focal[..., None] * points[..., :2] / z.unsqueeze(-1) + principal


def _pose_tensors(model: SkeletonModel, pose: PoseParams):
    if pose.theta_p.shape != (model.pose_dim,):
        raise DimensionMismatchError("theta_p", (model.pose_dim,), pose.theta_p.shape)
    return (
        torch.as_tensor(pose.kappa, dtype=DTYPE).unsqueeze(0),
        torch.tensor([pose.sigma], dtype=DTYPE),
        torch.as_tensor(pose.theta_g, dtype=DTYPE).unsqueeze(0),
        torch.as_tensor(pose.theta_p, dtype=DTYPE).unsqueeze(0),
    )


def forward_kinematics(model: SkeletonModel, pose: PoseParams) -> tuple[np.ndarray, np.ndarray]:
    """3D joint and keypoint positions for one pose.

    Returns:
        (joints, keypoints): arrays of shape (J, 3) and (K, 3).

    Raises:
        DimensionMismatchError: theta_p length does not match the model.
    """
    kappa, sigma, theta_g, theta_p = _pose_tensors(model, pose)
    with torch.no_grad():
        joints, keypoints = forward_kinematics_batch(
            model_tensors(model), kappa, sigma, theta_g, theta_p
        )
    return joints[0].numpy(), keypoints[0].numpy()


def project(camera: Camera, points: np.ndarray) -> np.ndarray:
    """Project (N, 3) model-space points to (N, 2) pixel coordinates.

    Raises:
        ProjectionError: a point has non-positive depth after adding the
            camera's fixed depth.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise DimensionMismatchError("points", "(N, 3)", pts.shape)
    z = pts[:, 2] + camera.fixed_depth
    bad = np.nonzero(z <= 0)[0]
    if bad.size:
        raise ProjectionError(int(bad[0]), float(z[bad[0]]))
    with torch.no_grad():
        out = project_batch(camera_tensors(camera), torch.as_tensor(pts).unsqueeze(0))
    return out[0].numpy()


def project_pose_keypoints(
    model: SkeletonModel, camera: Camera, pose: PoseParams
) -> np.ndarray:
    """Convenience: forward kinematics then projection of the keypoints."""
    _, keypoints = forward_kinematics(model, pose)
    return project(camera, keypoints)


# ---------------------------------------------------------------------------
# model file I/O
# ---------------------------------------------------------------------------

def save_model(model: SkeletonModel, path: str | Path) -> None:
    """Write a model file (versioned YAML schema, see README)."""
    doc = {
        "format": MODEL_FORMAT,
        "joints": [
            {
                "name": model.joint_names[j],
                "parent": None if model.parents[j] < 0 else model.joint_names[model.parents[j]],
                "offset": [float(v) for v in model.rest_offsets[j]],
            }
            for j in range(model.num_joints)
        ],
        "keypoints": [
            {
                "name": model.keypoint_names[k],
                "joint": model.joint_names[model.keypoint_joints[k]],
                "offset": [float(v) for v in model.keypoint_offsets[k]],
            }
            for k in range(model.num_keypoints)
        ],
        "bone_radii": {
            model.joint_names[j + 1]: float(model.bone_radii[j])
            for j in range(model.num_joints - 1)
        },
        "pose_prior": {
            "mean": [float(v) for v in model.pose_prior_mean],
            "cov_inv": [[float(v) for v in row] for row in model.pose_prior_cov_inv],
        },
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_model(path: str | Path) -> SkeletonModel:
    """Load and validate a model file.

    Raises:
        ModelValidationError: unknown format version or invariant violation.
    """
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict) or doc.get("format") != MODEL_FORMAT:
        raise ModelValidationError(
            f"unsupported model format {doc.get('format') if isinstance(doc, dict) else doc!r}; "
            f"expected {MODEL_FORMAT}"
        )
    joints = doc["joints"]
    names = [j["name"] for j in joints]
    index = {n: i for i, n in enumerate(names)}
    if len(index) != len(names):
        raise ModelValidationError("duplicate joint names")
    parents = []
    for j in joints:
        parent = j.get("parent")
        if parent is None:
            parents.append(-1)
        elif parent in index:
            parents.append(index[parent])
        else:
            raise ModelValidationError(f"joint {j['name']!r} has unknown parent {parent!r}")
    keypoints = doc.get("keypoints", [])
    for k in keypoints:
        if k["joint"] not in index:
            raise ModelValidationError(f"keypoint {k['name']!r} attaches to unknown joint")
    radii_map = doc.get("bone_radii", {})
    radii = [float(radii_map.get(names[j], 0.0)) for j in range(1, len(names))]
    prior = doc["pose_prior"]
    return SkeletonModel(
        joint_names=tuple(names),
        parents=np.array(parents),
        rest_offsets=np.array([j["offset"] for j in joints], dtype=np.float64),
        keypoint_names=tuple(k["name"] for k in keypoints),
        keypoint_joints=np.array([index[k["joint"]] for k in keypoints], dtype=np.int64),
        keypoint_offsets=np.array(
            [k["offset"] for k in keypoints], dtype=np.float64
        ).reshape(len(keypoints), 3),
        bone_radii=np.array(radii),
        pose_prior_mean=np.array(prior["mean"], dtype=np.float64),
        pose_prior_cov_inv=np.array(prior["cov_inv"], dtype=np.float64),
    )


# ---------------------------------------------------------------------------
# default synthetic bird model
# ---------------------------------------------------------------------------

_DEFAULT_JOINTS = [
    # name, parent, offset (model units; +x beak-ward, +z toward the camera)
    ("root", None, (0.0, 0.0, 0.0)),
    ("chest", "root", (0.45, 0.0, 0.0)),
    ("neck", "chest", (0.35, 0.0, 0.10)),
    ("head", "neck", (0.28, 0.0, 0.08)),
    ("spine_rear", "root", (-0.45, 0.0, 0.0)),
    ("tail", "spine_rear", (-0.40, 0.0, -0.05)),
    ("wing_l_inner", "chest", (-0.05, 0.32, 0.04)),
    ("wing_l_outer", "wing_l_inner", (-0.30, 0.22, 0.0)),
    ("wing_r_inner", "chest", (-0.05, -0.32, 0.04)),
    ("wing_r_outer", "wing_r_inner", (-0.30, -0.22, 0.0)),
    ("leg_l", "spine_rear", (0.08, 0.16, -0.22)),
    ("foot_l", "leg_l", (0.14, 0.02, -0.12)),
    ("leg_r", "spine_rear", (0.08, -0.16, -0.22)),
    ("foot_r", "leg_r", (0.14, -0.02, -0.12)),
]

_DEFAULT_KEYPOINTS = [
    ("beak_tip", "head", (0.24, 0.0, 0.0)),
    ("crown", "head", (0.02, 0.0, 0.10)),
    ("eye_l", "head", (0.08, 0.07, 0.06)),
    ("eye_r", "head", (0.08, -0.07, 0.06)),
    ("nape", "neck", (0.0, 0.0, 0.06)),
    ("throat", "neck", (0.06, 0.0, -0.08)),
    ("chest_front", "chest", (0.16, 0.0, -0.06)),
    ("back_center", "root", (0.0, 0.0, 0.14)),
    ("belly", "root", (0.0, 0.0, -0.16)),
    ("rump", "spine_rear", (-0.05, 0.0, 0.08)),
    ("tail_base", "spine_rear", (-0.18, 0.0, 0.0)),
    ("tail_tip", "tail", (-0.22, 0.0, 0.0)),
    ("shoulder_l", "wing_l_inner", (0.0, 0.05, 0.04)),
    ("wing_l_tip", "wing_l_outer", (-0.18, 0.10, 0.0)),
    ("shoulder_r", "wing_r_inner", (0.0, -0.05, 0.04)),
    ("wing_r_tip", "wing_r_outer", (-0.18, -0.10, 0.0)),
    ("knee_l", "leg_l", (0.0, 0.02, 0.0)),
    ("knee_r", "leg_r", (0.0, -0.02, 0.0)),
    ("foot_l_tip", "foot_l", (0.10, 0.0, -0.04)),
    ("foot_r_tip", "foot_r", (0.10, 0.0, -0.04)),
]

_DEFAULT_BONE_RADII = {
    "chest": 0.24,
    "neck": 0.13,
    "head": 0.12,
    "spine_rear": 0.24,
    "tail": 0.09,
    "wing_l_inner": 0.11,
    "wing_l_outer": 0.07,
    "wing_r_inner": 0.11,
    "wing_r_outer": 0.07,
    "leg_l": 0.05,
    "foot_l": 0.035,
    "leg_r": 0.05,
    "foot_r": 0.035,
}

# Prior spread per joint (radians). The real pipeline loads statistics
# estimated elsewhere; this diagonal surrogate only ships for tests and
# synthetic runs. Mobile parts get a wider prior.
_DEFAULT_PRIOR_STD = {
    "chest": 0.6,
    "neck": 1.0,
    "head": 1.0,
    "spine_rear": 0.6,
    "tail": 0.9,
    "wing_l_inner": 1.2,
    "wing_l_outer": 1.2,
    "wing_r_inner": 1.2,
    "wing_r_outer": 1.2,
    "leg_l": 0.7,
    "foot_l": 0.7,
    "leg_r": 0.7,
    "foot_r": 0.7,
}


def default_bird_model() -> SkeletonModel:
    """Synthetic bird-like skeleton: spine chain, two wing chains, two leg
    chains, 20 keypoints. Authored in top view (camera along -z)."""
    names = [j[0] for j in _DEFAULT_JOINTS]
    index = {n: i for i, n in enumerate(names)}
    parents = np.array([-1 if j[1] is None else index[j[1]] for j in _DEFAULT_JOINTS])
    offsets = np.array([j[2] for j in _DEFAULT_JOINTS], dtype=np.float64)
    kp_joints = np.array([index[k[1]] for k in _DEFAULT_KEYPOINTS])
    kp_offsets = np.array([k[2] for k in _DEFAULT_KEYPOINTS], dtype=np.float64)
    radii = np.array([_DEFAULT_BONE_RADII[n] for n in names[1:]])
    stds = np.repeat([_DEFAULT_PRIOR_STD[n] for n in names[1:]], 3)
    return SkeletonModel(
        joint_names=tuple(names),
        parents=parents,
        rest_offsets=offsets,
        keypoint_names=tuple(k[0] for k in _DEFAULT_KEYPOINTS),
        keypoint_joints=kp_joints,
        keypoint_offsets=kp_offsets,
        bone_radii=radii,
        pose_prior_mean=np.zeros(3 * (len(names) - 1)),
        pose_prior_cov_inv=np.diag(1.0 / stds**2),
    )


def topview_camera(
    image_size: tuple[int, int] = (256, 256),
    focal: float = 800.0,
    fixed_depth: float = 10.0,
) -> Camera:
    """Camera looking straight down at the subject plane, centered principal point."""
    w, h = image_size
    return Camera(
        focal=focal,
        principal=np.array([w / 2.0, h / 2.0]),
        fixed_depth=fixed_depth,
        image_size=(w, h),
    )
