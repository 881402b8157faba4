"""Experiment grid: enumerate fit configurations, run them, tabulate metrics.

A grid spec is a list of blocks; each block fixes a window size and sweeps
temporal-weight / acceleration / median-filter / common-size factors, with
optional replicates (replicates share the configuration and get distinct
seeds downstream if the dataset generator uses them; on a fixed dataset
they are exact reruns). Cells are independent and may run in a worker pool;
the output table is sorted worst-to-best by me_p.
"""
from __future__ import annotations

import dataclasses
import itertools
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from .errors import FileFormatError, InvalidSpecError
from .fitter import FitConfig, FitResult, fit_track
from .io import TrackObservations, load_camera, load_observations
from .losses import LossWeights
from .metrics import me_p, me_v, pooled_rms
from .preprocess import CropTransform
from .silhouette import silhouette_bbox
from .skeleton import Camera, SkeletonModel, load_model

_BLOCK_LIST_KEYS = ("lambda_vel", "use_acceleration", "use_median_filter", "common_size")


@dataclass(frozen=True)
class GridCell:
    """One experiment configuration."""

    window_size: int
    lambda_vel: float
    use_acceleration: bool
    use_median_filter: bool
    common_size: bool
    replicate: int = 0

    @property
    def lambda_acc(self) -> float:
        return self.lambda_vel if self.use_acceleration else 0.0

    def fit_config(self, base: FitConfig) -> FitConfig:
        return dataclasses.replace(
            base,
            window_size=self.window_size,
            lambda_vel=self.lambda_vel,
            lambda_acc=self.lambda_acc,
            use_median_filter=self.use_median_filter,
            common_size=self.common_size,
        )


def enumerate_grid(spec: dict) -> list[GridCell]:
    """Expand a grid spec document into its configuration cells.

    Spec schema::

        blocks:
          - window_size: 1
            use_median_filter: [false, true]
          - window_size: 100
            lambda_vel: [100.0, 1000.0]
            use_acceleration: [true, false]
            use_median_filter: [true, false]
            common_size: [true, false]
            replicates: 2

    Temporal factors omitted from a block default to a single off value, so
    a window-1 block with only the median toggle yields exactly 2 cells.
    """
    if not isinstance(spec, dict) or "blocks" not in spec:
        raise InvalidSpecError("grid spec must be a mapping with a 'blocks' list")
    cells: list[GridCell] = []
    for i, block in enumerate(spec["blocks"]):
        if not isinstance(block, dict) or "window_size" not in block:
            raise InvalidSpecError(f"grid block {i} must set window_size")
        unknown = set(block) - {"window_size", "replicates", *_BLOCK_LIST_KEYS}
        if unknown:
            raise InvalidSpecError(f"grid block {i} has unknown keys {sorted(unknown)}")
        window = int(block["window_size"])
        replicates = int(block.get("replicates", 1))
        if replicates < 1:
            raise InvalidSpecError(f"grid block {i}: replicates must be >= 1")

        def as_list(key, default):
            value = block.get(key, default)
            return list(value) if isinstance(value, (list, tuple)) else [value]

        lams = [float(v) for v in as_list("lambda_vel", [0.0])]
        accs = [bool(v) for v in as_list("use_acceleration", [False])]
        meds = [bool(v) for v in as_list("use_median_filter", [False])]
        sizes = [bool(v) for v in as_list("common_size", [False])]
        for rep, lam, acc, med, size in itertools.product(
            range(replicates), lams, accs, meds, sizes
        ):
            cells.append(
                GridCell(
                    window_size=window,
                    lambda_vel=lam,
                    use_acceleration=acc,
                    use_median_filter=med,
                    common_size=size,
                    replicate=rep,
                )
            )
    return cells


def load_grid_spec(path: str | Path) -> dict:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict):
        raise FileFormatError(f"{path}: grid spec must be a mapping")
    return doc


def paper_grid_spec() -> dict:
    """The published experiment sweep: 2 single-frame cells plus a doubly
    replicated 32-cell temporal sweep, 66 runs in total."""
    return {
        "blocks": [
            {"window_size": 1, "use_median_filter": [False, True]},
            {
                "window_size": 100,
                "lambda_vel": [1e2, 1e3, 1e4, 1e5],
                "use_acceleration": [True, False],
                "use_median_filter": [True, False],
                "common_size": [True, False],
                "replicates": 2,
            },
        ]
    }


# ---------------------------------------------------------------------------
# dataset access and evaluation
# ---------------------------------------------------------------------------

@dataclass
class Dataset:
    """On-disk layout: observations/track_*.npz, gt_keypoints.csv,
    camera.yaml, model.yaml."""

    root: Path
    model: SkeletonModel
    camera: Camera
    tracks: list[TrackObservations]
    gt: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]


def load_dataset(root: str | Path) -> Dataset:
    from .io import read_ground_truth

    root = Path(root)
    obs_dir = root / "observations"
    paths = sorted(obs_dir.glob("track_*.npz"))
    if not paths:
        raise FileFormatError(f"no observation files under {obs_dir}")
    gt_path = root / "gt_keypoints.csv"
    gt = read_ground_truth(gt_path) if gt_path.exists() else {}
    return Dataset(
        root=root,
        model=load_model(root / "model.yaml"),
        camera=load_camera(root / "camera.yaml"),
        tracks=[load_observations(p) for p in paths],
        gt=gt,
    )


def crop_cameras(camera: Camera, transforms: list[CropTransform]) -> list[Camera]:
    """Per-frame cameras expressing the crop affine of each frame."""
    return [camera.crop_view(t.scale, t.offset) for t in transforms]


def evaluate_track(
    result: FitResult,
    track: TrackObservations,
    gt: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]],
    crop_size: int | None = None,
) -> tuple[float, float, int, int] | None:
    """me_p / me_v of one fitted track against ground truth, original pixels.

    Projected keypoints are mapped back through each frame's crop affine;
    the normalization box is the tight box of the predicted mask (falling
    back to the detection box when the mask is empty). Returns
    (me_p, me_v, position samples, velocity samples), or None when no
    ground-truth frame overlaps the track.
    """
    t = len(track.observations)
    k = track.observations[0].keypoints.shape[0]
    proj = np.zeros((t, k, 2))
    gt_xy = np.zeros((t, k, 2))
    vis = np.zeros((t, k), dtype=bool)
    boxes = np.zeros((t, 4))
    for i, (obs, tr) in enumerate(zip(track.observations, track.transforms)):
        proj[i] = tr.invert(result.projected_keypoints[i])
        mask_box = silhouette_bbox(obs.mask)
        if mask_box is None:
            boxes[i] = obs.bbox
        else:
            scale = (crop_size or obs.mask.shape[1]) / obs.mask.shape[1]
            corners = (mask_box.reshape(2, 2)) * scale
            boxes[i] = tr.invert(corners).reshape(4)
        key = (obs.frame_index, int(track.bird_ids[i]))
        if key in gt:
            xy, visible = gt[key]
            if xy.shape[0] == k:
                gt_xy[i] = xy
                vis[i] = visible
    if not vis.any():
        return None
    value_p = me_p(proj, gt_xy, boxes, vis)
    n_p = int(vis.sum())
    pair_vis = vis[1:] & vis[:-1]
    if t >= 2 and pair_vis.any():
        value_v = me_v(proj, gt_xy, boxes, vis)
        n_v = int(pair_vis.sum())
    else:
        value_v, n_v = 0.0, 0
    return value_p, value_v, n_p, n_v


def evaluate_tracks(
    results: list[FitResult],
    tracks: list[TrackObservations],
    gt: dict,
    crop_size: int | None = None,
) -> tuple[dict[int, dict], dict]:
    """Per-track metrics plus the pooled aggregate."""
    per_track: dict[int, dict] = {}
    p_parts, v_parts = [], []
    for result, track in zip(results, tracks):
        evaluated = evaluate_track(result, track, gt, crop_size)
        if evaluated is None:
            continue
        value_p, value_v, n_p, n_v = evaluated
        per_track[track.track_id] = {
            "me_p": value_p,
            "me_v": value_v,
            "position_samples": n_p,
            "velocity_samples": n_v,
        }
        p_parts.append((value_p, n_p))
        v_parts.append((value_v, n_v))
    if not per_track:
        return {}, {}
    aggregate = {
        "me_p": pooled_rms(p_parts),
        "me_v": pooled_rms(v_parts) if any(c for _, c in v_parts) else 0.0,
        "tracks": len(per_track),
    }
    return per_track, aggregate


# ---------------------------------------------------------------------------
# grid execution
# ---------------------------------------------------------------------------

def run_cell(
    dataset: Dataset, cell: GridCell, base_fit: FitConfig, weights: LossWeights
) -> dict:
    """Fit and evaluate one grid configuration; failures land in 'status'."""
    row = {
        "window_size": cell.window_size,
        "lambda_vel": cell.lambda_vel,
        "acc": cell.use_acceleration,
        "med": cell.use_median_filter,
        "size": cell.common_size,
        "replicate": cell.replicate,
        "me_p": float("nan"),
        "me_v": float("nan"),
        "status": "ok",
    }
    try:
        config = cell.fit_config(base_fit)
        results = []
        for track in dataset.tracks:
            cams = crop_cameras(dataset.camera, track.transforms)
            results.append(
                fit_track(dataset.model, cams, track.observations, config, weights)
            )
        _, aggregate = evaluate_tracks(results, dataset.tracks, dataset.gt)
        if not aggregate:
            row["status"] = "error: no ground truth overlaps the tracks"
        else:
            row["me_p"] = aggregate["me_p"]
            row["me_v"] = aggregate["me_v"]
    except Exception as exc:  # keep the grid going, record the failure
        row["status"] = "error: " + " ".join(str(exc).split())[:200]
        traceback.print_exc()
    return row


def _run_cell_by_index(args) -> tuple[int, dict]:
    root, index, cell, base_fit, weights = args
    dataset = load_dataset(root)
    return index, run_cell(dataset, cell, base_fit, weights)


def sort_rows(rows: list[dict]) -> list[dict]:
    """Worst-to-best by me_p; failed rows first; deterministic tie-break."""
    def key(row):
        failed = row["status"] != "ok"
        p = row["me_p"]
        return (
            0 if failed else 1,
            -(p if np.isfinite(p) else 0.0),
            row["window_size"],
            row["lambda_vel"],
            row["acc"],
            row["med"],
            row["size"],
            row["replicate"],
        )
    return sorted(rows, key=key)


def run_grid(
    dataset_root: str | Path,
    spec: dict,
    base_fit: FitConfig | None = None,
    weights: LossWeights | None = None,
    workers: int = 1,
) -> list[dict]:
    """Run every cell of the grid over the dataset and return sorted rows."""
    cells = enumerate_grid(spec)
    base_fit = base_fit or FitConfig()
    weights = weights or LossWeights()
    rows: list[dict | None] = [None] * len(cells)
    if workers <= 1:
        dataset = load_dataset(dataset_root)
        for i, cell in enumerate(cells):
            rows[i] = run_cell(dataset, cell, base_fit, weights)
    else:
        jobs = [(Path(dataset_root), i, c, base_fit, weights) for i, c in enumerate(cells)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for index, row in pool.map(_run_cell_by_index, jobs):
                rows[index] = row
    return sort_rows([r for r in rows if r is not None])
