"""File formats consumed and produced by the pipeline.

All formats are plain text or npz and documented in the README:

- detections CSV: ``frame,bird_id,keypoint_id,x,y,confidence``
- ground-truth CSV: ``frame,bird_id,keypoint_id,x,y,visible``
- masks: JSON-lines RLE records, or one 8-bit PNG per (frame, bird)
- tracks CSV: ``track_id,frame,bird_id,x0,y0,x1,y1``
- per-track observations: npz with keypoints, masks, boxes and crop affines
- fit results: npz with pose parameters, projected keypoints, loss trace
- metrics report: JSON with per-track and aggregate me_p / me_v
- camera: versioned YAML

Floats in text outputs are written with ``repr`` (shortest round-trip), so
identical runs produce byte-identical files.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import yaml
from PIL import Image

from .errors import FileFormatError
from .fitter import FitConfig, FitDiagnostics, FitResult
from .losses import ObservationFrame
from .preprocess import CropTransform
from .skeleton import Camera, PoseParams

CAMERA_FORMAT = "birdfit-camera/1"

DETECTIONS_HEADER = ["frame", "bird_id", "keypoint_id", "x", "y", "confidence"]
GT_HEADER = ["frame", "bird_id", "keypoint_id", "x", "y", "visible"]
TRACKS_HEADER = ["track_id", "frame", "bird_id", "x0", "y0", "x1", "y1"]
GRID_HEADER = [
    "window_size", "lambda_vel", "acc", "med", "size", "replicate",
    "me_p", "me_v", "status",
]


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


# ---------------------------------------------------------------------------
# keypoint tables
# ---------------------------------------------------------------------------

def write_detections(path: str | Path, detections: dict[tuple[int, int], np.ndarray]) -> None:
    """Write {(frame, bird_id): (K, 3) keypoints} as a detections CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(DETECTIONS_HEADER)
        for (frame, bird), kp in sorted(detections.items()):
            for k, (x, y, c) in enumerate(np.asarray(kp, dtype=np.float64)):
                writer.writerow([frame, bird, k, _fmt(x), _fmt(y), _fmt(c)])


def read_detections(path: str | Path) -> dict[tuple[int, int], np.ndarray]:
    """Read a detections CSV into {(frame, bird_id): (K, 3)}."""
    rows: dict[tuple[int, int], dict[int, tuple[float, float, float]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != DETECTIONS_HEADER:
            raise FileFormatError(f"{path}: expected header {DETECTIONS_HEADER}, got {header}")
        for line in reader:
            frame, bird, k = int(line[0]), int(line[1]), int(line[2])
            rows.setdefault((frame, bird), {})[k] = (float(line[3]), float(line[4]), float(line[5]))
    out = {}
    for key, kps in rows.items():
        n = max(kps) + 1
        arr = np.zeros((n, 3))
        for k, xyc in kps.items():
            arr[k] = xyc
        out[key] = arr
    return out


def write_ground_truth(
    path: str | Path,
    gt: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]],
) -> None:
    """Write {(frame, bird): ((K, 2) xy, (K,) visible)} as a ground-truth CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GT_HEADER)
        for (frame, bird), (xy, visible) in sorted(gt.items()):
            for k in range(len(xy)):
                writer.writerow(
                    [frame, bird, k, _fmt(xy[k][0]), _fmt(xy[k][1]), int(bool(visible[k]))]
                )


def read_ground_truth(path: str | Path) -> dict[tuple[int, int], tuple[np.ndarray, np.ndarray]]:
    rows: dict[tuple[int, int], dict[int, tuple[float, float, bool]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GT_HEADER:
            raise FileFormatError(f"{path}: expected header {GT_HEADER}, got {header}")
        for line in reader:
            frame, bird, k = int(line[0]), int(line[1]), int(line[2])
            rows.setdefault((frame, bird), {})[k] = (
                float(line[3]), float(line[4]), bool(int(line[5]))
            )
    out = {}
    for key, kps in rows.items():
        n = max(kps) + 1
        xy = np.zeros((n, 2))
        vis = np.zeros(n, dtype=bool)
        for k, (x, y, v) in kps.items():
            xy[k] = (x, y)
            vis[k] = v
        out[key] = (xy, vis)
    return out


# ---------------------------------------------------------------------------
# masks
# ---------------------------------------------------------------------------

def mask_to_rle(mask: np.ndarray) -> list[int]:
    """Run lengths of the row-major flattened mask, zeros first."""
    flat = (np.asarray(mask).reshape(-1) > 0).astype(np.int8)
    changes = np.nonzero(np.diff(flat))[0] + 1
    bounds = np.concatenate([[0], changes, [flat.size]])
    runs = np.diff(bounds).tolist()
    if flat.size and flat[0] == 1:
        runs = [0] + runs
    return [int(r) for r in runs]


def rle_to_mask(counts: list[int], height: int, width: int) -> np.ndarray:
    total = sum(counts)
    if total != height * width:
        raise FileFormatError(f"RLE covers {total} pixels, mask has {height * width}")
    flat = np.zeros(height * width, dtype=np.uint8)
    pos, value = 0, 0
    for run in counts:
        if value:
            flat[pos:pos + run] = 1
        pos += run
        value ^= 1
    return flat.reshape(height, width)


def write_masks_rle(path: str | Path, masks: dict[tuple[int, int], np.ndarray]) -> None:
    """Write {(frame, bird): (H, W) mask} as JSON-lines RLE records."""
    with open(path, "w") as fh:
        for (frame, bird), mask in sorted(masks.items()):
            mask = np.asarray(mask)
            record = {
                "frame": int(frame),
                "bird_id": int(bird),
                "height": int(mask.shape[0]),
                "width": int(mask.shape[1]),
                "counts": mask_to_rle(mask),
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def read_masks_rle(path: str | Path) -> dict[tuple[int, int], np.ndarray]:
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                out[(int(rec["frame"]), int(rec["bird_id"]))] = rle_to_mask(
                    rec["counts"], rec["height"], rec["width"]
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise FileFormatError(f"{path}:{lineno}: bad RLE record ({exc})") from exc
    return out


def _mask_png_name(frame: int, bird: int) -> str:
    return f"mask_f{frame:06d}_b{bird:03d}.png"


def write_mask_pngs(directory: str | Path, masks: dict[tuple[int, int], np.ndarray]) -> None:
    """Write each mask as an 8-bit grayscale PNG (0 / 255)."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for (frame, bird), mask in sorted(masks.items()):
        img = ((np.asarray(mask) > 0) * np.uint8(255))
        Image.fromarray(img, mode="L").save(directory / _mask_png_name(frame, bird))


def read_mask_pngs(directory: str | Path) -> dict[tuple[int, int], np.ndarray]:
    out = {}
    for path in sorted(Path(directory).glob("mask_f*_b*.png")):
        stem = path.stem  # mask_f000000_b000
        try:
            frame = int(stem.split("_")[1][1:])
            bird = int(stem.split("_")[2][1:])
        except (IndexError, ValueError) as exc:
            raise FileFormatError(f"unrecognized mask file name {path.name}") from exc
        out[(frame, bird)] = (np.asarray(Image.open(path).convert("L")) > 127).astype(np.uint8)
    return out


def read_masks(path: str | Path) -> dict[tuple[int, int], np.ndarray]:
    """Read masks from an RLE file or a PNG directory."""
    p = Path(path)
    if p.is_dir():
        return read_mask_pngs(p)
    return read_masks_rle(p)


# ---------------------------------------------------------------------------
# tracks
# ---------------------------------------------------------------------------

def write_tracks(path: str | Path, rows: list[tuple[int, int, int, np.ndarray]]) -> None:
    """Write (track_id, frame, bird_id, bbox) rows as a tracks CSV."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACKS_HEADER)
        for track_id, frame, bird, bbox in rows:
            writer.writerow(
                [track_id, frame, bird] + [_fmt(float(v)) for v in bbox]
            )


def read_tracks(path: str | Path) -> list[tuple[int, int, int, np.ndarray]]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != TRACKS_HEADER:
            raise FileFormatError(f"{path}: expected header {TRACKS_HEADER}, got {header}")
        for line in reader:
            rows.append(
                (int(line[0]), int(line[1]), int(line[2]),
                 np.array([float(v) for v in line[3:7]]))
            )
    return rows


# ---------------------------------------------------------------------------
# per-track observations and fit results (npz)
# ---------------------------------------------------------------------------

@dataclass
class TrackObservations:
    """One track's preprocessed observation sequence plus crop affines."""

    track_id: int
    observations: list[ObservationFrame]
    transforms: list[CropTransform]
    bird_ids: np.ndarray  # (T,) detection bird id per frame, -1 if unknown


def save_observations(
    path: str | Path,
    observations: list[ObservationFrame],
    transforms: list[CropTransform],
    track_id: int = 0,
    bird_ids: np.ndarray | None = None,
) -> None:
    if bird_ids is None:
        bird_ids = np.full(len(observations), -1, dtype=np.int64)
    np.savez_compressed(
        path,
        track_id=np.int64(track_id),
        frames=np.array([o.frame_index for o in observations], dtype=np.int64),
        keypoints=np.stack([o.keypoints for o in observations]),
        masks=np.stack([o.mask.astype(np.uint8) for o in observations]),
        bboxes=np.stack([o.bbox for o in observations]),
        transform_scale=np.array([t.scale for t in transforms]),
        transform_offset=np.array([t.offset for t in transforms]),
        bird_ids=np.asarray(bird_ids, dtype=np.int64),
    )


def load_observations(path: str | Path) -> TrackObservations:
    with np.load(path) as data:
        try:
            frames = data["frames"]
            observations = [
                ObservationFrame(
                    keypoints=data["keypoints"][i],
                    mask=data["masks"][i],
                    bbox=data["bboxes"][i],
                    frame_index=int(frames[i]),
                )
                for i in range(len(frames))
            ]
            transforms = [
                CropTransform(
                    scale=float(data["transform_scale"][i]),
                    offset=tuple(data["transform_offset"][i]),
                )
                for i in range(len(frames))
            ]
            return TrackObservations(
                track_id=int(data["track_id"]),
                observations=observations,
                transforms=transforms,
                bird_ids=data["bird_ids"],
            )
        except KeyError as exc:
            raise FileFormatError(f"{path}: missing array {exc}") from exc


def save_fit_result(
    path: str | Path, result: FitResult, config: FitConfig, track_id: int = 0
) -> None:
    np.savez_compressed(
        path,
        track_id=np.int64(track_id),
        frames=result.frame_indices,
        kappa=np.stack([p.kappa for p in result.poses]),
        sigma=np.array([p.sigma for p in result.poses]),
        theta_g=np.stack([p.theta_g for p in result.poses]),
        theta_p=np.stack([p.theta_p for p in result.poses]),
        projected_keypoints=result.projected_keypoints,
        loss_trace=result.loss_trace,
        diagnostics=np.bytes_(json.dumps(asdict(result.diagnostics)).encode()),
        config=np.bytes_(json.dumps(asdict(config)).encode()),
    )


def load_fit_result(path: str | Path) -> tuple[FitResult, FitConfig, int]:
    with np.load(path) as data:
        try:
            frames = data["frames"]
            poses = [
                PoseParams(
                    kappa=data["kappa"][i],
                    sigma=float(data["sigma"][i]),
                    theta_g=data["theta_g"][i],
                    theta_p=data["theta_p"][i],
                )
                for i in range(len(frames))
            ]
            diag = json.loads(bytes(data["diagnostics"]).decode())
            cfg = json.loads(bytes(data["config"]).decode())
            cfg["adam_betas"] = tuple(cfg["adam_betas"])
            result = FitResult(
                poses=poses,
                projected_keypoints=data["projected_keypoints"],
                loss_trace=data["loss_trace"],
                frame_indices=frames,
                diagnostics=FitDiagnostics(**diag),
            )
            return result, FitConfig(**cfg), int(data["track_id"])
        except KeyError as exc:
            raise FileFormatError(f"{path}: missing array {exc}") from exc


# ---------------------------------------------------------------------------
# metrics report, grid table, camera
# ---------------------------------------------------------------------------

def write_metrics_report(path: str | Path, per_track: dict[int, dict], aggregate: dict) -> None:
    doc = {
        "tracks": {str(tid): vals for tid, vals in sorted(per_track.items())},
        "aggregate": aggregate,
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def write_grid_table(path: str | Path, rows: list[dict]) -> None:
    """Write grid results as delimited text, one row per configuration."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GRID_HEADER)
        for row in rows:
            writer.writerow([_fmt(row[k]) for k in GRID_HEADER])


def read_grid_table(path: str | Path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != GRID_HEADER:
            raise FileFormatError(f"{path}: expected header {GRID_HEADER}, got {header}")
        for line in reader:
            rows.append(dict(zip(GRID_HEADER, line)))
    return rows


def save_camera(path: str | Path, camera: Camera) -> None:
    doc = {
        "format": CAMERA_FORMAT,
        "focal": float(camera.focal),
        "principal": [float(v) for v in camera.principal],
        "fixed_depth": float(camera.fixed_depth),
        "image_size": [int(v) for v in camera.image_size],
    }
    Path(path).write_text(yaml.safe_dump(doc, sort_keys=False))


def load_camera(path: str | Path) -> Camera:
    doc = yaml.safe_load(Path(path).read_text())
    if not isinstance(doc, dict) or doc.get("format") != CAMERA_FORMAT:
        raise FileFormatError(f"{path}: not a {CAMERA_FORMAT} file")
    return Camera(
        focal=doc["focal"],
        principal=np.array(doc["principal"]),
        fixed_depth=doc["fixed_depth"],
        image_size=tuple(doc["image_size"]),
    )
