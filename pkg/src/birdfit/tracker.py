"""Greedy IoU tracking of per-frame detection boxes into identity tracks.

Matching is one-to-one in descending IoU order with deterministic
tie-breaking; a track that goes unmatched keeps its last box in memory and
dies on its fifth consecutive missed frame.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

DEFAULT_IOU_THRESHOLD = 0.1
DEFAULT_MEMORY = 5


def iou(a, b) -> float:
    """Intersection over union of two (x0, y0, x1, y1) boxes; 0 if either is degenerate."""
    ax0, ay0, ax1, ay1 = (float(v) for v in a)
    bx0, by0, bx1, by1 = (float(v) for v in b)
    area_a = max(0.0, ax1 - ax0) * max(0.0, ay1 - ay0)
    area_b = max(0.0, bx1 - bx0) * max(0.0, by1 - by0)
    if area_a <= 0.0 or area_b <= 0.0:
        return 0.0
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    return inter / (area_a + area_b - inter)


@dataclass
class TrackEntry:
    frame_index: int
    bbox: np.ndarray
    ref: Any = None  # caller payload, e.g. the detection's (frame, bird_id) key


@dataclass
class Track:
    """Identity-consistent sequence of detections for one bird."""

    track_id: int
    entries: list[TrackEntry] = field(default_factory=list)
    misses: int = 0

    @property
    def last_bbox(self) -> np.ndarray:
        return self.entries[-1].bbox

    @property
    def last_frame(self) -> int:
        return self.entries[-1].frame_index

    def frame_indices(self) -> list[int]:
        return [e.frame_index for e in self.entries]


class IouTracker:
    """Streaming tracker; feed frames in order through ``associate``."""

    def __init__(
        self,
        iou_threshold: float = DEFAULT_IOU_THRESHOLD,
        memory: int = DEFAULT_MEMORY,
    ):
        self.iou_threshold = float(iou_threshold)
        self.memory = int(memory)
        self.active: list[Track] = []
        self.terminated: list[Track] = []
        self._next_id = 0

    def associate(
        self,
        frame_index: int,
        detections,
        refs: list[Any] | None = None,
    ) -> list[tuple[int, int]]:
        """Match detections of one frame against live tracks.

        Greedy one-to-one assignment in descending IoU order (ties broken by
        lower track id, then lower detection index); matches below the
        threshold are rejected. Unmatched detections open new tracks.
        Unmatched tracks retain their last box and are terminated on the
        fifth consecutive miss.

        Args:
            frame_index: must be strictly greater than any previous call's.
            detections: iterable of (x0, y0, x1, y1).
            refs: optional per-detection payloads stored on the track entry.

        Returns:
            (track_id, detection_index) pairs, including new tracks.
        """
        boxes = [np.asarray(b, dtype=np.float64) for b in detections]
        if refs is None:
            refs = [None] * len(boxes)

        pairs = []
        for track in self.active:
            for d, box in enumerate(boxes):
                score = iou(track.last_bbox, box)
                if score >= self.iou_threshold and score > 0.0:
                    pairs.append((-score, track.track_id, d, track))
        pairs.sort(key=lambda p: (p[0], p[1], p[2]))

        matched_tracks: set[int] = set()
        matched_dets: set[int] = set()
        assignments: list[tuple[int, int]] = []
        for neg, track_id, d, track in pairs:
            if track_id in matched_tracks or d in matched_dets:
                continue
            matched_tracks.add(track_id)
            matched_dets.add(d)
            track.entries.append(TrackEntry(frame_index, boxes[d], refs[d]))
            track.misses = 0
            assignments.append((track_id, d))

        still_active: list[Track] = []
        for track in self.active:
            if track.track_id in matched_tracks:
                still_active.append(track)
                continue
            track.misses += 1
            if track.misses >= self.memory:
                self.terminated.append(track)
            else:
                still_active.append(track)
        self.active = still_active

        for d, box in enumerate(boxes):
            if d in matched_dets:
                continue
            track = Track(track_id=self._next_id, entries=[TrackEntry(frame_index, box, refs[d])])
            self._next_id += 1
            self.active.append(track)
            assignments.append((track.track_id, d))
        assignments.sort()
        return assignments

    def close(self) -> list[Track]:
        """Terminate all live tracks and return every track ever created."""
        self.terminated.extend(self.active)
        self.active = []
        self.terminated.sort(key=lambda t: t.track_id)
        return self.terminated


def track_boxes(
    frames: dict[int, list[tuple[np.ndarray, Any]]],
    iou_threshold: float = DEFAULT_IOU_THRESHOLD,
    memory: int = DEFAULT_MEMORY,
) -> list[Track]:
    """Track a whole clip given {frame_index: [(bbox, ref), ...]}."""
    tracker = IouTracker(iou_threshold=iou_threshold, memory=memory)
    for frame_index in sorted(frames):
        dets = frames[frame_index]
        tracker.associate(frame_index, [d[0] for d in dets], [d[1] for d in dets])
    return tracker.close()
