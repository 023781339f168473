"""IoI-based filters for detections, tentative tracks and predicted tracks.

All functions work on plain arrays of ``(left, top, width, height)`` boxes and
lists of ``(track_id, det_index)`` matches, which keeps them independent of the
pipeline's track objects.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .association import appearance_distance
from .geometry import as_box_array, centers, ioi_matrix
from .occupancy import MapConfig, OccupancyGrid, in_probability_map, is_crowded


@dataclass(frozen=True)
class FilterConfig:
    enabled: bool = True
    det_ioi_gate: float = 0.7
    ambiguous_ioi_gate: float = 0.5
    reid_closeness_eps: float = 0.05
    thresh3: float = 3.0
    far_ioi_zero_frames: int = 5

    def __post_init__(self):
        for name in ("det_ioi_gate", "ambiguous_ioi_gate"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")
        if self.thresh3 <= 0:
            raise ValueError("thresh3 must be positive")
        if self.reid_closeness_eps < 0 or self.far_ioi_zero_frames < 1:
            raise ValueError("reid_closeness_eps must be >= 0 and far_ioi_zero_frames >= 1")


def filter_detections_stage1(boxes, confidences, gate: float = 0.7) -> np.ndarray:
    """Keep-mask removing detections mostly covered by another detection.

    A box whose IoI against some other box exceeds ``gate`` is dropped. When
    two boxes cover each other beyond the gate, only the lower-confidence one
    goes (the smaller one on a tie). Removals are decided on the input set as a
    whole, so the filter is idempotent.
    """
    boxes = as_box_array(boxes)
    n = len(boxes)
    keep = np.ones(n, dtype=bool)
    if n < 2:
        return keep
    conf = np.asarray(confidences, dtype=float)
    area = boxes[:, 2] * boxes[:, 3]
    over = ioi_matrix(boxes, boxes) > gate
    np.fill_diagonal(over, False)
    for i, j in zip(*np.nonzero(over)):
        if over[j, i]:
            # mutual violation: drop the weaker box of the pair
            loser = i if (conf[i], area[i], -i) < (conf[j], area[j], -j) else j
            keep[loser] = False
        else:
            keep[i] = False
    return keep


def _multiplicity_mask(subjects, others, gate: float) -> np.ndarray:
    subjects = as_box_array(subjects)
    others = as_box_array(others)
    if len(subjects) == 0 or len(others) == 0:
        return np.ones(len(subjects), dtype=bool)
    hits = (ioi_matrix(subjects, others) > gate).sum(axis=1)
    return hits < 2


def filter_tentative_stage1(tentative_boxes, confirmed_boxes, gate: float = 0.5) -> np.ndarray:
    """Keep-mask dropping tentative tracks heavily covered by two or more normal/predicted tracks."""
    return _multiplicity_mask(tentative_boxes, confirmed_boxes, gate)


def filter_tentative_stage2(normal_matches, tentative_matches):
    """Drop tentative tracks whose detection was also claimed by a normal track.

    Returns ``(kept_tentative_matches, removed_tentative_ids)``.
    """
    claimed = {d for _, d in normal_matches}
    kept, removed = [], []
    for tid, d in tentative_matches:
        if d in claimed:
            removed.append(tid)
        else:
            kept.append((tid, d))
    return kept, removed


def filter_detections_stage2(
    matches,
    det_boxes,
    det_descriptors,
    track_ids,
    track_boxes,
    galleries,
    eps: float = 0.05,
):
    """Remove appearance matches that neighboring tracks could explain equally well.

    For each ``(track_id, det)`` match, the appearance distance of the detection
    is computed to every track whose box overlaps it (plus the matched track).
    When the two smallest distances are within ``eps`` the match is ambiguous
    and both the match and its detection are discarded.

    Returns ``(kept_matches, removed_matches)``.
    """
    if not matches or det_descriptors is None:
        return list(matches), []
    det_boxes = as_box_array(det_boxes)
    track_boxes = as_box_array(track_boxes)
    index = {tid: k for k, tid in enumerate(track_ids)}
    det_idx = [d for _, d in matches]
    overlap = ioi_matrix(det_boxes[det_idx], track_boxes) > 0.0 if len(track_boxes) else None

    kept, removed = [], []
    for m, (tid, d) in enumerate(matches):
        desc = det_descriptors[d]
        dists = []
        own = index.get(tid)
        if own is not None and len(galleries[own]):
            dists.append(appearance_distance(galleries[own], desc))
        if overlap is not None:
            for k in np.nonzero(overlap[m])[0]:
                if k == own or len(galleries[k]) == 0:
                    continue
                dists.append(appearance_distance(galleries[k], desc))
        if len(dists) >= 2:
            dists.sort()
            if dists[1] - dists[0] < eps:
                removed.append((tid, d))
                continue
        kept.append((tid, d))
    return kept, removed


def filter_detections_stage3(det_boxes, track_boxes, gate: float = 0.5) -> np.ndarray:
    """Keep-mask dropping unmatched detections with two or more plausible tracks."""
    return _multiplicity_mask(det_boxes, track_boxes, gate)


class PredictedFate(enum.Enum):
    KEEP = "keep"
    DISAPPEAR = "disappear"
    DELETE = "delete"


@dataclass
class PredictedFilterResult:
    accepted: list = field(default_factory=list)
    to_disappear: list = field(default_factory=list)
    to_delete: list = field(default_factory=list)
    isolated_frames: dict = field(default_factory=dict)


def resolve_predicted_matches(reid_matches, iou_matches, track_boxes: dict, det_boxes, thresh3: float = 3.0):
    """Merge IoU and appearance matches of predicted tracks into one consistent set.

    Matches whose center distance exceeds ``thresh3`` detection widths are
    dropped first. On any conflict (same detection or same track claimed
    twice) the appearance match wins.
    """
    det_boxes = as_box_array(det_boxes)
    det_centers = centers(det_boxes)

    def near(match):
        tid, d = match
        b = track_boxes[tid]
        c = np.array([b[0] + b[2] / 2.0, b[1] + b[3] / 2.0])
        return np.linalg.norm(c - det_centers[d]) / det_boxes[d, 2] <= thresh3

    reid = [m for m in reid_matches if near(m)]
    iou = [m for m in iou_matches if near(m)]
    accepted = list(reid)
    used_t = {t for t, _ in reid}
    used_d = {d for _, d in reid}
    for t, d in iou:
        if t in used_t or d in used_d:
            continue
        accepted.append((t, d))
        used_t.add(t)
        used_d.add(d)
    accepted.sort()
    return accepted


def classify_unmatched_predicted(
    box,
    isolated_frames: int,
    prob_map: OccupancyGrid,
    pred_map: OccupancyGrid,
    map_cfg: MapConfig,
    cfg: FilterConfig,
) -> PredictedFate:
    if not in_probability_map(prob_map, box, map_cfg):
        return PredictedFate.DISAPPEAR
    if not is_crowded(pred_map, box, map_cfg) and isolated_frames >= cfg.far_ioi_zero_frames:
        return PredictedFate.DELETE
    return PredictedFate.KEEP


def filter_predicted(
    reid_matches,
    iou_matches,
    track_boxes: dict,
    det_boxes,
    normal_boxes,
    prob_map: OccupancyGrid,
    pred_map: OccupancyGrid,
    isolated_frames: dict | None = None,
    map_cfg: MapConfig = MapConfig(),
    cfg: FilterConfig = FilterConfig(),
) -> PredictedFilterResult:
    """Accept predicted-track matches and decide the fate of the rest.

    ``track_boxes`` maps every predicted track id to its box this frame and
    ``isolated_frames`` holds each track's count of consecutive frames without
    any overlap with a normal track (updated and returned in the result).
    """
    isolated_frames = dict(isolated_frames or {})
    accepted = resolve_predicted_matches(reid_matches, iou_matches, track_boxes, det_boxes, cfg.thresh3)
    matched = {t for t, _ in accepted}
    result = PredictedFilterResult(accepted=accepted)

    normal_boxes = as_box_array(normal_boxes)
    for tid in sorted(track_boxes):
        if tid in matched:
            isolated_frames[tid] = 0
            continue
        box = np.asarray(track_boxes[tid], dtype=float)
        touching = len(normal_boxes) and (ioi_matrix(box, normal_boxes) > 0).any()
        isolated_frames[tid] = 0 if touching else isolated_frames.get(tid, 0) + 1
        fate = classify_unmatched_predicted(box, isolated_frames[tid], prob_map, pred_map, map_cfg, cfg)
        if fate is PredictedFate.DISAPPEAR:
            result.to_disappear.append(tid)
        elif fate is PredictedFate.DELETE:
            result.to_delete.append(tid)
    result.isolated_frames = isolated_frames
    return result
