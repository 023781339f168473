"""Per-frame MapTrack procedure, track lifecycle and the SORT-style baseline."""
from __future__ import annotations

import enum
import logging
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import kalman
from .association import (
    AppearanceGallery,
    AssociationConfig,
    dual_gate_associate,
    iou_associate,
    reid_associate,
)
from .filtering import (
    FilterConfig,
    filter_detections_stage1,
    filter_detections_stage2,
    filter_detections_stage3,
    filter_predicted,
    filter_tentative_stage1,
    filter_tentative_stage2,
)
from .geometry import BoundingBox
from .io_formats import Detection, FrameDetections
from .kalman import KalmanTrackState, NoiseConfig
from .occupancy import (
    MapConfig,
    OccupancyGrid,
    accumulate_probability,
    build_prediction_map,
    empty_grid,
    in_probability_map,
    is_crowded,
)

log = logging.getLogger(__name__)


class TrackStatus(enum.Enum):
    TENTATIVE = "tentative"
    NORMAL = "normal"
    PREDICTED = "predicted"
    DISAPPEARED = "disappeared"
    DELETED = "deleted"


ALLOWED_TRANSITIONS = {
    TrackStatus.TENTATIVE: {TrackStatus.NORMAL, TrackStatus.DELETED},
    TrackStatus.NORMAL: {TrackStatus.PREDICTED, TrackStatus.DISAPPEARED},
    TrackStatus.PREDICTED: {TrackStatus.NORMAL, TrackStatus.DISAPPEARED, TrackStatus.DELETED},
    TrackStatus.DISAPPEARED: {TrackStatus.NORMAL, TrackStatus.DELETED},
    TrackStatus.DELETED: set(),
}


class TransitionError(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    n_init: int = 3
    max_predicted_age: int = 60
    repository_capacity: int = 200
    repository_max_age: int = 900
    emit_predicted: bool = True
    # tracks born on the first processed frame start confirmed
    activate_first_frame: bool = True
    # drop unmatched confirmed tracks at once, as the baseline does
    delete_on_miss: bool = False
    min_confidence: float = 0.25
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    maps: MapConfig = field(default_factory=MapConfig)
    association: AssociationConfig = field(default_factory=AssociationConfig)
    filters: FilterConfig = field(default_factory=FilterConfig)

    def __post_init__(self):
        if self.n_init < 1:
            raise ValueError("n_init must be >= 1")
        if self.max_predicted_age < 1 or self.repository_capacity < 0 or self.repository_max_age < 0:
            raise ValueError("ages and capacities must be non-negative")


@dataclass
class Track:
    id: int
    status: TrackStatus
    kalman: KalmanTrackState
    gallery: AppearanceGallery
    hits: int = 1
    frames_since_update: int = 0
    frames_isolated: int = 0
    frames_predicted: int = 0
    age: int = 0
    history: list = field(default_factory=list, repr=False)

    def set_status(self, new: TrackStatus) -> None:
        if new is self.status:
            return
        if new not in ALLOWED_TRANSITIONS[self.status]:
            raise TransitionError(f"track {self.id}: illegal transition {self.status.value} -> {new.value}")
        self.history.append((self.status, new))
        self.status = new

    def box_array(self) -> np.ndarray:
        return self.kalman.box_array()

    def box(self) -> BoundingBox:
        return self.kalman.box()


@dataclass
class RepositoryEntry:
    track: Track
    gallery: AppearanceGallery
    last_seen: int
    last_box: BoundingBox


class FeatureRepository:
    """Disappeared tracks kept for appearance re-identification.

    Bounded both in size and in age; evicted tracks are marked deleted.
    """

    def __init__(self, capacity: int = 200, max_age: int = 900):
        self.capacity = capacity
        self.max_age = max_age
        self.entries: OrderedDict[int, RepositoryEntry] = OrderedDict()

    def __len__(self):
        return len(self.entries)

    def __contains__(self, track_id):
        return track_id in self.entries

    def add(self, track: Track, frame: int) -> list[Track]:
        self.entries[track.id] = RepositoryEntry(track, track.gallery.copy(), frame, track.box())
        self.entries.move_to_end(track.id)
        return self.evict(frame)

    def pop(self, track_id: int) -> Track:
        return self.entries.pop(track_id).track

    def tracks(self) -> list[Track]:
        return [e.track for e in self.entries.values()]

    def evict(self, frame: int) -> list[Track]:
        evicted = []
        for tid in [t for t, e in self.entries.items() if frame - e.last_seen > self.max_age]:
            evicted.append(self.entries.pop(tid).track)
        while len(self.entries) > self.capacity:
            evicted.append(self.entries.popitem(last=False)[1].track)
        for t in evicted:
            t.set_status(TrackStatus.DELETED)
        return evicted


def _frame_arrays(entries: list[Detection]):
    n = len(entries)
    boxes = np.array([d.box.to_array() for d in entries]).reshape(n, 4)
    conf = np.array([d.confidence for d in entries], dtype=float)
    with_desc = [d.descriptor is not None for d in entries]
    if n and all(with_desc):
        desc = np.array([np.asarray(d.descriptor, float) for d in entries])
        desc = desc / np.linalg.norm(desc, axis=1, keepdims=True)
    elif any(with_desc):
        raise ValueError(f"{sum(with_desc)} of {n} detections carry descriptors; all or none must")
    else:
        desc = None
    return boxes, conf, desc


def _remap(matches, rows, cols):
    """Translate local (row, col) matches to (track_id, det_index)."""
    return [(rows[r], cols[c]) for r, c in matches]


class MapTracker:
    """Online tracker; call :meth:`step` once per frame in increasing order."""

    def __init__(self, frame_size: tuple[int, int], config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self.frame_size = tuple(frame_size)
        self.prob_map: OccupancyGrid = empty_grid(self.frame_size, self.config.maps.cell_size)
        self.pred_map: OccupancyGrid | None = None
        self.tracks: dict[int, Track] = {}
        self.repository = FeatureRepository(self.config.repository_capacity, self.config.repository_max_age)
        self.frame_index: int | None = None
        self._first_frame: int | None = None
        self._next_id = 1

    # -- helpers --------------------------------------------------------------

    def _by_status(self, status: TrackStatus) -> list[Track]:
        return [t for t in self.tracks.values() if t.status is status]

    def _new_track(self, det: Detection, descriptor, frame: int) -> Track:
        cfg = self.config
        gallery = AppearanceGallery(cfg.association.gallery_capacity)
        if descriptor is not None:
            gallery.push(descriptor)
        confirmed = cfg.activate_first_frame and frame == self._first_frame
        track = Track(
            id=self._next_id,
            status=TrackStatus.NORMAL if confirmed or cfg.n_init <= 1 else TrackStatus.TENTATIVE,
            kalman=kalman.init_state(det.box, cfg.noise),
            gallery=gallery,
        )
        self._next_id += 1
        self.tracks[track.id] = track
        return track

    def _delete(self, track: Track) -> None:
        track.set_status(TrackStatus.DELETED)
        self.tracks.pop(track.id, None)

    def _disappear(self, track: Track, frame: int) -> None:
        track.set_status(TrackStatus.DISAPPEARED)
        if self.config.delete_on_miss or self.repository.capacity == 0:
            self._delete(track)
            return
        for evicted in self.repository.add(track, frame):
            self.tracks.pop(evicted.id, None)

    # -- main loop ------------------------------------------------------------

    def step(self, frame_index: int, detections) -> list[tuple[int, BoundingBox]]:
        """Process one frame and return ``(track_id, box)`` for emitted tracks."""
        if isinstance(detections, FrameDetections):
            entries = detections.entries
        else:
            entries = list(detections)
        if self.frame_index is not None and frame_index <= self.frame_index:
            raise ValueError(f"frame {frame_index} is not after frame {self.frame_index}")
        if self._first_frame is None:
            self._first_frame = frame_index
        self.frame_index = frame_index
        cfg = self.config
        fcfg = cfg.filters
        acfg = cfg.association

        boxes, conf, desc = _frame_arrays(entries)
        use_reid = desc is not None

        # 1. drop detections swallowed by other detections
        if fcfg.enabled and len(boxes):
            keep = filter_detections_stage1(boxes, conf, fcfg.det_ioi_gate)
        else:
            keep = np.ones(len(boxes), dtype=bool)
        live = [int(i) for i in np.nonzero(keep)[0]]
        accumulate_probability(self.prob_map, boxes[live])

        # 2. Kalman prediction for every track with a position
        for t in self.tracks.values():
            if t.status in (TrackStatus.TENTATIVE, TrackStatus.NORMAL, TrackStatus.PREDICTED):
                t.kalman = kalman.predict(t.kalman, cfg.noise)
                t.age += 1
                t.frames_since_update += 1

        tentative = self._by_status(TrackStatus.TENTATIVE)
        normal = self._by_status(TrackStatus.NORMAL)
        predicted = self._by_status(TrackStatus.PREDICTED)
        confirmed_boxes = np.array([t.box_array() for t in normal + predicted]).reshape(-1, 4)

        # 3. tentative tracks sitting on two or more confirmed tracks
        if fcfg.enabled and tentative:
            tboxes = np.array([t.box_array() for t in tentative])
            mask = filter_tentative_stage1(tboxes, confirmed_boxes, fcfg.ambiguous_ioi_gate)
            for t, ok in zip(tentative, mask):
                if not ok:
                    self._delete(t)
            tentative = [t for t, ok in zip(tentative, mask) if ok]

        # 4-5. tentative tracks: IoU association, unmatched ones are deleted
        m_tent = self._iou_match(tentative, live, boxes, acfg.iou_gate)
        matched_tent = {tid for tid, _ in m_tent}
        for t in tentative:
            if t.id not in matched_tent:
                self._delete(t)

        # 6. normal tracks: strict IoU and appearance agreement
        m_normal = []
        if normal and live:
            rows = [t.id for t in normal]
            res, _, _ = dual_gate_associate(
                np.array([t.box_array() for t in normal]),
                [t.gallery for t in normal],
                boxes[live],
                desc[live] if use_reid else None,
                acfg,
            )
            m_normal = _remap(res, rows, live)

        # 7. a detection claimed by a normal track is not given to a tentative one
        if fcfg.enabled:
            m_tent, removed = filter_tentative_stage2(m_normal, m_tent)
            for tid in removed:
                self._delete(self.tracks[tid])
        else:
            claimed = {d for _, d in m_normal}
            for tid, d in [m for m in m_tent if m[1] in claimed]:
                self._delete(self.tracks[tid])
            m_tent = [m for m in m_tent if m[1] not in claimed]
        matches: list[tuple[int, int]] = m_normal + m_tent
        used = {d for _, d in matches}
        pool = [d for d in live if d not in used]

        # 8. split the remaining normal tracks by crowding
        self.pred_map = build_prediction_map(
            self.frame_size, confirmed_boxes, cfg.maps.cell_size
        )
        matched_normal = {tid for tid, _ in m_normal}
        ut_normal = [t for t in normal if t.id not in matched_normal]
        crowded, uncrowded = [], []
        for t in ut_normal:
            (crowded if is_crowded(self.pred_map, t.box_array(), cfg.maps) else uncrowded).append(t)

        # 9. uncrowded: IoU
        m_unc = self._iou_match(uncrowded, pool, boxes, acfg.iou_gate)
        pool = [d for d in pool if d not in {d for _, d in m_unc}]

        # 10. crowded: appearance (IoU when no descriptors are available)
        if use_reid:
            m_crowd = self._reid_match(crowded, pool, desc, acfg.reid_gate)
        else:
            m_crowd = self._iou_match(crowded, pool, boxes, acfg.iou_gate)

        # 11. drop appearance matches that a neighboring track explains as well
        if fcfg.enabled and use_reid and m_crowd:
            neighbors = normal + predicted
            m_crowd, removed = filter_detections_stage2(
                m_crowd,
                boxes,
                desc,
                [t.id for t in neighbors],
                np.array([t.box_array() for t in neighbors]),
                [t.gallery for t in neighbors],
                fcfg.reid_closeness_eps,
            )
            dropped = {d for _, d in removed}
        else:
            dropped = set()
        claimed = {d for _, d in m_crowd} | dropped
        pool = [d for d in pool if d not in claimed]
        matches += m_unc + m_crowd

        # 12. normal tracks still unmatched
        matched_ids = {tid for tid, _ in matches}
        ut_normal = [t for t in ut_normal if t.id not in matched_ids]

        # 13. detections with several candidate tracks left are too ambiguous
        if fcfg.enabled and pool:
            cand = np.array([t.box_array() for t in ut_normal + predicted]).reshape(-1, 4)
            mask = filter_detections_stage3(boxes[pool], cand, fcfg.ambiguous_ioi_gate)
            pool = [d for d, ok in zip(pool, mask) if ok]

        # 14-16. predicted tracks: IoU and appearance over the same pool, then filtering
        pred_result = None
        if predicted:
            m_piou = self._iou_match(predicted, pool, boxes, acfg.iou_gate)
            m_preid = self._reid_match(predicted, pool, desc, acfg.reid_gate) if use_reid else []
            if fcfg.enabled:
                normal_now = [t.box_array() for t in normal]
                pred_result = filter_predicted(
                    m_preid,
                    m_piou,
                    {t.id: t.box_array() for t in predicted},
                    boxes,
                    np.array(normal_now).reshape(-1, 4),
                    self.prob_map,
                    self.pred_map,
                    {t.id: t.frames_isolated for t in predicted},
                    cfg.maps,
                    fcfg,
                )
                m_pred = pred_result.accepted
            else:
                m_pred = m_preid + [m for m in m_piou if m[0] not in {t for t, _ in m_preid}
                                    and m[1] not in {d for _, d in m_preid}]
            matches += m_pred
            pool = [d for d in pool if d not in {d for _, d in m_pred}]

        # 17-18. disappeared tracks: appearance only
        if use_reid and len(self.repository) and pool:
            gone = self.repository.tracks()
            m_gone = self._reid_match(gone, pool, desc, acfg.reid_gate)
            matches += m_gone
            pool = [d for d in pool if d not in {d for _, d in m_gone}]

        # 19. post-processing
        self._post_process(frame_index, matches, pool, ut_normal, predicted, pred_result, entries, desc)
        return self.outputs()

    def _iou_match(self, tracks: list[Track], pool: list[int], boxes, gate: float):
        if not tracks or not pool:
            return []
        res, _, _ = iou_associate(np.array([t.box_array() for t in tracks]), boxes[pool], gate)
        return _remap(res, [t.id for t in tracks], pool)

    def _reid_match(self, tracks: list[Track], pool: list[int], desc, gate: float):
        if not tracks or not pool or desc is None:
            return []
        res, _, _ = reid_associate([t.gallery for t in tracks], desc[pool], gate)
        return _remap(res, [t.id for t in tracks], pool)

    def _post_process(self, frame, matches, pool, ut_normal, predicted, pred_result, entries, desc):
        cfg = self.config
        det_ids = [d for _, d in matches]
        if len(det_ids) != len(set(det_ids)) or len(matches) != len({t for t, _ in matches}):
            raise AssertionError("a detection or track was associated twice in one frame")

        for tid, d in matches:
            if tid in self.repository:
                track = self.repository.pop(tid)
                self.tracks[tid] = track
            else:
                track = self.tracks[tid]
            det = entries[d]
            if track.status is TrackStatus.DISAPPEARED:
                # stale motion state: restart the filter at the detection
                track.kalman = kalman.init_state(det.box, cfg.noise)
                track.set_status(TrackStatus.NORMAL)
            else:
                track_class = "predicted" if track.status is TrackStatus.PREDICTED else "normal"
                ratio = kalman.deformation_ratio(track.box(), det.box)
                mult = kalman.covariance_multiplier(ratio, track_class, cfg.noise)
                track.kalman = kalman.update(track.kalman, det.box, mult, cfg.noise)
            if desc is not None:
                track.gallery.push(desc[d])
            track.hits += 1
            track.frames_since_update = 0
            track.frames_isolated = 0
            track.frames_predicted = 0
            if track.status is TrackStatus.PREDICTED:
                track.set_status(TrackStatus.NORMAL)
            elif track.status is TrackStatus.TENTATIVE and track.hits >= cfg.n_init:
                track.set_status(TrackStatus.NORMAL)

        # unmatched predicted tracks
        if pred_result is not None:
            for tid, n in pred_result.isolated_frames.items():
                if tid in self.tracks:
                    self.tracks[tid].frames_isolated = n
            doomed = set(pred_result.to_delete)
            leaving = set(pred_result.to_disappear)
        else:
            doomed, leaving = set(), set()
        matched_ids = {t for t, _ in matches}
        for t in predicted:
            if t.id in matched_ids:
                continue
            t.frames_predicted += 1
            if cfg.delete_on_miss or t.id in doomed:
                self._delete(t)
            elif t.id in leaving or t.frames_predicted >= cfg.max_predicted_age:
                self.tracks.pop(t.id)
                self._disappear(t, frame)

        # unmatched normal tracks
        for t in ut_normal:
            if cfg.delete_on_miss:
                self.tracks.pop(t.id)
                self._disappear(t, frame)
            elif in_probability_map(self.prob_map, t.box_array(), cfg.maps):
                t.set_status(TrackStatus.PREDICTED)
                t.frames_predicted = 0
            else:
                self.tracks.pop(t.id)
                self._disappear(t, frame)

        for d in pool:
            self._new_track(entries[d], desc[d] if desc is not None else None, frame)

        for t in self.repository.evict(frame):
            self.tracks.pop(t.id, None)

    def outputs(self) -> list[tuple[int, BoundingBox]]:
        emit = {TrackStatus.NORMAL}
        if self.config.emit_predicted:
            emit.add(TrackStatus.PREDICTED)
        return [(t.id, t.box()) for t in sorted(self.tracks.values(), key=lambda t: t.id) if t.status in emit]

    def dump_maps(self) -> dict[str, str]:
        out = {"probability": self.prob_map.to_text()}
        if self.pred_map is not None:
            out["prediction"] = self.pred_map.to_text()
        return out


class BaselineTracker:
    """SORT-style comparator: Kalman prediction, IoU Hungarian, delete on first miss."""

    def __init__(self, frame_size: tuple[int, int], config: PipelineConfig | None = None):
        self.config = config or PipelineConfig()
        self.frame_size = tuple(frame_size)
        self.tracks: dict[int, Track] = {}
        self.frame_index: int | None = None
        self._first_frame: int | None = None
        self._next_id = 1

    def step(self, frame_index: int, detections) -> list[tuple[int, BoundingBox]]:
        entries = detections.entries if isinstance(detections, FrameDetections) else list(detections)
        if self.frame_index is not None and frame_index <= self.frame_index:
            raise ValueError(f"frame {frame_index} is not after frame {self.frame_index}")
        if self._first_frame is None:
            self._first_frame = frame_index
        self.frame_index = frame_index
        cfg = self.config
        boxes, _, _ = _frame_arrays(entries)

        tracks = list(self.tracks.values())
        for t in tracks:
            t.kalman = kalman.predict(t.kalman, cfg.noise)
        matches, unmatched_t, unmatched_d = [], list(range(len(tracks))), list(range(len(boxes)))
        if tracks and len(boxes):
            matches, unmatched_t, unmatched_d = iou_associate(
                np.array([t.box_array() for t in tracks]), boxes, cfg.association.iou_gate
            )
        for r, c in matches:
            t = tracks[r]
            t.kalman = kalman.update(t.kalman, entries[c].box, 1.0, cfg.noise)
            t.hits += 1
            if t.status is TrackStatus.TENTATIVE and t.hits >= cfg.n_init:
                t.set_status(TrackStatus.NORMAL)
        for r in unmatched_t:
            t = tracks[r]
            if t.status is TrackStatus.NORMAL:
                t.set_status(TrackStatus.DISAPPEARED)
            t.set_status(TrackStatus.DELETED)
            del self.tracks[t.id]
        for c in unmatched_d:
            confirmed = cfg.activate_first_frame and frame_index == self._first_frame
            t = Track(
                id=self._next_id,
                status=TrackStatus.NORMAL if confirmed or cfg.n_init <= 1 else TrackStatus.TENTATIVE,
                kalman=kalman.init_state(entries[c].box, cfg.noise),
                gallery=AppearanceGallery(1),
            )
            self._next_id += 1
            self.tracks[t.id] = t
        return [(t.id, t.box()) for t in sorted(self.tracks.values(), key=lambda t: t.id)
                if t.status is TrackStatus.NORMAL]


def make_tracker(frame_size, config: PipelineConfig | None = None, mode: str = "maptrack"):
    if mode == "maptrack":
        return MapTracker(frame_size, config)
    if mode == "baseline":
        return BaselineTracker(frame_size, config)
    raise ValueError(f"unknown mode {mode!r}")


def attach_embeddings(frames: Iterable[FrameDetections], embeddings: dict | None):
    """Yield frames with descriptors from ``{frame: (n, D)}`` attached in order."""
    for fd in frames:
        if embeddings is None:
            yield fd
            continue
        vecs = embeddings.get(fd.frame, np.zeros((0, 0)))
        if len(vecs) != len(fd.entries):
            raise ValueError(f"frame {fd.frame}: {len(fd.entries)} detections but {len(vecs)} descriptors")
        yield FrameDetections(
            fd.frame, [Detection(d.box, d.confidence, v) for d, v in zip(fd.entries, vecs)]
        )


def run_sequence(
    frames: Iterable[FrameDetections],
    frame_size: tuple[int, int],
    config: PipelineConfig | None = None,
    embeddings: dict | None = None,
    mode: str = "maptrack",
    frame_count: int | None = None,
    tracker=None,
) -> list[tuple[int, list[tuple[int, BoundingBox]]]]:
    """Track a whole sequence; frames missing from the stream are processed as empty.

    Returns ``[(frame, [(track_id, box), ...]), ...]`` for every frame from 1 to
    the last frame (or ``frame_count`` when larger).
    """
    tracker = tracker or make_tracker(frame_size, config, mode)
    results = []
    last = 0
    for fd in attach_embeddings(frames, embeddings):
        if fd.frame <= last:
            raise ValueError(f"frames out of order: {fd.frame} after {last}")
        for gap in range(last + 1, fd.frame):
            results.append((gap, tracker.step(gap, [])))
        results.append((fd.frame, tracker.step(fd.frame, fd)))
        last = fd.frame
    for gap in range(last + 1, (frame_count or 0) + 1):
        results.append((gap, tracker.step(gap, [])))
    return results


def flatten_results(results) -> list[tuple[int, int, BoundingBox]]:
    return [(frame, tid, box) for frame, outs in results for tid, box in outs]
