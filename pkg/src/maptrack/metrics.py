"""CLEAR-MOT (MOTA, IDSW, Frag, FP, FN) and identity (IDF1) metrics.

Frame-by-frame matching follows the CLEAR convention: correspondences from the
previous frame are kept while their IoU stays above the threshold, and the
remaining objects are matched with the Hungarian algorithm on ``1 - IoU``.
IDF1 uses a single global one-to-one mapping between ground-truth and
hypothesis identities that maximizes the number of jointly covered frames.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import iou_matrix
from .io_formats import FormatError


@dataclass
class EvalReport:
    mota: float
    idf1: float
    idsw: int
    frag: int
    fp: int
    fn: int
    gt_count: int
    idtp: int = 0
    # per ground-truth id: frames, matched frames, idsw, frag, idf1
    per_gt: dict = field(default_factory=dict, repr=False)
    # frame -> list of (gt_id, hyp_id)
    frame_matches: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.gt_count:
            expected = 1.0 - (self.fp + self.fn + self.idsw) / self.gt_count
            assert abs(self.mota - expected) < 1e-9, "MOTA identity violated"

    def as_dict(self) -> dict:
        return {
            "MOTA": self.mota,
            "IDF1": self.idf1,
            "IDSW": self.idsw,
            "Frag": self.frag,
            "FP": self.fp,
            "FN": self.fn,
            "GT": self.gt_count,
        }


def _keep_row(values: list[float]) -> bool:
    # MOT ground truth: column 7 is the "consider" flag, column 8 the class
    if len(values) >= 9 and values[6] == 0:
        return False
    if len(values) >= 9 and values[7] not in (1, -1):
        return False
    return True


def load_tracks(path) -> dict[int, list[tuple[int, np.ndarray]]]:
    """Read a MOT gt/result file into ``{frame: [(id, ltwh), ...]}``."""
    frames: dict[int, list] = defaultdict(list)
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values = [float(p) for p in line.split(",")]
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-numeric field") from None
        if len(values) < 6:
            raise FormatError(f"{path}:{lineno}: expected at least 6 fields")
        if not _keep_row(values):
            continue
        frames[int(values[0])].append((int(values[1]), np.array(values[2:6])))
    return dict(frames)


def rows_to_frames(rows) -> dict[int, list[tuple[int, np.ndarray]]]:
    """``(frame, id, box)`` rows, box as BoundingBox or ltwh sequence."""
    frames: dict[int, list] = defaultdict(list)
    for frame, oid, box in rows:
        arr = box.to_array() if hasattr(box, "to_array") else np.asarray(box, float)
        frames[int(frame)].append((int(oid), arr))
    return dict(frames)


def _match_frame(gt, hyp, prev: dict[int, int], threshold: float):
    if not gt or not hyp:
        return {}
    g_ids = [g for g, _ in gt]
    h_ids = [h for h, _ in hyp]
    iou = iou_matrix(np.array([b for _, b in gt]), np.array([b for _, b in hyp]))
    valid = iou >= threshold
    g_index = {g: i for i, g in enumerate(g_ids)}
    h_index = {h: j for j, h in enumerate(h_ids)}

    pairs = {}
    for g, h in prev.items():
        i, j = g_index.get(g), h_index.get(h)
        if i is not None and j is not None and valid[i, j]:
            pairs[g] = h
    free_g = [i for i, g in enumerate(g_ids) if g not in pairs]
    taken_h = set(pairs.values())
    free_h = [j for j, h in enumerate(h_ids) if h not in taken_h]
    if free_g and free_h:
        sub_valid = valid[np.ix_(free_g, free_h)]
        cost = np.where(sub_valid, 1.0 - iou[np.ix_(free_g, free_h)], 1e6)
        rows, cols = linear_sum_assignment(cost)
        for r, c in zip(rows, cols):
            if sub_valid[r, c]:
                pairs[g_ids[free_g[r]]] = h_ids[free_h[c]]
    return pairs


def evaluate_frames(gt_frames: dict, hyp_frames: dict, iou_threshold: float = 0.5) -> EvalReport:
    frames = sorted(set(gt_frames) | set(hyp_frames))
    fp = fn = idsw = 0
    gt_count = 0
    prev: dict[int, int] = {}
    last_hyp: dict[int, int] = {}
    tracked: dict[int, list[bool]] = defaultdict(list)
    gt_switches: dict[int, int] = defaultdict(int)
    frame_matches = {}

    gt_len: dict[int, int] = defaultdict(int)
    hyp_len: dict[int, int] = defaultdict(int)
    overlap: dict[tuple[int, int], int] = defaultdict(int)

    for f in frames:
        gt = gt_frames.get(f, [])
        hyp = hyp_frames.get(f, [])
        gt_count += len(gt)
        pairs = _match_frame(gt, hyp, prev, iou_threshold)
        for g, h in pairs.items():
            if g in last_hyp and last_hyp[g] != h:
                idsw += 1
                gt_switches[g] += 1
            last_hyp[g] = h
        fn += len(gt) - len(pairs)
        fp += len(hyp) - len(pairs)
        for g, _ in gt:
            tracked[g].append(g in pairs)
        prev = pairs
        frame_matches[f] = sorted(pairs.items())

        for g, _ in gt:
            gt_len[g] += 1
        for h, _ in hyp:
            hyp_len[h] += 1
        if gt and hyp:
            iou = iou_matrix(np.array([b for _, b in gt]), np.array([b for _, b in hyp]))
            for i, j in zip(*np.nonzero(iou >= iou_threshold)):
                overlap[(gt[i][0], hyp[j][0])] += 1

    frag = 0
    frag_by_gt = {}
    for g, states in tracked.items():
        idx = [k for k, s in enumerate(states) if s]
        n = 0
        if idx:
            span = states[idx[0] : idx[-1] + 1]
            n = sum(1 for a, b in zip(span, span[1:]) if a and not b)
        frag_by_gt[g] = n
        frag += n

    # global identity mapping
    g_ids = sorted(gt_len)
    h_ids = sorted(hyp_len)
    idtp = 0
    id_map: dict[int, int] = {}
    if g_ids and h_ids:
        weights = np.zeros((len(g_ids), len(h_ids)))
        for (g, h), n in overlap.items():
            weights[g_ids.index(g), h_ids.index(h)] = n
        rows, cols = linear_sum_assignment(-weights)
        for r, c in zip(rows, cols):
            if weights[r, c] > 0:
                id_map[g_ids[r]] = h_ids[c]
                idtp += int(weights[r, c])
    total_gt = sum(gt_len.values())
    total_hyp = sum(hyp_len.values())
    idf1 = 2.0 * idtp / (total_gt + total_hyp) if (total_gt + total_hyp) else 1.0
    mota = 1.0 - (fp + fn + idsw) / gt_count if gt_count else float("nan")

    per_gt = {}
    for g in g_ids:
        h = id_map.get(g)
        tp = overlap.get((g, h), 0) if h is not None else 0
        denom = gt_len[g] + (hyp_len[h] if h is not None else 0)
        per_gt[g] = {
            "frames": gt_len[g],
            "matched": sum(tracked[g]),
            "idsw": gt_switches.get(g, 0),
            "frag": frag_by_gt.get(g, 0),
            "hyp_id": h,
            "idf1": 2.0 * tp / denom if denom else 0.0,
        }

    return EvalReport(
        mota=mota,
        idf1=idf1,
        idsw=idsw,
        frag=frag,
        fp=fp,
        fn=fn,
        gt_count=gt_count,
        idtp=idtp,
        per_gt=per_gt,
        frame_matches=frame_matches,
    )


def evaluate(gt_file, result_file, iou_threshold: float = 0.5) -> EvalReport:
    return evaluate_frames(load_tracks(gt_file), load_tracks(result_file), iou_threshold)


def format_report(report: EvalReport, machine: bool = False) -> str:
    d = report.as_dict()
    if machine:
        return "\n".join(f"{k}={v:.6f}" if isinstance(v, float) else f"{k}={v}" for k, v in d.items())
    header = "".join(f"{k:>8}" for k in d)
    values = "".join(f"{v:8.3f}" if isinstance(v, float) else f"{v:8d}" for v in d.values())
    return header + "\n" + values
