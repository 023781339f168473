"""Appearance galleries, cost matrices and the global assignment solver."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import iou_matrix

# returned for an empty gallery; larger than any cosine distance
MAX_APPEARANCE_DISTANCE = 2.0


@dataclass(frozen=True)
class AssociationConfig:
    iou_gate: float = 0.3
    reid_gate: float = 0.25
    dual_iou_gate: float = 0.45
    dual_reid_gate: float = 0.2
    gallery_capacity: int = 100

    def __post_init__(self):
        for name in ("iou_gate", "reid_gate", "dual_iou_gate", "dual_reid_gate"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.gallery_capacity < 1:
            raise ValueError("gallery_capacity must be >= 1")


def normalize(vec) -> np.ndarray:
    vec = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(vec)
    if not np.isfinite(norm) or norm == 0.0:
        raise ValueError("cannot normalize a zero or non-finite descriptor")
    return vec / norm


class AppearanceGallery:
    """Bounded FIFO of unit-norm descriptors for one track."""

    def __init__(self, capacity: int = 100):
        self.capacity = capacity
        self._items: deque[np.ndarray] = deque(maxlen=capacity)
        self._matrix: np.ndarray | None = None

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def push(self, descriptor) -> "AppearanceGallery":
        self._items.append(normalize(descriptor))
        self._matrix = None
        return self

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.array(self._items) if self._items else np.zeros((0, 0))
        return self._matrix

    def copy(self) -> "AppearanceGallery":
        other = AppearanceGallery(self.capacity)
        other._items.extend(self._items)
        return other


def gallery_push(gallery: AppearanceGallery, descriptor) -> AppearanceGallery:
    return gallery.push(descriptor)


def appearance_distance(gallery: AppearanceGallery, descriptor) -> float:
    """Smallest cosine distance between ``descriptor`` and the gallery entries."""
    if len(gallery) == 0:
        return MAX_APPEARANCE_DISTANCE
    return float(np.min(1.0 - gallery.matrix() @ np.asarray(descriptor, dtype=float)))


def appearance_cost_matrix(galleries, descriptors) -> np.ndarray:
    descriptors = np.asarray(descriptors, dtype=float)
    cost = np.full((len(galleries), len(descriptors)), MAX_APPEARANCE_DISTANCE)
    if len(descriptors) == 0:
        return cost
    for i, gallery in enumerate(galleries):
        if len(gallery):
            cost[i] = np.min(1.0 - gallery.matrix() @ descriptors.T, axis=0)
    return cost


def iou_cost_matrix(track_boxes, det_boxes, gate: float | None = None):
    """Return ``(cost, infeasible)`` where ``cost = 1 - IoU``.

    With ``gate`` set, pairs whose IoU is below it are flagged infeasible.
    Disjoint pairs are always infeasible.
    """
    iou = iou_matrix(track_boxes, det_boxes)
    cost = 1.0 - iou
    infeasible = iou <= 0.0
    if gate is not None:
        infeasible |= iou < gate
    return cost, infeasible


def solve_assignment(cost, infeasible=None):
    """Minimum-cost one-to-one matching restricted to feasible entries.

    Returns ``(matches, unmatched_rows, unmatched_cols)`` with ``matches`` a list
    of ``(row, col)`` pairs sorted by row.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2:
        raise ValueError("cost must be a 2-D matrix")
    n_rows, n_cols = cost.shape
    if infeasible is None:
        infeasible = ~np.isfinite(cost)
    else:
        infeasible = np.asarray(infeasible, dtype=bool) | ~np.isfinite(cost)
    if n_rows == 0 or n_cols == 0 or infeasible.all():
        return [], list(range(n_rows)), list(range(n_cols))

    # An infeasible pair costs more than any complete feasible assignment, so the
    # solver first maximizes the number of feasible pairs, then minimizes cost.
    feasible_vals = cost[~infeasible]
    big = (np.abs(feasible_vals).sum() + 1.0) * (min(n_rows, n_cols) + 1)
    work = np.where(infeasible, big, cost)
    rows, cols = linear_sum_assignment(work)

    matches = [(int(r), int(c)) for r, c in zip(rows, cols) if not infeasible[r, c]]
    used_r = {r for r, _ in matches}
    used_c = {c for _, c in matches}
    return (
        matches,
        [r for r in range(n_rows) if r not in used_r],
        [c for c in range(n_cols) if c not in used_c],
    )


def iou_associate(track_boxes, det_boxes, gate: float):
    cost, infeasible = iou_cost_matrix(track_boxes, det_boxes, gate)
    return solve_assignment(cost, infeasible)


def reid_associate(galleries, descriptors, gate: float):
    cost = appearance_cost_matrix(galleries, descriptors)
    return solve_assignment(cost, cost > gate)


def dual_gate_associate(track_boxes, galleries, det_boxes, descriptors, cfg: AssociationConfig = AssociationConfig()):
    """Associate confirmed tracks only where both IoU and appearance agree.

    The assignment runs on the mean of the IoU cost and the appearance distance;
    pairs failing either of the strict gates are never matched. Without
    descriptors only the IoU gate applies.
    """
    iou_cost, infeasible = iou_cost_matrix(track_boxes, det_boxes, cfg.dual_iou_gate)
    if descriptors is None:
        return solve_assignment(iou_cost, infeasible)
    app = appearance_cost_matrix(galleries, descriptors)
    cost = 0.5 * iou_cost + 0.5 * app
    return solve_assignment(cost, infeasible | (app > cfg.dual_reid_gate))
