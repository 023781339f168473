"""Axis-aligned boxes and the overlap metrics (IoU, IoI) used throughout the tracker.

Boxes follow the MOT file convention ``(left, top, width, height)`` in
continuous pixel coordinates. The vectorized helpers take ``(N, 4)`` arrays in
the same layout so the association code never has to loop over box pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class BoundingBox:
    left: float
    top: float
    width: float
    height: float

    def __post_init__(self):
        if not (self.width > 0 and self.height > 0):
            raise ValueError(f"box must have positive size, got {self.width}x{self.height}")

    @classmethod
    def from_center(cls, cx: float, cy: float, width: float, height: float) -> "BoundingBox":
        return cls(cx - width / 2.0, cy - height / 2.0, width, height)

    @classmethod
    def from_array(cls, arr) -> "BoundingBox":
        return cls(float(arr[0]), float(arr[1]), float(arr[2]), float(arr[3]))

    @property
    def right(self) -> float:
        return self.left + self.width

    @property
    def bottom(self) -> float:
        return self.top + self.height

    def area(self) -> float:
        return self.width * self.height

    def center(self) -> tuple[float, float]:
        return (self.left + self.width / 2.0, self.top + self.height / 2.0)

    def to_array(self) -> np.ndarray:
        return np.array([self.left, self.top, self.width, self.height], dtype=float)


def intersection_area(a: BoundingBox, b: BoundingBox) -> float:
    # touching edges give zero-width overlap, hence 0
    w = min(a.right, b.right) - max(a.left, b.left)
    h = min(a.bottom, b.bottom) - max(a.top, b.top)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection over union; symmetric, 0 for disjoint boxes."""
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area() + b.area() - inter)


def ioi(subject: BoundingBox, other: BoundingBox) -> float:
    """Intersection over Itself: the fraction of ``subject`` covered by ``other``.

    Unlike IoU this is asymmetric. A small box sitting inside a large one has
    ``ioi(small, large) == 1`` while ``ioi(large, small)`` is the area ratio.
    """
    return intersection_area(subject, other) / subject.area()


def as_box_array(boxes) -> np.ndarray:
    """Coerce a sequence of BoundingBox (or an array) to a float ``(N, 4)`` array."""
    if isinstance(boxes, np.ndarray):
        return boxes.reshape(-1, 4).astype(float, copy=False)
    if len(boxes) == 0:
        return np.zeros((0, 4))
    return np.array([b.to_array() if isinstance(b, BoundingBox) else b for b in boxes], dtype=float)


def intersection_matrix(a, b) -> np.ndarray:
    a = as_box_array(a)
    b = as_box_array(b)
    w = np.minimum(a[:, None, 0] + a[:, None, 2], b[None, :, 0] + b[None, :, 2]) - np.maximum(
        a[:, None, 0], b[None, :, 0]
    )
    h = np.minimum(a[:, None, 1] + a[:, None, 3], b[None, :, 1] + b[None, :, 3]) - np.maximum(
        a[:, None, 1], b[None, :, 1]
    )
    return np.clip(w, 0.0, None) * np.clip(h, 0.0, None)


def iou_matrix(a, b) -> np.ndarray:
    a = as_box_array(a)
    b = as_box_array(b)
    inter = intersection_matrix(a, b)
    area_a = a[:, 2] * a[:, 3]
    area_b = b[:, 2] * b[:, 3]
    union = area_a[:, None] + area_b[None, :] - inter
    return inter / union


def ioi_matrix(subjects, others) -> np.ndarray:
    """Entry ``(i, j)`` is ``ioi(subjects[i], others[j])``."""
    subjects = as_box_array(subjects)
    inter = intersection_matrix(subjects, others)
    return inter / (subjects[:, 2] * subjects[:, 3])[:, None]


def centers(boxes) -> np.ndarray:
    boxes = as_box_array(boxes)
    return boxes[:, :2] + boxes[:, 2:] / 2.0
