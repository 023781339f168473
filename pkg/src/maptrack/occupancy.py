"""Probability map and prediction map.

Both maps are integer grids with one cell per ``cell_size`` x ``cell_size``
pixel block (10 px by default, i.e. a tenth of the frame resolution).

The probability map accumulates every surviving detection over the whole
sequence and answers "could an undetected object plausibly still be here?".
The prediction map is rebuilt every frame from the normal and predicted track
boxes and answers "is this track inside a crowd?".
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import BoundingBox, as_box_array


@dataclass(frozen=True)
class MapConfig:
    thresh1: float = 0.05
    thresh2: float = 1.25
    border_margin_cells: int = 1
    warmup_frames: int = 30
    cell_size: int = 10

    def __post_init__(self):
        if self.thresh1 < 0:
            raise ValueError("thresh1 must be non-negative")
        if self.thresh2 < 1:
            raise ValueError("thresh2 must be >= 1")
        if self.border_margin_cells < 0 or self.warmup_frames < 0 or self.cell_size <= 0:
            raise ValueError("map margins, warm-up and cell size must be non-negative")


@dataclass
class OccupancyGrid:
    frame_size: tuple[int, int]  # (W, H)
    cell_size: int = 10
    cells: np.ndarray = field(default=None, repr=False)
    frames_accumulated: int = 0

    def __post_init__(self):
        W, H = self.frame_size
        if W <= 0 or H <= 0:
            raise ValueError("frame size must be positive")
        shape = (math.ceil(H / self.cell_size), math.ceil(W / self.cell_size))
        if self.cells is None:
            self.cells = np.zeros(shape, dtype=np.int64)
        elif self.cells.shape != shape:
            raise ValueError(f"grid shape {self.cells.shape} does not match frame size, expected {shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def cell_span(self, box) -> tuple[slice, slice] | None:
        """Row and column slices of the cells a box's extent overlaps, or None.

        A cell counts as covered when the open box interior intersects it, so a
        box edge lying exactly on a cell border does not reach the next cell.
        """
        if isinstance(box, BoundingBox):
            left, top, w, h = box.left, box.top, box.width, box.height
        else:
            left, top, w, h = box
        cs = self.cell_size
        W, H = self.frame_size
        # clip to the frame first; the last row/column of cells may extend past it
        x0, x1 = max(left, 0.0), min(left + w, W)
        y0, y1 = max(top, 0.0), min(top + h, H)
        if x0 >= x1 or y0 >= y1:
            return None
        c0, c1 = math.floor(x0 / cs), math.ceil(x1 / cs)
        r0, r1 = math.floor(y0 / cs), math.ceil(y1 / cs)
        if c0 >= c1 or r0 >= r1:
            return None
        return slice(r0, r1), slice(c0, c1)

    def covered_cells(self, box) -> np.ndarray:
        span = self.cell_span(box)
        if span is None:
            return self.cells[0:0, 0:0]
        return self.cells[span]

    def to_text(self) -> str:
        return "\n".join(" ".join(str(int(v)) for v in row) for row in self.cells)


def empty_grid(frame_size: tuple[int, int], cell_size: int = 10) -> OccupancyGrid:
    return OccupancyGrid(frame_size=tuple(frame_size), cell_size=cell_size)


def accumulate_probability(grid: OccupancyGrid, detections) -> OccupancyGrid:
    """Add one frame of detections to ``grid`` in place and return it."""
    for box in as_box_array(detections):
        span = grid.cell_span(box)
        if span is not None:
            grid.cells[span] += 1
    grid.frames_accumulated += 1
    return grid


def in_probability_map(grid: OccupancyGrid, box, cfg: MapConfig = MapConfig()) -> bool:
    """Whether an unmatched track at ``box`` plausibly remains in view.

    Tracks whose center has left the frame, or is within
    ``border_margin_cells`` cells of an edge, are out of the map. Otherwise the
    per-cell visit frequencies under the box are summed and compared with
    ``thresh1``; during warm-up the frequency test is skipped.
    """
    if isinstance(box, BoundingBox):
        box = box.to_array()
    left, top, w, h = box
    cx, cy = left + w / 2.0, top + h / 2.0
    W, H = grid.frame_size
    margin = cfg.border_margin_cells * grid.cell_size
    if not (margin <= cx <= W - margin and margin <= cy <= H - margin):
        return False
    if grid.frames_accumulated < max(cfg.warmup_frames, 1):
        return True
    total = grid.covered_cells(box).sum() / grid.frames_accumulated
    return bool(total >= cfg.thresh1)


def build_prediction_map(frame_size: tuple[int, int], tracks, cell_size: int = 10) -> OccupancyGrid:
    grid = empty_grid(frame_size, cell_size)
    for box in as_box_array(tracks):
        span = grid.cell_span(box)
        if span is not None:
            grid.cells[span] += 1
    return grid


def crowding_ratio(pred_map: OccupancyGrid, box) -> float:
    cells = pred_map.covered_cells(box)
    if cells.size == 0:
        return 0.0
    return float(cells.sum()) / cells.size


def is_crowded(pred_map: OccupancyGrid, box, cfg: MapConfig = MapConfig()) -> bool:
    return crowding_ratio(pred_map, box) > cfg.thresh2
