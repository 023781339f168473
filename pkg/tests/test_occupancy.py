import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from maptrack.geometry import BoundingBox
from maptrack.occupancy import (
    MapConfig,
    accumulate_probability,
    build_prediction_map,
    crowding_ratio,
    empty_grid,
    in_probability_map,
    is_crowded,
)

FRAME = (200, 100)


def test_grid_shape_rounds_up():
    assert empty_grid((205, 101)).cells.shape == (11, 21)


def test_accumulate_single_box():
    grid = accumulate_probability(empty_grid(FRAME), [BoundingBox(0, 0, 20, 20)])
    assert grid.cells[:2, :2].tolist() == [[1, 1], [1, 1]]
    assert grid.cells.sum() == 4
    assert grid.frames_accumulated == 1


def test_accumulate_is_additive():
    grid = empty_grid(FRAME)
    for _ in range(50):
        accumulate_probability(grid, [BoundingBox(0, 0, 20, 20)])
    assert (grid.cells[:2, :2] == 50).all()
    assert grid.frames_accumulated == 50


def test_two_boxes_count_as_one_frame():
    grid = accumulate_probability(empty_grid(FRAME), [BoundingBox(0, 0, 20, 20), BoundingBox(100, 50, 20, 20)])
    assert grid.frames_accumulated == 1
    assert grid.cells.sum() == 8


def test_box_outside_frame_contributes_nothing():
    grid = accumulate_probability(empty_grid(FRAME), [BoundingBox(500, 500, 20, 20)])
    assert grid.cells.sum() == 0


def test_accumulation_order_independent():
    rng = np.random.default_rng(5)
    boxes = [BoundingBox(*rng.uniform(0, 150, 2), *rng.uniform(5, 60, 2)) for _ in range(12)]
    a = accumulate_probability(empty_grid(FRAME), boxes)
    b = accumulate_probability(empty_grid(FRAME), boxes[::-1])
    np.testing.assert_array_equal(a.cells, b.cells)


def test_probability_map_examples():
    cfg = MapConfig()
    empty = empty_grid(FRAME)
    assert in_probability_map(empty, BoundingBox(80, 30, 20, 20), cfg)
    assert not in_probability_map(empty, BoundingBox(220, 30, 20, 20), cfg)

    saturated = empty_grid(FRAME)
    for _ in range(100):
        accumulate_probability(saturated, [BoundingBox(80, 30, 20, 20)])
    assert in_probability_map(saturated, BoundingBox(80, 30, 20, 20), cfg)
    # cells under this box were never visited
    assert not in_probability_map(saturated, BoundingBox(140, 60, 20, 20), cfg)


def test_border_margin_marks_leaving_tracks():
    grid = empty_grid(FRAME)
    # center at x = 195, within one cell of the right edge
    assert not in_probability_map(grid, BoundingBox(185, 30, 20, 20))
    assert in_probability_map(grid, BoundingBox(180, 30, 20, 20), MapConfig(border_margin_cells=0))


def test_probability_map_is_monotone():
    rng = np.random.default_rng(8)
    cfg = MapConfig(warmup_frames=0)
    grid = empty_grid(FRAME)
    for _ in range(40):
        accumulate_probability(grid, [BoundingBox(*rng.uniform(20, 120, 2), 30, 30)])
    probes = [BoundingBox(*rng.uniform(15, 150, 2), 20, 20) for _ in range(50)]
    before = [in_probability_map(grid, b, cfg) for b in probes]
    # adding detections to the latest frame only raises cell counts
    grid.cells[:] += (rng.uniform(size=grid.cells.shape) < 0.3).astype(grid.cells.dtype)
    after = [in_probability_map(grid, b, cfg) for b in probes]
    assert all(a or not b for b, a in zip(before, after))


def test_prediction_map_examples():
    assert build_prediction_map(FRAME, []).cells.sum() == 0
    one = build_prediction_map(FRAME, [BoundingBox(0, 0, 20, 20)])
    assert one.cells[:2, :2].tolist() == [[1, 1], [1, 1]]
    two = build_prediction_map(FRAME, [BoundingBox(0, 0, 20, 20)] * 2)
    assert (two.cells[:2, :2] == 2).all()


def test_crowding_examples():
    cfg = MapConfig()
    lone = BoundingBox(30, 30, 40, 40)
    assert crowding_ratio(build_prediction_map(FRAME, [lone]), lone) == 1.0
    assert not is_crowded(build_prediction_map(FRAME, [lone]), lone, cfg)
    assert is_crowded(build_prediction_map(FRAME, [lone, lone]), lone, cfg)


def test_twenty_percent_cell_overlap_is_not_crowded():
    # A covers 5x2 = 10 cells; B shares only column 4, i.e. 2 of them
    a = BoundingBox(0, 0, 50, 20)
    b = BoundingBox(40, 0, 50, 20)
    pred = build_prediction_map(FRAME, [a, b])
    hand_count = (10 * 1 + 2 * 1) / 10
    assert crowding_ratio(pred, a) == pytest.approx(hand_count) == pytest.approx(1.2)
    assert not is_crowded(pred, a)


def test_box_covering_no_cells_is_not_crowded():
    pred = build_prediction_map(FRAME, [BoundingBox(0, 0, 20, 20)])
    assert not is_crowded(pred, BoundingBox(400, 400, 10, 10))


@given(st.floats(0, 180), st.floats(0, 80), st.floats(1, 100), st.floats(1, 100), st.floats(1.01, 5))
def test_lone_track_never_crowded(left, top, w, h, thresh2):
    b = BoundingBox(left, top, w, h)
    assert not is_crowded(build_prediction_map(FRAME, [b]), b, MapConfig(thresh2=thresh2))


def rasterized_cells(grid, left, top, w, h):
    W, H = grid.frame_size
    cs = grid.cell_size
    cells = set()
    for py in range(max(top, 0), min(top + h, H)):
        for px in range(max(left, 0), min(left + w, W)):
            cells.add((py // cs, px // cs))
    return cells


def test_covered_cells_match_rasterized_oracle():
    rng = np.random.default_rng(21)
    grid = empty_grid((173, 121))
    for _ in range(1000):
        left, top = (int(v) for v in rng.integers(-30, 170, 2))
        w, h = (int(v) for v in rng.integers(1, 60, 2))
        span = grid.cell_span((left, top, w, h))
        got = set()
        if span is not None:
            got = {(r, c) for r in range(span[0].start, span[0].stop) for c in range(span[1].start, span[1].stop)}
        assert got == rasterized_cells(grid, left, top, w, h), (left, top, w, h)


@settings(deadline=None)
@given(st.lists(st.tuples(st.integers(0, 190), st.integers(0, 90), st.integers(1, 40), st.integers(1, 40)), max_size=6))
def test_accumulation_additive_across_frames(rows):
    boxes = [BoundingBox(*r) for r in rows]
    split = empty_grid(FRAME)
    accumulate_probability(split, boxes[:3])
    accumulate_probability(split, boxes[3:])
    together = accumulate_probability(empty_grid(FRAME), boxes)
    np.testing.assert_array_equal(split.cells, together.cells)
