"""
Probability and prediction maps
===============================

The probability map counts, per 10 px cell, how often detections covered it.
Undetected tracks standing where people are never seen are treated as gone.
The prediction map is rebuilt every frame from the track boxes; a ratio above
1.25 marks a track as being in a crowd.
"""

import numpy as np

from maptrack import synth
from maptrack.geometry import BoundingBox
from maptrack.occupancy import (
    accumulate_probability,
    build_prediction_map,
    crowding_ratio,
    empty_grid,
    in_probability_map,
)

seq = synth.generate(synth.preset("crowd-cross"))
grid = empty_grid(seq.spec.frame_size)
for fd in seq.detections:
    accumulate_probability(grid, [d.box for d in fd.entries])
print(f"{grid.frames_accumulated} frames accumulated into a {grid.cells.shape} grid")

# coarse view of the walkable band, one character per 4x4 cells
freq = grid.cells / grid.frames_accumulated
rows, cols = freq.shape
for r in range(0, rows, 4):
    print("".join("#" if freq[r:r + 4, c:c + 4].max() > 0.05 else "." for c in range(0, cols, 4)))

# a box on the walkers' path versus one in an empty corner
for box in [BoundingBox(300, 200, 50, 120), BoundingBox(300, 20, 50, 60)]:
    print(box, "in map" if in_probability_map(grid, box) else "out of map")

# crowding: a lone track versus two overlapping tracks
a, b = BoundingBox(100, 100, 50, 120), BoundingBox(120, 110, 50, 120)
print("alone   ", crowding_ratio(build_prediction_map(grid.frame_size, [a]), a))
print("together", np.round(crowding_ratio(build_prediction_map(grid.frame_size, [a, b]), a), 3))
