"""
From vectors to masks and back
==============================

"""

import tempfile
from pathlib import Path

import numpy as np

from vecmap import GridSpec, chamfer_distance, mask_to_elements, rasterize, thin, trace_skeleton
from vecmap.geom import Category, MapElement
from vecmap.raster import read_pgm, write_pgm

# the default grid is 400 x 200 cells of 15 cm
g = GridSpec()
print(g.rows, g.cols, g.res_x, g.res_y)

# a gently curving divider, drawn three cells wide
y = np.linspace(-28, 28, 200)
divider = MapElement(Category.LANE_DIVIDER, np.c_[2 + 0.002 * y**2, y])
m = rasterize(divider, thickness_cells=3)
print(m.bits.sum())

# thinning leaves a one-pixel skeleton inside the mask
sk = thin(m)
print(sk.bits.sum(), bool(np.all(m.bits | ~sk.bits)))

# tracing follows the longest path through the skeleton
(t,) = trace_skeleton(sk)
print(len(t.points), t.closed)

# the full pipeline compacts the trace too
(back,) = mask_to_elements(m, Category.LANE_DIVIDER, score=0.5)
print(len(back.points), round(chamfer_distance(divider, back), 3))

# filled crossings come back as four-corner rings
crossing = MapElement(Category.PED_CROSSING, [(-6, 8), (6, 8), (6, 12), (-6, 12)], closed=True)
(ring,) = mask_to_elements(rasterize(crossing, filled=True), Category.PED_CROSSING, score=0.5)
print(ring.points)

# masks round-trip through binary PGM
with tempfile.TemporaryDirectory() as d:
    p = Path(d) / "divider.pgm"
    write_pgm(m, p)
    print(read_pgm(p) == m)
