import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import ndimage

from conftest import oracle_zhang_suen, random_blob_mask
from vecmap.geom import Category, MapElement, PerceptionWindow, chamfer_distance
from vecmap.raster import (
    BevMask,
    GridSpec,
    border_follow,
    mask_to_elements,
    rasterize,
    read_pgm,
    thin,
    thin_bits,
    trace_skeleton,
    write_pgm,
)

LD, PC = Category.LANE_DIVIDER, Category.PED_CROSSING
EIGHT = np.ones((3, 3), bool)


def small_grid(rows, cols):
    # unit cells: x in [0, cols], y in [-rows, 0]
    return GridSpec(rows, cols, PerceptionWindow(0.0, float(cols), float(-rows), 0.0))


def test_default_grid_resolution():
    g = GridSpec()
    assert g.res_x == g.res_y == pytest.approx(0.15)


def test_cell_mapping_example():
    rows, cols = GridSpec().cell_of([(0.075, 0.075)])
    assert (rows[0], cols[0]) == (199, 100)


def test_cell_mapping_clamps_upper_boundary():
    rows, cols = GridSpec().cell_of([(15.0, -30.0), (-15.0, 30.0)])
    assert rows.tolist() == [399, 0] and cols.tolist() == [199, 0]


def test_grid_round_trip_all_cells():
    g = GridSpec()
    rr, cc = np.mgrid[0 : g.rows, 0 : g.cols]
    rows, cols = g.cell_of(g.center_of(rr.ravel(), cc.ravel()))
    assert np.array_equal(rows, rr.ravel()) and np.array_equal(cols, cc.ravel())


def test_vertical_line_one_cell_per_row():
    m = rasterize(MapElement(LD, [(0.0, -30.0), (0.0, 30.0)]))
    assert np.all(m.bits.sum(axis=1) == 1)
    assert set(np.nonzero(m.bits)[1]) == {100}


def test_rasterize_thickness_and_errors():
    e = MapElement(LD, [(0.0, -30.0), (0.0, 30.0)])
    assert np.all(rasterize(e, thickness_cells=3).bits.sum(axis=1) == 3)
    with pytest.raises(ValueError):
        rasterize(MapElement(LD, [(20, 0), (25, 0)]))
    with pytest.raises(ValueError):
        rasterize(e, thickness_cells=0)


def test_filled_crossing_covers_interior():
    ring = MapElement(PC, [(-2, 5), (2, 5), (2, 11), (-2, 11)], closed=True)
    outline = rasterize(ring)
    filled = rasterize(ring, filled=True)
    assert np.all(filled.bits >= outline.bits)
    rows, cols = GridSpec().cell_of([(0.0, 8.0)])
    assert filled.bits[rows[0], cols[0]] and not outline.bits[rows[0], cols[0]]
    # x=-2..2 floors to cols 86..113, y=11..5 to rows 126..166
    assert filled.bits.sum() == 28 * 41


def test_thin_examples():
    one = np.zeros((5, 5), bool)
    one[2, 2] = True
    assert np.array_equal(thin_bits(one), one)
    bar = np.zeros((7, 26), bool)
    bar[2:5, 3:23] = True
    sk = thin_bits(bar)
    assert np.array_equal(sk, np.array(oracle_zhang_suen(bar), bool))
    assert set(np.nonzero(sk)[0]) == {3}
    # the oracle erodes two cells off one end and one off the other
    assert sk.sum() == 17
    two = bar.copy()
    two[2:5, 12:14] = False
    assert ndimage.label(thin_bits(two), EIGHT)[1] == 2
    assert not thin_bits(np.zeros((4, 4), bool)).any()


def test_thin_matches_textbook_oracle_and_invariants():
    r = np.random.default_rng(31)
    for _ in range(25):
        h, w = int(r.integers(4, 25)), int(r.integers(4, 25))
        img = random_blob_mask(r, h, w)
        sk = thin_bits(img)
        assert np.array_equal(sk, np.array(oracle_zhang_suen(img), bool))
        assert np.array_equal(thin_bits(sk), sk)
        assert not np.any(sk & ~img)


def test_thin_preserves_component_count_on_strokes():
    r = np.random.default_rng(8)
    g = small_grid(60, 60)
    for _ in range(10):
        a = MapElement(LD, [(r.uniform(2, 25), -r.uniform(2, 58)), (r.uniform(35, 58), -r.uniform(2, 58))])
        b = MapElement(LD, [(5, -2.5), (55, -2.5)])
        m = rasterize(a, g, 3) | rasterize(b, g, 3)
        before = ndimage.label(m.bits, EIGHT)[1]
        assert ndimage.label(thin(m).bits, EIGHT)[1] == before


def test_trace_single_row_example():
    bits = np.zeros((400, 200), bool)
    bits[200, 50:151] = True
    (t,) = trace_skeleton(BevMask(GridSpec(), bits))
    assert not t.closed and len(t.points) == 101
    ends = sorted(map(tuple, t.points[[0, -1]].round(9)))
    assert ends == [(-7.425, -0.075), (7.575, -0.075)]
    assert np.allclose(np.diff(t.points[:, 0]) ** 2, 0.15**2)


def _longest_endpoint_path(bits):
    """Enumerate every simple path between each endpoint pair, keep the
    shortest per pair, and return the longest of those."""
    pix = [tuple(p) for p in np.argwhere(bits)]
    nbrs = {p: [q for q in pix if q != p and max(abs(q[0] - p[0]), abs(q[1] - p[1])) == 1] for p in pix}
    ends = [p for p in pix if len(nbrs[p]) == 1]
    shortest = {}

    def walk(path, length):
        key = (path[0], path[-1])
        if path[-1] in ends and len(path) > 1 and length < shortest.get(key, (np.inf,))[0] - 1e-12:
            shortest[key] = (length, list(path))
        for q in nbrs[path[-1]]:
            if q not in path:
                path.append(q)
                walk(path, length + float(np.hypot(q[0] - path[-2][0], q[1] - path[-2][1])))
                path.pop()

    for e in ends:
        walk([e], 0.0)
    return max(shortest.values(), key=lambda v: v[0])


def test_trace_t_shape_longest_path_oracle():
    g = small_grid(12, 50)
    bits = np.zeros((12, 50), bool)
    bits[3, 5:45] = True
    bits[4:7, 20] = True
    (t,) = trace_skeleton(BevMask(g, bits))
    length, path = _longest_endpoint_path(bits)
    expected = g.center_of([p[0] for p in path], [p[1] for p in path])
    got = t.points if np.array_equal(t.points[0], expected[0]) else t.points[::-1]
    np.testing.assert_array_equal(got, expected)
    assert len(t.points) == 40


def test_trace_pixel_ring_is_closed():
    g = small_grid(20, 20)
    bits = np.zeros((20, 20), bool)
    for k in range(6):  # diamond, every pixel has two 8-neighbours
        for r, c in ((4 + k, 10 + k), (10 + k, 16 - k), (16 - k, 10 - k), (10 - k, 4 + k)):
            bits[r, c] = True
    (t,) = trace_skeleton(BevMask(g, bits))
    assert t.closed and len(t.points) == bits.sum()
    rows, cols = g.cell_of(t.points)
    assert (rows[0], cols[0]) == (4, 10)
    steps = np.abs(np.diff(np.c_[rows, cols], axis=0)).max(axis=1)
    assert np.all(steps == 1)


def test_trace_outputs_inside_window():
    r = np.random.default_rng(4)
    for _ in range(10):
        img = np.zeros((400, 200), bool)
        img[150:250, 40:160] = random_blob_mask(r, 100, 120)
        for t in trace_skeleton(thin(BevMask(GridSpec(), img))):
            assert len(t.points) >= 2
            assert np.all(GridSpec().window.contains(t.points))


def test_border_follow_square():
    bits = np.zeros((6, 6), bool)
    bits[1:4, 1:5] = True
    contour = border_follow(bits)
    assert contour[0] == (1, 1)
    assert len(contour) == len(set(contour)) == 10
    assert set(contour) == {tuple(p) for p in np.argwhere(bits)} - {(2, 2), (2, 3)}


def test_border_follow_single_pixel_and_diagonal():
    one = np.zeros((3, 3), bool)
    one[1, 1] = True
    assert border_follow(one) == [(1, 1)]
    diag = np.eye(4, dtype=bool)
    # walks out to the far end and back
    assert border_follow(diag) == [(0, 0), (1, 1), (2, 2), (3, 3), (2, 2), (1, 1)]


def test_rectangle_crossing_to_four_corner_ring():
    corners = np.array([(-2.0, 5.0), (2.0, 5.0), (2.0, 11.0), (-2.0, 11.0)])
    m = rasterize(MapElement(PC, corners, closed=True), filled=True)
    (e,) = mask_to_elements(m, PC, score=0.6)
    assert e.closed and e.score == 0.6 and len(e.points) == 4
    for c in corners:
        assert np.min(np.abs(e.points - c).max(axis=1)) <= 0.15 + 1e-9


def test_straight_divider_round_trip():
    e = MapElement(LD, [(1.3, -25.0), (3.1, 24.0)])
    out = mask_to_elements(rasterize(e, thickness_cells=3), LD, score=0.5)
    assert len(out) == 1
    assert chamfer_distance(e, out[0]) <= 0.30



def _cell_chamfer(a: np.ndarray, b: np.ndarray) -> float:
    d = np.hypot(*(a[:, None, :] - b[None, :, :]).transpose(2, 0, 1))
    return 0.5 * (d.min(axis=1).mean() + d.min(axis=0).mean())


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_thin_trace_rerasterize_stays_on_skeleton(seed):
    rng = np.random.default_rng(seed)
    grid = small_grid(64, 64)
    # smooth quadratic arc, kept well inside the grid
    t = np.linspace(0.0, 1.0, 40)
    p0, p1, p2 = rng.uniform([8, -56], [56, -8], size=(3, 2))
    pts = ((1 - t) ** 2)[:, None] * p0 + (2 * t * (1 - t))[:, None] * p1 + (t**2)[:, None] * p2
    if np.hypot(*(pts[-1] - pts[0])) < 6:
        return
    skel = thin(rasterize(MapElement(LD, pts), grid, thickness_cells=3))
    traces = trace_skeleton(skel)
    assert traces
    redrawn = np.zeros_like(skel.bits)
    for tr in traces:
        redrawn |= rasterize(MapElement(LD, tr.points, closed=tr.closed), grid).bits
    assert _cell_chamfer(np.argwhere(redrawn), np.argwhere(skel.bits)) <= 2.0


def test_mask_to_elements_edge_cases():
    empty = BevMask.empty()
    assert mask_to_elements(empty, LD) == []
    assert mask_to_elements(empty, PC) == []
    with pytest.raises(ValueError):
        mask_to_elements(empty, Category.ROAD_BOUNDARY)
    with pytest.raises(ValueError):
        mask_to_elements(empty, PC, crossing_mode="medial")


def test_crossing_skeleton_mode():
    ring = MapElement(PC, [(-5, 5), (5, 5), (5, 7), (-5, 7)], closed=True)
    out = mask_to_elements(rasterize(ring, thickness_cells=3), PC, crossing_mode="skeleton")
    assert len(out) == 1 and out[0].closed


def test_pgm_round_trip(tmp_path):
    r = np.random.default_rng(0)
    g = GridSpec(37, 23)
    m = BevMask(g, r.random((37, 23)) > 0.5)
    p = tmp_path / "m.pgm"
    write_pgm(m, p)
    assert p.read_bytes().startswith(b"P5\n23 37\n255\n")
    assert read_pgm(p, g) == m
    assert set(np.unique(np.frombuffer(p.read_bytes()[13:], np.uint8))) <= {0, 255}
    with pytest.raises(ValueError):
        (tmp_path / "bad.pgm").write_bytes(b"P2\n1 1\n255\n0")
        read_pgm(tmp_path / "bad.pgm")


def test_bevmask_shape_checked():
    with pytest.raises(ValueError):
        BevMask(GridSpec(), np.zeros((10, 10)))


def test_exhaustive_oracle_agrees_on_small_paths():
    # sanity for the path oracle itself: an L has exactly one endpoint pair
    bits = np.zeros((6, 6), bool)
    bits[1, 1:5] = True
    bits[2:5, 4] = True
    length, path = _longest_endpoint_path(bits)
    assert {path[0], path[-1]} == {(1, 1), (4, 4)}
    # the corner is cut diagonally
    assert length == pytest.approx(4 + np.sqrt(2)) and len(path) == 6
    assert all(itertools.starmap(lambda a, b: max(abs(a[0] - b[0]), abs(a[1] - b[1])) == 1, zip(path, path[1:])))
