"""BEV mask rasterization and mask-to-vector post-processing.

Grid convention: row 0 is the front edge of the window (``y_max``) and
column 0 its left edge (``x_min``). A cell stands for its center point.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, NamedTuple, Optional

import numpy as np
from scipy import ndimage
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .compact import CompactionConfig, compact_element
from .geom import DEFAULT_WINDOW, Category, MapElement, PerceptionWindow, clip_chain

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True)
class GridSpec:
    rows: int = 400
    cols: int = 200
    window: PerceptionWindow = field(default_factory=lambda: DEFAULT_WINDOW)

    @property
    def res_y(self) -> float:
        return (self.window.y_max - self.window.y_min) / self.rows

    @property
    def res_x(self) -> float:
        return (self.window.x_max - self.window.x_min) / self.cols

    def cell_of(self, pts) -> tuple:
        """Map metric points to clamped ``(rows, cols)`` index arrays."""
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        w = self.window
        r = np.floor((w.y_max - pts[:, 1]) / self.res_y).astype(int)
        c = np.floor((pts[:, 0] - w.x_min) / self.res_x).astype(int)
        return np.clip(r, 0, self.rows - 1), np.clip(c, 0, self.cols - 1)

    def center_of(self, rows, cols) -> np.ndarray:
        rows, cols = np.broadcast_arrays(np.asarray(rows, np.float64), np.asarray(cols, np.float64))
        w = self.window
        x = w.x_min + (cols + 0.5) * self.res_x
        y = w.y_max - (rows + 0.5) * self.res_y
        return np.stack([x, y], axis=-1)


@dataclass(frozen=True, eq=False)
class BevMask:
    grid: GridSpec
    bits: np.ndarray

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=bool)
        if bits.shape != (self.grid.rows, self.grid.cols):
            raise ValueError(f"mask shape {bits.shape} does not match grid")
        object.__setattr__(self, "bits", bits)

    @classmethod
    def empty(cls, grid: Optional[GridSpec] = None) -> "BevMask":
        grid = grid or GridSpec()
        return cls(grid, np.zeros((grid.rows, grid.cols), dtype=bool))

    def __eq__(self, other):
        if not isinstance(other, BevMask):
            return NotImplemented
        return self.grid == other.grid and bool(np.array_equal(self.bits, other.bits))

    def __or__(self, other: "BevMask") -> "BevMask":
        return BevMask(self.grid, self.bits | other.bits)


def line_cells(r0: int, c0: int, r1: int, c1: int) -> list:
    """Bresenham cells from (r0, c0) to (r1, c1), both inclusive."""
    cells = []
    dr, dc = abs(r1 - r0), abs(c1 - c0)
    sr = 1 if r1 >= r0 else -1
    sc = 1 if c1 >= c0 else -1
    err = dc - dr
    r, c = r0, c0
    while True:
        cells.append((r, c))
        if r == r1 and c == c1:
            return cells
        e2 = 2 * err
        if e2 > -dr:
            err -= dr
            c += sc
        if e2 < dc:
            err += dc
            r += sr


def _fill_polygon(bits: np.ndarray, ring: np.ndarray, grid: GridSpec) -> None:
    """Even-odd scanline fill sampled at cell centers."""
    xs_c = grid.center_of(0, np.arange(grid.cols))[:, 0]
    a, b = ring, np.roll(ring, -1, axis=0)
    for row in range(grid.rows):
        yc = grid.center_of(row, 0)[1]
        crosses = ((a[:, 1] <= yc) & (b[:, 1] > yc)) | ((b[:, 1] <= yc) & (a[:, 1] > yc))
        if not crosses.any():
            continue
        pa, pb = a[crosses], b[crosses]
        xi = np.sort(pa[:, 0] + (yc - pa[:, 1]) * (pb[:, 0] - pa[:, 0]) / (pb[:, 1] - pa[:, 1]))
        for x0, x1 in zip(xi[::2], xi[1::2]):
            bits[row, (xs_c >= x0) & (xs_c <= x1)] = True


def rasterize(
    e: MapElement,
    grid: Optional[GridSpec] = None,
    thickness_cells: int = 1,
    filled: bool = False,
) -> BevMask:
    """Draw an element into a fresh mask.

    ``filled`` fills the interior of closed ped-crossing rings.
    """
    grid = grid or GridSpec()
    if thickness_cells < 1:
        raise ValueError("thickness_cells must be >= 1")
    pieces = clip_chain(e.chain(), grid.window)
    if not pieces:
        raise ValueError("element does not intersect the grid window")
    bits = np.zeros((grid.rows, grid.cols), dtype=bool)
    for piece in pieces:
        rows, cols = grid.cell_of(piece)
        bits[rows[0], cols[0]] = True
        for k in range(len(piece) - 1):
            for r, c in line_cells(rows[k], cols[k], rows[k + 1], cols[k + 1]):
                bits[r, c] = True
    if filled and e.closed and e.category is Category.PED_CROSSING:
        _fill_polygon(bits, e.points, grid)
    if thickness_cells > 1:
        bits = ndimage.binary_dilation(bits, structure=np.ones((thickness_cells, thickness_cells), bool))
    return BevMask(grid, bits)


def rasterize_many(elements, grid: Optional[GridSpec] = None, thickness_cells: int = 1, filled=False):
    grid = grid or GridSpec()
    out = BevMask.empty(grid)
    for e in elements:
        if clip_chain(e.chain(), grid.window):
            out = out | rasterize(e, grid, thickness_cells, filled)
    return out


def _neighbours(img: np.ndarray) -> list:
    """P2..P9 (N, NE, E, SE, S, SW, W, NW) as uint8 arrays, zero padded."""
    p = np.pad(img.astype(np.uint8), 1)
    h, w = img.shape
    off = [(-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1)]
    return [p[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w] for dr, dc in off]


def _zs_subiteration(img: np.ndarray, first: bool) -> np.ndarray:
    P = _neighbours(img)
    p2, p3, p4, p5, p6, p7, p8, p9 = P
    B = sum(x.astype(np.int16) for x in P)
    seq = P + [P[0]]
    A = sum(((seq[k] == 0) & (seq[k + 1] == 1)).astype(np.int16) for k in range(8))
    if first:
        c3, c4 = p2 * p4 * p6, p4 * p6 * p8
    else:
        c3, c4 = p2 * p4 * p8, p2 * p6 * p8
    return img & (B >= 2) & (B <= 6) & (A == 1) & (c3 == 0) & (c4 == 0)


def thin_bits(bits: np.ndarray) -> np.ndarray:
    img = np.asarray(bits, dtype=bool).copy()
    while True:
        changed = False
        for first in (True, False):
            delete = _zs_subiteration(img, first)
            if delete.any():
                img &= ~delete
                changed = True
        if not changed:
            return img


def thin(m: BevMask) -> BevMask:
    """Zhang-Suen thinning, iterated until no pixel changes."""
    return BevMask(m.grid, thin_bits(m.bits))


class Trace(NamedTuple):
    points: np.ndarray
    closed: bool


_STEPS = [(-1, 0), (0, 1), (1, 0), (0, -1), (-1, 1), (1, 1), (1, -1), (-1, -1)]


def _component_graph(pix: np.ndarray, shape):
    index = -np.ones(shape, dtype=np.int64)
    index[pix[:, 0], pix[:, 1]] = np.arange(len(pix))
    src, dst, wts = [], [], []
    for dr, dc in _STEPS:
        r, c = pix[:, 0] + dr, pix[:, 1] + dc
        ok = (r >= 0) & (r < shape[0]) & (c >= 0) & (c < shape[1])
        nb = np.full(len(pix), -1)
        nb[ok] = index[r[ok], c[ok]]
        has = nb >= 0
        src.append(np.nonzero(has)[0])
        dst.append(nb[has])
        wts.append(np.full(has.sum(), np.hypot(dr, dc)))
    src, dst, wts = np.concatenate(src), np.concatenate(dst), np.concatenate(wts)
    g = coo_matrix((wts, (src, dst)), shape=(len(pix), len(pix))).tocsr()
    degree = np.bincount(src, minlength=len(pix))
    return g, degree, index


def _path_from(pred: np.ndarray, start: int, end: int) -> list:
    path = [end]
    while path[-1] != start:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def _walk_loop(pix: np.ndarray, index: np.ndarray) -> list:
    # canonical start: front-most row, then left-most column
    start = int(np.lexsort((pix[:, 1], pix[:, 0]))[0])
    order = [start]
    seen = {start}
    cur = start
    while True:
        r, c = pix[cur]
        nxt = None
        for dr, dc in _STEPS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < index.shape[0] and 0 <= cc < index.shape[1]:
                j = int(index[rr, cc])
                if j >= 0 and j not in seen:
                    nxt = j
                    break
        if nxt is None:
            return order
        order.append(nxt)
        seen.add(nxt)
        cur = nxt


def trace_skeleton(m: BevMask) -> List[Trace]:
    """Vectorize a thinned mask, one trace per 8-connected component.

    Components with endpoints yield their longest endpoint-to-endpoint path
    (side branches are dropped); endpoint-free components yield a ring.
    """
    labels, n = ndimage.label(m.bits, structure=_EIGHT)
    out = []
    for lab in range(1, n + 1):
        pix = np.argwhere(labels == lab)
        if len(pix) < 2:
            continue
        g, degree, index = _component_graph(pix, m.bits.shape)
        ends = np.nonzero(degree == 1)[0]
        if len(ends):
            dist, pred = dijkstra(g, indices=ends, return_predecessors=True)
            dist = np.where(np.isfinite(dist), dist, -1.0)
            if len(ends) >= 2:
                sub = dist[:, ends]
                i, j = np.unravel_index(int(np.argmax(sub)), sub.shape)
                a, b = i, int(ends[j])
            else:
                a, b = 0, int(np.argmax(dist[0]))
            path = _path_from(pred[a], int(ends[a]), b)
            closed = False
        else:
            path = _walk_loop(pix, index)
            closed = len(path) >= 3
            if not closed and len(path) < 2:
                continue
        pts = m.grid.center_of(pix[path, 0], pix[path, 1])
        out.append(Trace(pts, closed))
    return out


# clockwise on screen (rows grow downward), starting from west
_MOORE = [(0, -1), (-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1)]


def border_follow(bits: np.ndarray) -> list:
    """Moore-neighbour tracing of the outer border of one component.

    Starts at the first set pixel in raster order and returns the border
    pixels as ``(row, col)`` tuples, stopping when the first move repeats.
    """
    img = np.pad(np.asarray(bits, dtype=bool), 1)
    set_px = np.argwhere(img)
    if not len(set_px):
        return []
    start = tuple(int(v) for v in set_px[0])

    def step(b, back):
        k0 = _MOORE.index((back[0] - b[0], back[1] - b[1]))
        prev = back
        for k in range(1, 9):
            dr, dc = _MOORE[(k0 + k) % 8]
            q = (b[0] + dr, b[1] + dc)
            if img[q]:
                return q, prev
            prev = q
        return None, None

    first, back = step(start, (start[0], start[1] - 1))
    if first is None:
        return [(start[0] - 1, start[1] - 1)]
    contour = [start]
    b = first
    while True:
        nxt, nback = step(b, back)
        if b == start and nxt == first:
            break
        contour.append(b)
        b, back = nxt, nback
    return [(r - 1, c - 1) for r, c in contour]


def mask_contours(m: BevMask) -> List[np.ndarray]:
    """Outer border of every 8-connected component, in metric coordinates."""
    labels, n = ndimage.label(m.bits, structure=_EIGHT)
    out = []
    for lab in range(1, n + 1):
        ring = border_follow(labels == lab)
        if len(ring) < 3:
            continue
        rc = np.array(ring)
        out.append(m.grid.center_of(rc[:, 0], rc[:, 1]))
    return out


def _dedupe_consecutive(pts: np.ndarray, closed: bool) -> np.ndarray:
    keep = np.ones(len(pts), dtype=bool)
    keep[1:] = np.any(pts[1:] != pts[:-1], axis=1)
    pts = pts[keep]
    if closed and len(pts) > 1 and np.array_equal(pts[0], pts[-1]):
        pts = pts[:-1]
    return pts


def mask_to_elements(
    m: BevMask,
    category: Category,
    score: Optional[float] = None,
    cfg: Optional[CompactionConfig] = None,
    crossing_mode: str = "contour",
) -> List[MapElement]:
    """Turn an instance mask into compact, canonical map elements.

    Lane dividers (and crossings in ``"skeleton"`` mode) are thinned and
    traced; crossings in ``"contour"`` mode take the outer border of each
    filled component. Road boundaries are regressed directly and rejected.
    """
    category = Category(category)
    cfg = cfg or CompactionConfig()
    if category is Category.ROAD_BOUNDARY:
        raise ValueError("road boundaries are not vectorized from masks")
    if crossing_mode not in ("contour", "skeleton"):
        raise ValueError(f"unknown crossing_mode {crossing_mode!r}")
    traces: list = []
    if category is Category.PED_CROSSING and crossing_mode == "contour":
        traces = [Trace(r, True) for r in mask_contours(m)]
    else:
        traces = trace_skeleton(thin(m))
    out = []
    for t in traces:
        pts = _dedupe_consecutive(t.points, t.closed)
        if len(pts) < (3 if t.closed else 2):
            continue
        e = MapElement(category, pts, score=score, closed=t.closed)
        out.append(compact_element(e, cfg))
    return out


def write_pgm(m: BevMask, path) -> None:
    """Binary PGM (P5), set cells as 255."""
    data = np.where(m.bits, 255, 0).astype(np.uint8)
    header = f"P5\n{m.grid.cols} {m.grid.rows}\n255\n".encode("ascii")
    Path(path).write_bytes(header + data.tobytes())


def read_pgm(path, grid: Optional[GridSpec] = None) -> BevMask:
    raw = Path(path).read_bytes()
    head = re.match(rb"P5\s+(\d+)\s+(\d+)\s+(\d+)\s", raw)
    if head is None:
        raise ValueError("not a binary PGM file")
    cols, rows, maxval = (int(v) for v in head.groups())
    body = raw[head.end() : head.end() + rows * cols]
    data = np.frombuffer(body, dtype=np.uint8).reshape(rows, cols)
    grid = grid or GridSpec(rows=rows, cols=cols)
    return BevMask(grid, data > maxval // 2)
