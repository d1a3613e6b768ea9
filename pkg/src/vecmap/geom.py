"""Geometric value types and primitives for vectorized BEV maps.

Coordinates are metric and ego-centric: X is lateral (right is +X), Y is
longitudinal (front is +Y). Polylines are stored as ``(N, 2)`` float64
arrays.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np


class Category(enum.Enum):
    PED_CROSSING = "ped_crossing"
    LANE_DIVIDER = "lane_divider"
    ROAD_BOUNDARY = "road_boundary"

    @property
    def order(self) -> int:
        return _CATEGORY_ORDER[self]


_CATEGORY_ORDER = {c: i for i, c in enumerate(Category)}
CATEGORIES = tuple(Category)


def as_points(points, *, check_polyline: bool = True) -> np.ndarray:
    """Convert to a read-only ``(N, 2)`` float array and validate it.

    With ``check_polyline`` the polyline invariants are enforced: at least
    two points, finite coordinates and no repeated consecutive points.
    """
    arr = np.array(points, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected an (N, 2) point array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("point coordinates must be finite")
    if check_polyline:
        if len(arr) < 2:
            raise ValueError("a polyline needs at least 2 points")
        if np.any(np.all(arr[1:] == arr[:-1], axis=1)):
            raise ValueError("polyline has repeated consecutive points")
    arr.setflags(write=False)
    return arr


def normalize_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, 2.0 * math.pi)
    if a <= -math.pi:
        a += 2.0 * math.pi
    elif a > math.pi:
        a -= 2.0 * math.pi
    return a


@dataclass(frozen=True)
class Pose2:
    """SE(2) ego-to-world pose: ``world = R(yaw) @ p + (tx, ty)``."""

    tx: float = 0.0
    ty: float = 0.0
    yaw: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.tx, self.ty, self.yaw)):
            raise ValueError("pose components must be finite")
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    def rotation(self) -> np.ndarray:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return np.array([[c, -s], [s, c]])

    def translation(self) -> np.ndarray:
        return np.array([self.tx, self.ty])


@dataclass(frozen=True)
class PerceptionWindow:
    x_min: float = -15.0
    x_max: float = 15.0
    y_min: float = -30.0
    y_max: float = 30.0

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError(f"degenerate perception window {self}")

    def contains(self, pts: np.ndarray, tol: float = 0.0) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
        return (
            (pts[:, 0] >= self.x_min - tol)
            & (pts[:, 0] <= self.x_max + tol)
            & (pts[:, 1] >= self.y_min - tol)
            & (pts[:, 1] <= self.y_max + tol)
        )


DEFAULT_WINDOW = PerceptionWindow()


@dataclass(frozen=True, eq=False)
class MapElement:
    """One vectorized map instance.

    ``closed`` marks a ring; the closing segment from the last point back to
    the first is implicit and the first point is never repeated at the end.
    """

    category: Category
    points: np.ndarray
    score: Optional[float] = None
    closed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "category", Category(self.category))
        pts = as_points(self.points)
        if self.closed and np.array_equal(pts[0], pts[-1]):
            raise ValueError("closed ring must not repeat its first point")
        object.__setattr__(self, "points", pts)
        if self.score is not None:
            score = float(self.score)
            if not 0.0 <= score <= 1.0:
                raise ValueError(f"score {score} outside [0, 1]")
            object.__setattr__(self, "score", score)

    def chain(self) -> np.ndarray:
        """Point sequence with the closing vertex appended for rings."""
        if self.closed:
            return np.vstack([self.points, self.points[:1]])
        return self.points

    def with_points(self, points, closed: Optional[bool] = None) -> "MapElement":
        return replace(self, points=points, closed=self.closed if closed is None else closed)

    def with_score(self, score: Optional[float]) -> "MapElement":
        return replace(self, score=score)

    def __eq__(self, other):
        if not isinstance(other, MapElement):
            return NotImplemented
        return (
            self.category is other.category
            and self.closed == other.closed
            and self.score == other.score
            and self.points.shape == other.points.shape
            and bool(np.array_equal(self.points, other.points))
        )

    def __hash__(self):
        return hash((self.category, self.closed, self.score, self.points.tobytes()))

    def __repr__(self):
        return (
            f"MapElement({self.category.value}, n={len(self.points)}, "
            f"score={self.score}, closed={self.closed})"
        )


@dataclass(frozen=True)
class MapFrame:
    frame_id: str
    timestamp: int
    pose: Pose2 = field(default_factory=Pose2)
    elements: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "elements", tuple(self.elements))

    def by_category(self, category: Category) -> list:
        return [e for e in self.elements if e.category is category]

    def with_elements(self, elements) -> "MapFrame":
        return replace(self, elements=tuple(elements))


def segment_lengths(pts: np.ndarray) -> np.ndarray:
    return np.hypot(*np.diff(pts, axis=0).T)


def polyline_length(points) -> float:
    """Sum of Euclidean segment lengths of an open chain.

    Pass ``MapElement.chain()`` to include the closing segment of a ring.
    """
    pts = np.asarray(points, dtype=np.float64)
    return float(segment_lengths(pts).sum())


def resample_polyline(points, n: int) -> np.ndarray:
    """Return ``n`` points at equal arc-length spacing along the chain.

    The first and last output points are the input endpoints exactly.
    """
    if n < 2:
        raise ValueError(f"resample count must be >= 2, got {n}")
    pts = np.asarray(points, dtype=np.float64)
    seg = segment_lengths(pts)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    targets = np.linspace(0.0, total, n)
    # segment index per target; zero-length segments are skipped by searchsorted
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seg) - 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.where(seg[idx] > 0, (targets - cum[idx]) / seg[idx], 0.0)
    out = pts[idx] + t[:, None] * (pts[idx + 1] - pts[idx])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return out


def chamfer_from_samples(a: np.ndarray, b: np.ndarray) -> float:
    return float(chamfer_batch(a[None], b[None])[0])


def chamfer_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Chamfer distance of K sample-set pairs: ``(K, n, 2)``, ``(K, m, 2)`` -> ``(K,)``."""
    ax, ay = np.ascontiguousarray(a[..., 0]), np.ascontiguousarray(a[..., 1])
    bx, by = np.ascontiguousarray(b[..., 0]), np.ascontiguousarray(b[..., 1])
    d2 = ax[:, :, None] - bx[:, None, :]
    dy = ay[:, :, None] - by[:, None, :]
    d2 *= d2
    dy *= dy
    d2 += dy
    # sqrt is monotone and correctly rounded, so it commutes with min exactly
    return 0.5 * (np.sqrt(d2.min(axis=2)).mean(axis=1) + np.sqrt(d2.min(axis=1)).mean(axis=1))


def chamfer_distance(a, b, samples: int = 100) -> float:
    """Symmetric mean nearest-neighbour distance after resampling both chains.

    ``a`` and ``b`` may be point arrays or :class:`MapElement` instances (rings
    are resampled along their closed chain).
    """
    if samples < 2:
        raise ValueError("samples must be >= 2")
    ra = resample_polyline(_chain_of(a), samples)
    rb = resample_polyline(_chain_of(b), samples)
    return chamfer_from_samples(ra, rb)


def _chain_of(x) -> np.ndarray:
    if isinstance(x, MapElement):
        return x.chain()
    return np.asarray(x, dtype=np.float64)


def transform_points(src: Pose2, dst: Pose2, pts) -> np.ndarray:
    """Re-express points given in the ``src`` ego frame in the ``dst`` frame."""
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    world = pts @ src.rotation().T + src.translation()
    return (world - dst.translation()) @ dst.rotation()


def transform_element(e: MapElement, src: Pose2, dst: Pose2) -> MapElement:
    return e.with_points(transform_points(src, dst, e.points))


def _clip_segment(p0, p1, w: PerceptionWindow):
    """Liang-Barsky clip; returns (t0, t1) of the visible part or None."""
    dx, dy = p1[0] - p0[0], p1[1] - p0[1]
    t0, t1 = 0.0, 1.0
    for p, q in (
        (-dx, p0[0] - w.x_min),
        (dx, w.x_max - p0[0]),
        (-dy, p0[1] - w.y_min),
        (dy, w.y_max - p0[1]),
    ):
        if p == 0.0:
            if q < 0.0:
                return None
            continue
        r = q / p
        if p < 0.0:
            t0 = max(t0, r)
        else:
            t1 = min(t1, r)
        if t0 > t1:
            return None
    return t0, t1


def _lerp(p0, p1, t):
    if t == 0.0:
        return p0.copy()
    if t == 1.0:
        return p1.copy()
    out = p0 + t * (p1 - p0)
    return out


def _snap(p, w: PerceptionWindow) -> np.ndarray:
    # boundary intersections land exactly on the window edges
    return np.clip(p, [w.x_min, w.y_min], [w.x_max, w.y_max])


def clip_chain(chain: np.ndarray, w: PerceptionWindow) -> list:
    """Split a chain into the contiguous pieces that lie inside ``w``."""
    chain = np.asarray(chain, dtype=np.float64)
    n = len(chain)
    inside = w.contains(chain)
    found = []  # (first segment index, piece points)
    # segments with both ends outside can still pass through the window
    lo_pt = np.minimum(chain[:-1], chain[1:])
    hi_pt = np.maximum(chain[:-1], chain[1:])
    overlaps = (
        (lo_pt[:, 0] <= w.x_max)
        & (hi_pt[:, 0] >= w.x_min)
        & (lo_pt[:, 1] <= w.y_max)
        & (hi_pt[:, 1] >= w.y_min)
    )
    both_out = np.nonzero(~inside[:-1] & ~inside[1:] & overlaps)[0]
    for i in both_out:
        span = _clip_segment(chain[i], chain[i + 1], w)
        if span is None or span[0] >= span[1]:
            continue
        a = _snap(_lerp(chain[i], chain[i + 1], span[0]), w)
        b = _snap(_lerp(chain[i], chain[i + 1], span[1]), w)
        if not np.array_equal(a, b):
            found.append((i, [a, b]))
    # maximal runs of inside points, extended to their boundary crossings
    edges = np.diff(np.concatenate([[0], inside.astype(np.int8), [0]]))
    for lo, hi in zip(np.nonzero(edges == 1)[0], np.nonzero(edges == -1)[0] - 1):
        pts = list(chain[lo : hi + 1])
        if lo > 0:
            span = _clip_segment(chain[lo - 1], chain[lo], w)
            entry = _snap(_lerp(chain[lo - 1], chain[lo], span[0]), w)
            if not np.array_equal(entry, pts[0]):
                pts.insert(0, entry)
        if hi < n - 1:
            span = _clip_segment(chain[hi], chain[hi + 1], w)
            exit_ = _snap(_lerp(chain[hi], chain[hi + 1], span[1]), w)
            if not np.array_equal(exit_, pts[-1]):
                pts.append(exit_)
        found.append((lo - 1 if lo > 0 else 0, pts))
    found.sort(key=lambda item: item[0])
    return [np.array(p) for _, p in found if len(p) >= 2]


def clip_to_window(
    e: MapElement, w: PerceptionWindow = DEFAULT_WINDOW, min_length: float = 0.5
) -> list:
    """Cut an element to the perception window.

    Each contiguous inside piece becomes its own element; pieces shorter than
    ``min_length`` are dropped. A ring that gets cut becomes open.
    """
    if np.all(w.contains(e.points)):
        return [e] if polyline_length(e.chain()) >= min_length else []
    chain = e.chain()
    pieces = clip_chain(chain, w)
    if e.closed and len(pieces) > 1:
        # a ring's first and last pieces are one piece joined at the seam
        first, last = pieces[0], pieces[-1]
        if np.array_equal(first[0], chain[0]) and np.array_equal(last[-1], chain[-1]):
            pieces = [np.vstack([last, first[1:]])] + pieces[1:-1]
    out = []
    for piece in pieces:
        if polyline_length(piece) < min_length:
            continue
        out.append(e.with_points(piece, closed=False))
    return out


def rigid(points, yaw: float, tx: float, ty: float) -> np.ndarray:
    """Apply a rotation then translation to a point array."""
    return transform_points(Pose2(tx, ty, yaw), Pose2(), points)
