"""Map compaction: direction canonicalization and keypoint simplification."""

from __future__ import annotations

import enum
import heapq
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence

import numpy as np

from .geom import Category, MapElement, MapFrame


class Method(enum.Enum):
    DOUGLAS_PEUCKER = "douglas_peucker"
    VISVALINGAM = "visvalingam"


@dataclass(frozen=True)
class CategoryOverride:
    method: Method
    tolerance: float

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not self.tolerance > 0:
            raise ValueError("tolerance must be > 0")


@dataclass(frozen=True)
class CompactionConfig:
    method: Method = Method.DOUGLAS_PEUCKER
    dp_epsilon: float = 0.15
    vis_area_threshold: float = 0.10
    per_category_overrides: Dict[Category, CategoryOverride] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "method", Method(self.method))
        if not (self.dp_epsilon > 0 and self.vis_area_threshold > 0):
            raise ValueError("compaction tolerances must be > 0")

    def rule_for(self, category: Category) -> tuple:
        """(method, tolerance) used for ``category``."""
        o = self.per_category_overrides.get(category)
        if o is not None:
            return o.method, o.tolerance
        if self.method is Method.DOUGLAS_PEUCKER:
            return self.method, self.dp_epsilon
        return self.method, self.vis_area_threshold


def _key_beats(p, q) -> bool:
    """True when ``p`` comes first under (front-to-back, left-to-right)."""
    return p[1] > q[1] or (p[1] == q[1] and p[0] < q[0])


def signed_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def canonical_start(points: np.ndarray) -> int:
    # lexsort is stable, so exact duplicates resolve to the lowest index
    return int(np.lexsort((points[:, 0], -points[:, 1]))[0])


def canonicalize_direction(e: MapElement) -> MapElement:
    """Put an element into canonical point order.

    Open polylines start at the endpoint that is further front (larger y),
    ties going to the left (smaller x). Rings are oriented counterclockwise
    and rotated to start at their front-left vertex.
    """
    pts = e.points
    if not e.closed:
        if _key_beats(pts[-1], pts[0]):
            return e.with_points(pts[::-1])
        return e
    if signed_area(pts) < 0:
        pts = pts[::-1]
    start = canonical_start(pts)
    pts = np.roll(pts, -start, axis=0)
    if np.array_equal(pts, e.points):
        return e
    return e.with_points(pts)


def point_segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each row of ``p`` to segment ``ab``."""
    d = b - a
    dd = float(d @ d)
    if dd == 0.0:
        return np.hypot(*(p - a).T)
    t = np.clip((p - a) @ d / dd, 0.0, 1.0)
    proj = a + t[:, None] * d
    return np.hypot(*(p - proj).T)


def dp_keep_mask(pts: np.ndarray, epsilon: float) -> np.ndarray:
    n = len(pts)
    keep = np.zeros(n, dtype=bool)
    keep[0] = keep[-1] = True
    stack = [(0, n - 1)]
    while stack:
        first, last = stack.pop()
        if last - first < 2:
            continue
        d = point_segment_distance(pts[first + 1 : last], pts[first], pts[last])
        i = int(np.argmax(d))
        if d[i] > epsilon:
            idx = first + 1 + i
            keep[idx] = True
            stack.append((idx, last))
            stack.append((first, idx))
    return keep


def simplify_dp(points, epsilon: float) -> np.ndarray:
    """Douglas-Peucker simplification.

    Points whose distance to the current chord segment is at most
    ``epsilon`` are dropped; the result is a subsequence of the input that
    keeps both endpoints.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    pts = np.asarray(points, dtype=np.float64)
    return pts[dp_keep_mask(pts, epsilon)]


def triangle_area(a, b, c) -> float:
    return 0.5 * abs((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))


def visvalingam_removals(pts: np.ndarray, area_threshold: float, min_points: int = 2) -> list:
    """Run Visvalingam and return ``[(index, area), ...]`` in removal order."""
    n = len(pts)
    prev = list(range(-1, n - 1))
    nxt = list(range(1, n + 1))
    alive = [True] * n
    heap = [(triangle_area(pts[i - 1], pts[i], pts[i + 1]), i) for i in range(1, n - 1)]
    heapq.heapify(heap)
    current = {i: a for a, i in heap}
    removed = []
    remaining = n
    while heap and remaining > min_points:
        area, i = heapq.heappop(heap)
        if not alive[i] or current[i] != area:
            continue
        if area > area_threshold:
            break
        alive[i] = False
        removed.append((i, area))
        remaining -= 1
        p, q = prev[i], nxt[i]
        nxt[p], prev[q] = q, p
        for j in (p, q):
            if 0 < j < n - 1:
                a = triangle_area(pts[prev[j]], pts[j], pts[nxt[j]])
                current[j] = a
                heapq.heappush(heap, (a, j))
    return removed


def simplify_visvalingam(points, area_threshold: float, min_points: int = 2) -> np.ndarray:
    """Visvalingam simplification by triangle area.

    Interior points are removed smallest effective area first while that
    area is at most ``area_threshold``. Equal areas go to the lower index.
    """
    if not area_threshold > 0:
        raise ValueError("area_threshold must be > 0")
    pts = np.asarray(points, dtype=np.float64)
    keep = np.ones(len(pts), dtype=bool)
    for i, _ in visvalingam_removals(pts, area_threshold, min_points):
        keep[i] = False
    return pts[keep]


def simplify_chain(chain: np.ndarray, method: Method, tolerance: float, min_points: int = 2):
    if method is Method.DOUGLAS_PEUCKER:
        return simplify_dp(chain, tolerance)
    return simplify_visvalingam(chain, tolerance, min_points)


def simplify_element(e: MapElement, method: Method, tolerance: float) -> MapElement:
    if not e.closed:
        out = simplify_chain(e.points, method, tolerance)
    else:
        # the ring's start vertex is pinned as both chain endpoints
        out = simplify_chain(e.chain(), method, tolerance, min_points=4)[:-1]
        if len(out) < 3:
            return e
    if len(out) == len(e.points):
        return e
    return e.with_points(out)


def compact_element(e: MapElement, cfg: CompactionConfig) -> MapElement:
    method, tol = cfg.rule_for(e.category)
    return simplify_element(canonicalize_direction(e), method, tol)


def compact_frame(f: MapFrame, cfg: Optional[CompactionConfig] = None) -> MapFrame:
    cfg = cfg or CompactionConfig()
    return f.with_elements(compact_element(e, cfg) for e in f.elements)


@dataclass
class CategoryCompactionStats:
    instance_count: int = 0
    raw_point_count: int = 0
    compacted_point_count: int = 0
    ap_at: Dict[float, float] = field(default_factory=dict)

    @property
    def reduction_percent(self) -> float:
        if self.raw_point_count == 0:
            return 0.0
        return 100.0 * (1.0 - self.compacted_point_count / self.raw_point_count)


@dataclass
class CompactionReport:
    thresholds: list
    categories: Dict[Category, CategoryCompactionStats]

    def to_dict(self) -> dict:
        return {
            "kind": "compaction",
            "thresholds": [float(t) for t in self.thresholds],
            "categories": {
                c.value: {
                    "instance_count": s.instance_count,
                    "raw_point_count": s.raw_point_count,
                    "compacted_point_count": s.compacted_point_count,
                    "reduction_percent": s.reduction_percent,
                    "ap": {repr(float(t)): s.ap_at[t] for t in self.thresholds},
                }
                for c, s in self.categories.items()
            },
        }


def point_statistics(original: Sequence[MapFrame], compacted: Sequence[MapFrame]) -> dict:
    stats = {c: CategoryCompactionStats() for c in Category}
    for fo, fc in zip(original, compacted):
        for e in fo.elements:
            s = stats[e.category]
            s.instance_count += 1
            s.raw_point_count += len(e.points)
        for e in fc.elements:
            stats[e.category].compacted_point_count += len(e.points)
    return stats


def verify_compaction(
    original: Sequence[MapFrame],
    compacted: Sequence[MapFrame],
    thresholds: Sequence[float] = (0.2, 0.3, 0.4, 0.5),
    chamfer_samples: int = 100,
    threads: int = 1,
) -> CompactionReport:
    """Score compacted frames as predictions (score 1.0) against the originals."""
    from .metrics import EvalConfig, evaluate

    ids_o = [f.frame_id for f in original]
    ids_c = [f.frame_id for f in compacted]
    if sorted(ids_o) != sorted(ids_c):
        raise ValueError("original and compacted frame_id sets differ")
    by_id = {f.frame_id: f for f in compacted}
    compacted = [by_id[i] for i in ids_o]
    for fo, fc in zip(original, compacted):
        if len(fo.elements) != len(fc.elements):
            raise ValueError(f"element count mismatch in frame {fo.frame_id}")

    preds = [f.with_elements(e.with_score(1.0) for e in f.elements) for f in compacted]
    thresholds = sorted(float(t) for t in thresholds)
    report = evaluate(
        preds,
        original,
        EvalConfig(thresholds=thresholds, chamfer_samples=chamfer_samples),
        threads=threads,
    )
    stats = point_statistics(original, compacted)
    for c, s in stats.items():
        s.ap_at = dict(report.categories[c].ap_per_threshold)
    return CompactionReport(thresholds=thresholds, categories=stats)
