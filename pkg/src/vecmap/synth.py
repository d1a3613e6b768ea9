"""Seeded synthetic road scenes and noisy predictions.

A single road is laid out in world coordinates as a clothoid-like
centerline (curvature varies linearly between random knots). Boundaries
and lane dividers are parallel offsets of it; crossings are rectangles
spanning the road. The ego drives along the first lane and every frame
sees the road through the perception window, evenly resampled.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .compact import canonicalize_direction
from .geom import (
    DEFAULT_WINDOW,
    Category,
    MapElement,
    MapFrame,
    PerceptionWindow,
    Pose2,
    clip_to_window,
    polyline_length,
    resample_polyline,
    transform_points,
)
from .serialize import canonical_order


@dataclass(frozen=True)
class NoiseModel:
    point_jitter: float = 0.0
    dropout: float = 0.0
    fp_rate: float = 0.0
    tp_score_spread: float = 0.0
    fp_score_range: Tuple[float, float] = (0.05, 0.5)

    def __post_init__(self):
        if not (0 <= self.dropout <= 1 and 0 <= self.tp_score_spread <= 1):
            raise ValueError("dropout and tp_score_spread must be in [0, 1]")
        object.__setattr__(self, "fp_score_range", tuple(float(v) for v in self.fp_score_range))
        lo, hi = self.fp_score_range
        if not 0 <= lo <= hi <= 1:
            raise ValueError("fp_score_range must satisfy 0 <= lo <= hi <= 1")
        if self.point_jitter < 0 or self.fp_rate < 0:
            raise ValueError("point_jitter and fp_rate must be >= 0")


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    n_frames: int = 100
    lanes_per_frame: int = 3
    lane_width: float = 3.5
    curvature_range: Tuple[float, float] = (-0.01, 0.01)
    curvature_knot_spacing: float = 40.0
    crossing_spacing: float = 35.0
    crossing_depth: float = 4.0
    ego_step: float = 2.0
    frame_interval_us: int = 100_000
    sample_spacing: float = 0.2
    ego_lane: int = 0
    window: PerceptionWindow = field(default_factory=lambda: DEFAULT_WINDOW)
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        object.__setattr__(self, "curvature_range", tuple(float(v) for v in self.curvature_range))
        if self.n_frames < 0 or self.lanes_per_frame < 1:
            raise ValueError("n_frames must be >= 0 and lanes_per_frame >= 1")
        if not 0 <= self.ego_lane < self.lanes_per_frame:
            raise ValueError("ego_lane must index one of the lanes")
        if not (self.lane_width > 0 and self.sample_spacing > 0 and self.crossing_spacing > 0):
            raise ValueError("lane_width, sample_spacing and crossing_spacing must be > 0")


_DS = 0.1


def _centerline(rng: np.random.Generator, length: float, cfg: SynthConfig):
    n = int(np.ceil(length / _DS)) + 1
    s = np.arange(n) * _DS
    knots = np.arange(0.0, length + cfg.curvature_knot_spacing, cfg.curvature_knot_spacing)
    kappa = np.interp(s, knots, rng.uniform(*cfg.curvature_range, size=len(knots)))
    theta = np.concatenate([[0.0], np.cumsum(0.5 * (kappa[1:] + kappa[:-1]) * _DS)])
    tangent = np.stack([-np.sin(theta), np.cos(theta)], axis=1)
    pts = np.concatenate([[[0.0, 0.0]], np.cumsum(0.5 * (tangent[1:] + tangent[:-1]) * _DS, axis=0)])
    normal = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    return s, pts, theta, normal


def build_world(rng: np.random.Generator, cfg: SynthConfig):
    """World-frame map elements and the ego trajectory."""
    margin = 80.0
    length = 2 * margin + cfg.n_frames * cfg.ego_step
    s, center, theta, normal = _centerline(rng, length, cfg)
    half = 0.5 * cfg.lanes_per_frame * cfg.lane_width
    world = [
        MapElement(Category.ROAD_BOUNDARY, center - half * normal),
        MapElement(Category.ROAD_BOUNDARY, center + half * normal),
    ]
    for k in range(1, cfg.lanes_per_frame):
        world.append(MapElement(Category.LANE_DIVIDER, center + (-half + k * cfg.lane_width) * normal))
    pos = cfg.crossing_spacing * rng.uniform(0.2, 1.0)
    while pos < length:
        i = int(round(pos / _DS))
        c, n = center[i], normal[i]
        t = np.array([-n[1], n[0]])
        d = 0.5 * cfg.crossing_depth
        ring = np.array([c - half * n - d * t, c + half * n - d * t, c + half * n + d * t, c - half * n + d * t])
        world.append(MapElement(Category.PED_CROSSING, ring, closed=True))
        pos += cfg.crossing_spacing * rng.uniform(0.6, 1.4)
    lane_offset = -half + (cfg.ego_lane + 0.5) * cfg.lane_width
    poses = []
    for k in range(cfg.n_frames):
        i = int(round((margin + k * cfg.ego_step) / _DS))
        p = center[i] + lane_offset * normal[i]
        poses.append(Pose2(float(p[0]), float(p[1]), float(theta[i])))
    return world, poses


def even_resample(e: MapElement, spacing: float) -> MapElement:
    """Resample at (approximately) fixed arc-length spacing."""
    chain = e.chain()
    n = max(2, int(round(polyline_length(chain) / spacing)) + 1)
    if e.closed:
        n = max(n, 4)
        return e.with_points(resample_polyline(chain, n)[:-1])
    return e.with_points(resample_polyline(chain, n))


def bounding_circles(world: List[MapElement]) -> np.ndarray:
    """Rows of (cx, cy, radius) enclosing each element."""
    out = np.empty((len(world), 3))
    for k, e in enumerate(world):
        lo, hi = e.points.min(axis=0), e.points.max(axis=0)
        out[k, :2] = 0.5 * (lo + hi)
        out[k, 2] = 0.5 * np.hypot(*(hi - lo))
    return out


def view_from(
    world: List[MapElement], pose: Pose2, cfg: SynthConfig, circles: Optional[np.ndarray] = None
) -> List[MapElement]:
    w = cfg.window
    reach = np.hypot(w.x_max - w.x_min, w.y_max - w.y_min)
    if circles is None:
        circles = bounding_circles(world)
    gap = np.hypot(circles[:, 0] - pose.tx, circles[:, 1] - pose.ty) - circles[:, 2]
    out = []
    for k in np.nonzero(gap < reach)[0]:
        e = world[k]
        # distance to the ego is rotation invariant, so trim before transforming
        near = np.hypot(e.points[:, 0] - pose.tx, e.points[:, 1] - pose.ty) < reach
        if not near.any():
            continue
        pts = e.points
        if not e.closed:
            idx = np.nonzero(near)[0]
            lo, hi = max(idx[0] - 1, 0), min(idx[-1] + 2, len(pts))
            pts = pts[lo:hi]
            if len(pts) < 2:
                continue
        local = transform_points(Pose2(), pose, pts)
        for piece in clip_to_window(e.with_points(local), w, 0.5):
            out.append(canonicalize_direction(even_resample(piece, cfg.sample_spacing)))
    return canonical_order(out)


def _fp_element(rng: np.random.Generator, cfg: SynthConfig) -> List[MapElement]:
    w = cfg.window
    cat = list(Category)[int(rng.integers(3))]
    start = np.array([rng.uniform(w.x_min, w.x_max), rng.uniform(w.y_min, w.y_max)])
    ang = rng.uniform(-np.pi, np.pi)
    if cat is Category.PED_CROSSING:
        a, b = rng.uniform(2.0, 6.0), rng.uniform(2.0, 5.0)
        u = np.array([np.cos(ang), np.sin(ang)])
        v = np.array([-u[1], u[0]])
        ring = np.array([start, start + a * u, start + a * u + b * v, start + b * v])
        e = MapElement(cat, ring, closed=True)
    else:
        length = rng.uniform(5.0, 20.0)
        end = start + length * np.array([np.cos(ang), np.sin(ang)])
        e = MapElement(cat, np.array([start, end]))
    return [even_resample(p, cfg.sample_spacing) for p in clip_to_window(e, w, 0.5)]


def perturb(gt: List[MapElement], rng: np.random.Generator, cfg: SynthConfig) -> List[MapElement]:
    nm = cfg.noise
    out = []
    for e in gt:
        drop = rng.random() < nm.dropout
        score = 1.0 - rng.uniform(0.0, nm.tp_score_spread) if nm.tp_score_spread > 0 else 1.0
        if drop:
            continue
        pts = e.points
        if nm.point_jitter > 0:
            pts = pts + rng.normal(0.0, nm.point_jitter, size=pts.shape)
            pieces = clip_to_window(e.with_points(pts), cfg.window, 0.5)
        else:
            pieces = [e]
        out.extend(p.with_score(score) for p in pieces)
    n_fp = rng.poisson(nm.fp_rate * len(gt)) if nm.fp_rate > 0 else 0
    for _ in range(n_fp):
        score = rng.uniform(*nm.fp_score_range)
        out.extend(p.with_score(score) for p in _fp_element(rng, cfg))
    return canonical_order(out)


def generate_synthetic(cfg: SynthConfig) -> Tuple[List[MapFrame], List[MapFrame]]:
    """Ground-truth and prediction sequences, fully determined by ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    world, poses = build_world(rng, cfg)
    circles = bounding_circles(world)
    gt, preds = [], []
    for k, pose in enumerate(poses):
        fid = f"s{cfg.seed}-{k:05d}"
        ts = k * cfg.frame_interval_us
        elems = view_from(world, pose, cfg, circles)
        gt.append(MapFrame(fid, ts, pose, elems))
        preds.append(MapFrame(fid, ts, pose, perturb(elems, rng, cfg)))
    return gt, preds
