"""Chamfer-based instance matching and average precision."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .geom import CATEGORIES, Category, MapElement, MapFrame, chamfer_batch, resample_polyline

DEFAULT_THRESHOLDS = (0.5, 1.0, 1.5)


@dataclass(frozen=True)
class EvalConfig:
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS
    chamfer_samples: int = 100
    categories: Sequence[Category] = CATEGORIES

    def __post_init__(self):
        th = tuple(float(t) for t in self.thresholds)
        if not th or any(t <= 0 for t in th) or any(b <= a for a, b in zip(th, th[1:])):
            raise ValueError(f"thresholds must be positive and strictly increasing: {th}")
        if self.chamfer_samples < 2:
            raise ValueError("chamfer_samples must be >= 2")
        object.__setattr__(self, "thresholds", th)
        object.__setattr__(self, "categories", tuple(Category(c) for c in self.categories))


@dataclass
class MatchResult:
    """Greedy matching outcome; entries follow descending score order."""

    order: List[int]
    is_tp: List[bool]
    matched_gt_index: List[Optional[int]]
    chamfer: List[float]
    scores: List[float]

    @property
    def n_tp(self) -> int:
        return sum(self.is_tp)


def _samples(e: MapElement, n: int) -> np.ndarray:
    return resample_polyline(e.chain(), n)


def _bbox_gaps(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance between the bounding boxes of every ``a[i]`` and ``b[j]``."""
    lo_a, hi_a = a.min(axis=1)[:, None], a.max(axis=1)[:, None]
    lo_b, hi_b = b.min(axis=1)[None], b.max(axis=1)[None]
    gap = np.maximum(0.0, np.maximum(lo_a - hi_b, lo_b - hi_a))
    return np.hypot(gap[..., 0], gap[..., 1])


_CHUNK = 128


def chamfer_matrix(
    preds: Sequence[MapElement],
    gts: Sequence[MapElement],
    samples: int = 100,
    prune_at: Optional[float] = None,
) -> np.ndarray:
    """Pairwise chamfer distances, ``(len(preds), len(gts))``.

    With ``prune_at`` set, pairs whose bounding boxes are at least that far
    apart are reported as ``inf`` without being evaluated; the box gap is a
    lower bound on every nearest-neighbour distance.
    """
    out = np.full((len(preds), len(gts)), np.inf)
    if not len(preds) or not len(gts):
        return out
    ps = np.stack([_samples(e, samples) for e in preds])
    gs = np.stack([_samples(e, samples) for e in gts])
    if prune_at is None:
        keep = np.ones(out.shape, dtype=bool)
    else:
        keep = _bbox_gaps(ps, gs) < prune_at
    ii, jj = np.nonzero(keep)
    for k in range(0, len(ii), _CHUNK):
        i, j = ii[k : k + _CHUNK], jj[k : k + _CHUNK]
        out[i, j] = chamfer_batch(ps[i], gs[j])
    return out


def score_order(scores: Sequence[float]) -> List[int]:
    """Indices by descending score; ties keep input order."""
    return sorted(range(len(scores)), key=lambda i: -scores[i])


def greedy_match(cd: np.ndarray, scores: Sequence[float], tau: float) -> MatchResult:
    order = score_order(scores)
    used = np.zeros(cd.shape[1], dtype=bool)
    is_tp, matched, chamfer = [], [], []
    for i in order:
        row = np.where(used, np.inf, cd[i]) if cd.shape[1] else cd[i]
        j = int(np.argmin(row)) if row.size else -1
        d = float(row[j]) if j >= 0 else float("inf")
        if j >= 0 and d < tau:
            used[j] = True
            is_tp.append(True)
            matched.append(j)
        else:
            is_tp.append(False)
            matched.append(None)
        chamfer.append(d)
    return MatchResult(order, is_tp, matched, chamfer, [scores[i] for i in order])


def _check_scored(preds):
    for e in preds:
        if e.score is None:
            raise ValueError("every prediction needs a score")


def match_instances(
    preds: Sequence[MapElement], gts: Sequence[MapElement], tau: float, samples: int = 100
) -> MatchResult:
    """Greedy score-ordered matching of predictions to ground truth.

    Each prediction takes the closest still-unmatched GT if its chamfer
    distance is below ``tau``; otherwise it is a false positive.
    """
    _check_scored(preds)
    cats = {e.category for e in list(preds) + list(gts)}
    if len(cats) > 1:
        raise ValueError("match_instances expects a single category")
    cd = chamfer_matrix(preds, gts, samples)
    return greedy_match(cd, [e.score for e in preds], tau)


def average_precision(match, n_gt: int) -> float:
    """All-points interpolated AP.

    ``match`` is a :class:`MatchResult` or a score-ordered sequence of TP flags.
    """
    flags = match.is_tp if isinstance(match, MatchResult) else list(match)
    if n_gt == 0:
        return 0.0 if flags else 1.0
    if not flags:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    fp = np.cumsum(1.0 - np.asarray(flags, dtype=np.float64))
    recall = tp / n_gt
    precision = tp / (tp + fp)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev_r) * envelope))


@dataclass
class CategoryAP:
    ap_per_threshold: Dict[float, float]
    n_pred: int
    n_gt: int

    @property
    def ap_mean(self) -> float:
        return float(np.mean(list(self.ap_per_threshold.values())))


@dataclass
class EvalReport:
    thresholds: tuple
    categories: Dict[Category, CategoryAP] = field(default_factory=dict)

    @property
    def mAP(self) -> float:
        return float(np.mean([c.ap_mean for c in self.categories.values()]))

    def to_dict(self) -> dict:
        return {
            "kind": "eval",
            "thresholds": list(self.thresholds),
            "categories": {
                c.value: {
                    "ap": {repr(t): v for t, v in r.ap_per_threshold.items()},
                    "ap_mean": r.ap_mean,
                    "n_pred": r.n_pred,
                    "n_gt": r.n_gt,
                }
                for c, r in self.categories.items()
            },
            "mAP": self.mAP,
        }

    def table(self) -> str:
        names = {
            Category.PED_CROSSING: "AP_crossing",
            Category.LANE_DIVIDER: "AP_divider",
            Category.ROAD_BOUNDARY: "AP_boundary",
        }
        cats = list(self.categories)
        header = " | ".join(f"{names[c]:>11}" for c in cats) + " | " + f"{'mAP':>7}"
        rows = [f"{'tau':>6} | " + header, "-" * (9 + len(header))]
        for t in self.thresholds:
            cells = " | ".join(f"{100 * self.categories[c].ap_per_threshold[t]:11.2f}" for c in cats)
            mean_t = np.mean([self.categories[c].ap_per_threshold[t] for c in cats])
            rows.append(f"{t:6.2f} | {cells} | {100 * mean_t:7.2f}")
        cells = " | ".join(f"{100 * self.categories[c].ap_mean:11.2f}" for c in cats)
        rows.append(f"{'mean':>6} | {cells} | {100 * self.mAP:7.2f}")
        return "\n".join(rows)


def _align(preds: Sequence[MapFrame], gts: Sequence[MapFrame]) -> list:
    gt_by_id = {f.frame_id: f for f in gts}
    if len(gt_by_id) != len(gts):
        raise ValueError("duplicate frame_id in ground truth")
    pred_ids = [f.frame_id for f in preds]
    if len(set(pred_ids)) != len(pred_ids):
        raise ValueError("duplicate frame_id in predictions")
    missing = [i for i in pred_ids if i not in gt_by_id]
    if missing:
        raise ValueError(f"prediction frames without ground truth: {missing[:5]}")
    unmatched = set(gt_by_id) - set(pred_ids)
    if unmatched:
        raise ValueError(f"ground-truth frames without predictions: {sorted(unmatched)[:5]}")
    return [(p, gt_by_id[p.frame_id]) for p in preds]


def _frame_flags(pair, cfg: EvalConfig) -> dict:
    """Per category: (scores in match order, {tau: tp flags}, n_pred, n_gt)."""
    pf, gf = pair
    out = {}
    prune = cfg.thresholds[-1]
    for c in cfg.categories:
        preds, gts = pf.by_category(c), gf.by_category(c)
        _check_scored(preds)
        scores = [e.score for e in preds]
        cd = chamfer_matrix(preds, gts, cfg.chamfer_samples, prune_at=prune)
        flags = {}
        ordered_scores = None
        for t in cfg.thresholds:
            m = greedy_match(cd, scores, t)
            flags[t] = m.is_tp
            ordered_scores = m.scores
        out[c] = (ordered_scores or [], flags, len(preds), len(gts))
    return out


def evaluate(
    preds: Sequence[MapFrame],
    gts: Sequence[MapFrame],
    cfg: Optional[EvalConfig] = None,
    threads: int = 1,
) -> EvalReport:
    """Pool matches over all frames and compute AP per category and threshold."""
    cfg = cfg or EvalConfig()
    pairs = _align(preds, gts)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            per_frame = list(ex.map(lambda p: _frame_flags(p, cfg), pairs))
    else:
        per_frame = [_frame_flags(p, cfg) for p in pairs]

    report = EvalReport(thresholds=cfg.thresholds)
    for c in cfg.categories:
        scores: list = []
        flags = {t: [] for t in cfg.thresholds}
        n_pred = n_gt = 0
        for fr in per_frame:
            s, f, npred, ngt = fr[c]
            scores.extend(s)
            for t in cfg.thresholds:
                flags[t].extend(f[t])
            n_pred += npred
            n_gt += ngt
        order = score_order(scores)
        aps = {t: average_precision([flags[t][i] for i in order], n_gt) for t in cfg.thresholds}
        report.categories[c] = CategoryAP(aps, n_pred, n_gt)
    return report
