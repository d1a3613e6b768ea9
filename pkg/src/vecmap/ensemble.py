"""Chamfer-deduplicating merge of prediction sets.

Proposals are visited in descending score order. A proposal is dropped if
it lies within the chamfer threshold of anything already in the base set;
otherwise it joins the base set and the output with its score decayed once.
The same merge serves multi-model ensembling (proposals from other models)
and multi-frame ensembling (proposals from pose-aligned past frames).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .geom import (
    CATEGORIES,
    DEFAULT_WINDOW,
    Category,
    MapElement,
    MapFrame,
    PerceptionWindow,
    chamfer_from_samples,
    clip_to_window,
    resample_polyline,
    transform_element,
)


@dataclass(frozen=True)
class EnsembleConfig:
    cd_threshold: float = 1.0
    score_decay: float = 0.9
    chamfer_samples: int = 10
    max_history: int = 3
    per_category_threshold: Dict[Category, float] = field(default_factory=dict)
    clip_min_length: float = 0.5

    def __post_init__(self):
        if not self.cd_threshold > 0:
            raise ValueError("cd_threshold must be > 0")
        if not 0 < self.score_decay <= 1:
            raise ValueError("score_decay must be in (0, 1]")
        if self.chamfer_samples < 2 or self.max_history < 0:
            raise ValueError("invalid chamfer_samples or max_history")
        for t in self.per_category_threshold.values():
            if not t > 0:
                raise ValueError("per-category thresholds must be > 0")

    def threshold_for(self, category: Category) -> float:
        return self.per_category_threshold.get(category, self.cd_threshold)


def ensemble_merge(
    base: Sequence[MapElement],
    proposals: Sequence[MapElement],
    cfg: Optional[EnsembleConfig] = None,
    threshold: Optional[float] = None,
) -> Tuple[List[MapElement], List[float]]:
    """Return the accepted proposals (with decayed scores) and their scores."""
    cfg = cfg or EnsembleConfig()
    T = cfg.cd_threshold if threshold is None else threshold
    for p in proposals:
        if p.score is None:
            raise ValueError("every proposal needs a score")
    n = cfg.chamfer_samples
    order = sorted(range(len(proposals)), key=lambda i: -proposals[i].score)
    working = [resample_polyline(b.chain(), n) for b in base]
    added, added_scores = [], []
    for i in order:
        head = proposals[i]
        hs = resample_polyline(head.chain(), n)
        if any(chamfer_from_samples(hs, b) < T for b in working):
            continue
        working.append(hs)
        score = head.score * cfg.score_decay
        added.append(head.with_score(score))
        added_scores.append(score)
    return added, added_scores


def merge_frame(
    base: MapFrame, proposals: Sequence[MapElement], cfg: EnsembleConfig
) -> MapFrame:
    """Merge ``proposals`` into ``base`` category by category."""
    elements = list(base.elements)
    for c in CATEGORIES:
        props = [e for e in proposals if e.category is c]
        if not props:
            continue
        added, _ = ensemble_merge(base.by_category(c), props, cfg, cfg.threshold_for(c))
        elements.extend(added)
    return base.with_elements(elements)


def multi_model_ensemble(
    model_frames: Sequence[MapFrame], cfg: Optional[EnsembleConfig] = None
) -> MapFrame:
    """The first model is the base; all other models supply proposals."""
    cfg = cfg or EnsembleConfig()
    if not model_frames:
        raise ValueError("need at least one model")
    ids = {f.frame_id for f in model_frames}
    if len(ids) != 1:
        raise ValueError(f"frame_id mismatch across models: {sorted(ids)}")
    base, rest = model_frames[0], model_frames[1:]
    proposals = [e for f in rest for e in f.elements]
    return merge_frame(base, proposals, cfg)


def history_proposals(
    current: MapFrame,
    history: Sequence[MapFrame],
    window: PerceptionWindow = DEFAULT_WINDOW,
    min_length: float = 0.5,
) -> List[MapElement]:
    """Past-frame elements re-expressed in the current ego frame and clipped."""
    out = []
    for h in history:
        if h.pose is None or current.pose is None:
            raise ValueError("multi-frame ensembling needs poses on every frame")
        for e in h.elements:
            moved = transform_element(e, h.pose, current.pose)
            out.extend(clip_to_window(moved, window, min_length))
    return out


def multi_frame_ensemble(
    current: MapFrame,
    history: Sequence[MapFrame],
    cfg: Optional[EnsembleConfig] = None,
    window: PerceptionWindow = DEFAULT_WINDOW,
) -> MapFrame:
    """Recover elements from recent frames (``history`` is most recent first)."""
    cfg = cfg or EnsembleConfig()
    if len(history) > cfg.max_history:
        raise ValueError(f"history length {len(history)} exceeds max_history {cfg.max_history}")
    return merge_frame(current, history_proposals(current, history, window, cfg.clip_min_length), cfg)


def sequence_multi_frame(
    frames: Sequence[MapFrame],
    cfg: Optional[EnsembleConfig] = None,
    window: PerceptionWindow = DEFAULT_WINDOW,
) -> List[MapFrame]:
    """Apply multi-frame ensembling along a time-ordered sequence.

    History is taken from the raw predictions of the preceding frames, so
    recovered elements are never propagated a second time.
    """
    cfg = cfg or EnsembleConfig()
    out = []
    for k, f in enumerate(frames):
        lo = max(0, k - cfg.max_history)
        hist = list(reversed(frames[lo:k]))
        out.append(multi_frame_ensemble(f, hist, cfg, window))
    return out
