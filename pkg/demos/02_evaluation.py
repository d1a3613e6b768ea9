"""
Chamfer-distance average precision
==================================

"""

from vecmap import EvalConfig, evaluate, match_instances, average_precision
from vecmap.geom import Category, MapElement
from vecmap.synth import NoiseModel, SynthConfig, generate_synthetic

# two ground-truth dividers, a confident false positive and one exact hit
gts = [MapElement(Category.LANE_DIVIDER, [(0, -10), (0, 10)]),
       MapElement(Category.LANE_DIVIDER, [(5, -10), (5, 10)])]
preds = [MapElement(Category.LANE_DIVIDER, [(40, -10), (40, 10)], score=0.95),
         gts[0].with_score(0.9)]

m = match_instances(preds, gts, tau=0.5)
print(m.is_tp, m.chamfer)
print(average_precision(m, len(gts)))  # 0.25

# a noisy model on a synthetic sequence
noise = NoiseModel(point_jitter=0.15, dropout=0.15, fp_rate=0.2, tp_score_spread=0.4)
gt, pred = generate_synthetic(SynthConfig(seed=1, n_frames=60, noise=noise))

rep = evaluate(pred, gt)
print(rep.table())

# tighter thresholds are harder
strict = evaluate(pred, gt, EvalConfig(thresholds=(0.2, 0.3)))
print(round(strict.mAP, 4), "<=", round(rep.mAP, 4))
