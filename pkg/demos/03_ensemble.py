"""
Merging proposals from other models and earlier frames
======================================================

"""

from vecmap import EnsembleConfig, ensemble_merge, evaluate, multi_frame_ensemble, multi_model_ensemble
from vecmap.geom import Category, MapElement, MapFrame, Pose2
from vecmap.synth import NoiseModel, SynthConfig, generate_synthetic

LD = Category.LANE_DIVIDER
cfg = EnsembleConfig(cd_threshold=1.0, score_decay=0.9)

# a proposal near the base is suppressed, a distant one is kept with a decayed score
base = [MapElement(LD, [(-5, 0), (5, 0)], score=0.8)]
props = [MapElement(LD, [(-5, 0.1), (5, 0.1)], score=0.9),
         MapElement(LD, [(-5, 5), (5, 5)], score=0.8)]
added, scores = ensemble_merge(base, props, cfg)
print(len(added), scores)

# two models over the same frame
a = MapFrame("f", 0, elements=base)
b = MapFrame("f", 0, elements=props)
print(len(multi_model_ensemble([a, b], cfg).elements))

# the previous frame's prediction is moved into the current ego frame
prev = MapFrame("t0", 0, Pose2(0, 0, 0), [MapElement(LD, [(0, 10), (0, 20)], score=0.7)])
cur = MapFrame("t1", 100_000, Pose2(0, 2, 0), [])
print(multi_frame_ensemble(cur, [prev], cfg).elements[0].points)

# a model that forgets elements now and then, helped by its own history
noise = NoiseModel(point_jitter=0.05, dropout=0.3, tp_score_spread=0.3)
gt, pred = generate_synthetic(SynthConfig(seed=4, n_frames=40, noise=noise))
merged = [multi_frame_ensemble(pred[k], pred[max(0, k - 2):k][::-1], cfg) for k in range(len(pred))]
print(round(evaluate(pred, gt).mAP, 4), "->", round(evaluate(merged, gt).mAP, 4))
