"""
Compacting evenly sampled map elements
======================================

"""

import numpy as np

from vecmap import CompactionConfig, Method, compact_frame, generate_synthetic, verify_compaction
from vecmap.synth import SynthConfig

# a short synthetic drive; ground truth is sampled every 0.2 m
gt, _ = generate_synthetic(SynthConfig(seed=0, n_frames=50))
frame = gt[10]
print(frame.frame_id, [len(e.points) for e in frame.elements])

# Douglas-Peucker keeps the points that bend the shape by more than 15 cm
small = compact_frame(frame, CompactionConfig(dp_epsilon=0.15))
print([len(e.points) for e in small.elements])

# Visvalingam drops the least important point first, by triangle area
vis = compact_frame(frame, CompactionConfig(method=Method.VISVALINGAM, vis_area_threshold=0.1))
print([len(e.points) for e in vis.elements])

# directions are canonical: open lines start at their front end
print(all(e.points[0][1] >= e.points[-1][1] for e in small.elements if not e.closed))

# the compacted corpus should score perfectly against the original
rep = verify_compaction(gt, [compact_frame(f) for f in gt])
for cat, s in rep.categories.items():
    print(f"{cat.value:14s} {s.reduction_percent:5.1f}%  AP@0.2 {s.ap_at[0.2]:.2f}")

# compaction is a fixed point
again = [compact_frame(compact_frame(f)) for f in gt]
print(all(a == compact_frame(f) for a, f in zip(again, gt)))
print(np.mean([len(e.points) for f in gt for e in compact_frame(f).elements]))
