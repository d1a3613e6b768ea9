"""Vector HD-map processing: compaction, chamfer AP evaluation, ensembling
and mask vectorization for bird's-eye-view map elements."""

from .compact import (
    CompactionConfig,
    CompactionReport,
    Method,
    canonicalize_direction,
    compact_frame,
    simplify_dp,
    simplify_visvalingam,
    verify_compaction,
)
from .ensemble import EnsembleConfig, ensemble_merge, multi_frame_ensemble, multi_model_ensemble
from .geom import (
    Category,
    MapElement,
    MapFrame,
    PerceptionWindow,
    Pose2,
    chamfer_distance,
    clip_to_window,
    polyline_length,
    resample_polyline,
    transform_points,
)
from .metrics import EvalConfig, EvalReport, average_precision, evaluate, match_instances
from .raster import BevMask, GridSpec, mask_to_elements, rasterize, thin, trace_skeleton
from .serialize import SchemaError, read_sequence, write_sequence
from .synth import NoiseModel, SynthConfig, generate_synthetic

__version__ = "0.1.0"

__all__ = [
    "BevMask",
    "Category",
    "CompactionConfig",
    "CompactionReport",
    "EnsembleConfig",
    "EvalConfig",
    "EvalReport",
    "GridSpec",
    "MapElement",
    "MapFrame",
    "Method",
    "NoiseModel",
    "PerceptionWindow",
    "Pose2",
    "SchemaError",
    "SynthConfig",
    "average_precision",
    "canonicalize_direction",
    "chamfer_distance",
    "clip_to_window",
    "compact_frame",
    "ensemble_merge",
    "evaluate",
    "generate_synthetic",
    "mask_to_elements",
    "match_instances",
    "multi_frame_ensemble",
    "multi_model_ensemble",
    "polyline_length",
    "rasterize",
    "read_sequence",
    "resample_polyline",
    "simplify_dp",
    "simplify_visvalingam",
    "thin",
    "trace_skeleton",
    "transform_points",
    "verify_compaction",
    "write_sequence",
]
