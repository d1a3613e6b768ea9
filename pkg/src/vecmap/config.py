"""TOML/JSON configuration files.

Every section is optional; missing keys fall back to the library defaults.
Command-line flags override whatever a config file sets.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .compact import CategoryOverride, CompactionConfig
from .ensemble import EnsembleConfig
from .geom import Category, PerceptionWindow
from .metrics import EvalConfig
from .raster import GridSpec
from .serialize import SchemaError
from .synth import NoiseModel, SynthConfig

SECTIONS = ("compaction", "eval", "ensemble", "raster", "synth", "window")
TOP_LEVEL = ("seed", "threads", "forward_axis")


def load_config(path=None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    try:
        raw = p.read_bytes()
    except FileNotFoundError:
        raise SchemaError(f"{p}: no such config file") from None
    try:
        if p.suffix.lower() == ".toml":
            cfg = tomllib.loads(raw.decode("utf-8"))
        else:
            cfg = json.loads(raw)
    except (tomllib.TOMLDecodeError, json.JSONDecodeError) as err:
        raise SchemaError(f"{p}: {err}") from None
    if not isinstance(cfg, dict):
        raise SchemaError(f"{p}: top level must be a table")
    unknown = set(cfg) - set(SECTIONS) - set(TOP_LEVEL)
    if unknown:
        raise SchemaError(f"{p}: unknown config keys {sorted(unknown)}")
    if cfg.get("forward_axis", "y") not in ("x", "y"):
        raise SchemaError(f"{p}: forward_axis must be 'x' or 'y'")
    _check_raster(cfg.get("raster", {}))
    try:
        # fail early on any section, not just the one a subcommand reads
        for build in (compaction_from, eval_from, ensemble_from, grid_from, synth_from):
            build(cfg)
    except SchemaError as err:
        raise SchemaError(f"{p}: {err}") from None
    return cfg


RASTER_KEYS = ("rows", "cols", "thickness", "crossing_mode")


def _check_raster(sec: dict) -> None:
    unknown = set(sec) - set(RASTER_KEYS)
    if unknown:
        raise SchemaError(f"[raster]: unknown keys {sorted(unknown)}")
    if "thickness" in sec and not (isinstance(sec["thickness"], int) and sec["thickness"] >= 1):
        raise SchemaError("[raster].thickness: expected an integer >= 1")
    if sec.get("crossing_mode", "contour") not in ("contour", "skeleton"):
        raise SchemaError("[raster].crossing_mode: expected 'contour' or 'skeleton'")


def _build(cls, section: dict, name: str, **extra):
    try:
        return cls(**{**section, **extra})
    except TypeError as err:
        raise SchemaError(f"[{name}]: {err}") from None
    except ValueError as err:
        raise SchemaError(f"[{name}]: {err}") from None


def window_from(cfg: dict) -> PerceptionWindow:
    return _build(PerceptionWindow, cfg.get("window", {}), "window")


def compaction_from(cfg: dict) -> CompactionConfig:
    sec = dict(cfg.get("compaction", {}))
    overrides = {}
    for name, rule in sec.pop("overrides", {}).items():
        try:
            overrides[Category(name)] = CategoryOverride(rule["method"], float(rule["tolerance"]))
        except (KeyError, ValueError, TypeError) as err:
            raise SchemaError(f"[compaction.overrides.{name}]: {err}") from None
    return _build(CompactionConfig, sec, "compaction", per_category_overrides=overrides)


def eval_from(cfg: dict) -> EvalConfig:
    return _build(EvalConfig, cfg.get("eval", {}), "eval")


def ensemble_from(cfg: dict) -> EnsembleConfig:
    sec = dict(cfg.get("ensemble", {}))
    try:
        per = {Category(k): float(v) for k, v in sec.pop("per_category_threshold", {}).items()}
    except ValueError as err:
        raise SchemaError(f"[ensemble.per_category_threshold]: {err}") from None
    return _build(EnsembleConfig, sec, "ensemble", per_category_threshold=per)


def grid_from(cfg: dict) -> GridSpec:
    sec = {k: v for k, v in cfg.get("raster", {}).items() if k in ("rows", "cols")}
    return _build(GridSpec, sec, "raster", window=window_from(cfg))


def synth_from(cfg: dict) -> SynthConfig:
    sec = dict(cfg.get("synth", {}))
    noise = _build(NoiseModel, sec.pop("noise", {}), "synth.noise")
    if "seed" in cfg and "seed" not in sec:
        sec["seed"] = cfg["seed"]
    return _build(SynthConfig, sec, "synth", window=window_from(cfg), noise=noise)
