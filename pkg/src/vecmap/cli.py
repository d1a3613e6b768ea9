"""Command-line entry point: ``vecmap <subcommand> ...``.

Exit codes: 0 success, 1 invalid input (bad flags, files, schemas or
config values), 2 internal error. Logs go to standard error; data only to
the files named on the command line.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import config as config_mod
from .compact import Method, compact_frame, point_statistics, verify_compaction
from .ensemble import multi_model_ensemble, sequence_multi_frame
from .geom import CATEGORIES, Category
from .metrics import evaluate
from .raster import GridSpec, mask_to_elements, rasterize_many, write_pgm
from .serialize import SchemaError, read_sequence, write_report, write_sequence
from .synth import generate_synthetic

log = logging.getLogger("vecmap")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _pick(flag, section: dict, key: str, default):
    """Flag beats config file beats built-in default."""
    if flag is not None:
        return flag
    return section.get(key, default)


def _pmap(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def _threads(args, cfg) -> int:
    return int(_pick(args.threads, cfg, "threads", 1))


def _axis(cfg) -> str:
    return cfg.get("forward_axis", "y")


def cmd_compact(args, cfg) -> int:
    ccfg = config_mod.compaction_from(cfg)
    if args.method is not None:
        ccfg = replace(ccfg, method=Method(args.method))
    if args.epsilon is not None:
        ccfg = replace(ccfg, dp_epsilon=args.epsilon)
    if args.area is not None:
        ccfg = replace(ccfg, vis_area_threshold=args.area)
    frames, window = read_sequence(args.inp, _axis(cfg))
    threads = _threads(args, cfg)
    compacted = _pmap(lambda f: compact_frame(f, ccfg), frames, threads)
    write_sequence(compacted, args.out, window, _axis(cfg))
    log.info("compacted %d frames -> %s", len(frames), args.out)
    if args.report:
        samples = int(cfg.get("eval", {}).get("chamfer_samples", 100))
        rep = verify_compaction(frames, compacted, args.thresholds, samples, threads=threads)
        write_report(rep.to_dict(), args.report)
    return 0


def stats_report(raw, compacted=None) -> dict:
    stats = point_statistics(raw, compacted if compacted is not None else raw)
    out = {}
    for c in CATEGORIES:
        s = stats[c]
        images = sum(1 for f in raw if f.by_category(c))
        row = {
            "images": images,
            "instance_count": s.instance_count,
            "raw_point_count": s.raw_point_count,
        }
        if compacted is not None:
            row["compacted_point_count"] = s.compacted_point_count
            row["reduction_percent"] = s.reduction_percent
        out[c.value] = row
    return {"kind": "stats", "frames": len(raw), "categories": out}


def cmd_stats(args, cfg) -> int:
    raw, _ = read_sequence(args.raw, _axis(cfg))
    comp = None
    if args.compacted:
        comp, _ = read_sequence(args.compacted, _axis(cfg))
        by_id = {f.frame_id: f for f in comp}
        if set(by_id) != {f.frame_id for f in raw}:
            raise SchemaError("raw and compacted files hold different frame ids")
        comp = [by_id[f.frame_id] for f in raw]
    rep = stats_report(raw, comp)
    header = f"{'category':<14} {'# images':>9} {'# instances':>12} {'# points (raw)':>15}"
    if comp is not None:
        header += f" {'# points (compacted)':>21} {'reduction':>10}"
    lines = [header]
    for name, row in rep["categories"].items():
        line = f"{name:<14} {row['images']:>9} {row['instance_count']:>12} {row['raw_point_count']:>15}"
        if comp is not None:
            line += f" {row['compacted_point_count']:>21} {row['reduction_percent']:>9.1f}%"
        lines.append(line)
    print("\n".join(lines))
    if args.report:
        write_report(rep, args.report)
    return 0


def _fill_scores(frames, score):
    if score is None:
        return frames
    return [
        f.with_elements(e if e.score is not None else e.with_score(score) for e in f.elements)
        for f in frames
    ]


def cmd_eval(args, cfg) -> int:
    ecfg = config_mod.eval_from(cfg)
    if args.thresholds is not None:
        ecfg = replace(ecfg, thresholds=tuple(args.thresholds))
    if args.samples is not None:
        ecfg = replace(ecfg, chamfer_samples=args.samples)
    preds, _ = read_sequence(args.pred, _axis(cfg))
    gts, _ = read_sequence(args.gt, _axis(cfg))
    preds = _fill_scores(preds, args.assume_score)
    rep = evaluate(preds, gts, ecfg, threads=_threads(args, cfg))
    print(rep.table())
    if args.report:
        write_report(rep.to_dict(), args.report)
    return 0


def cmd_ensemble(args, cfg) -> int:
    ecfg = config_mod.ensemble_from(cfg)
    if args.T is not None:
        ecfg = replace(ecfg, cd_threshold=args.T)
    if args.sigma is not None:
        ecfg = replace(ecfg, score_decay=args.sigma)
    if args.samples is not None:
        ecfg = replace(ecfg, chamfer_samples=args.samples)
    threads = _threads(args, cfg)
    axis = _axis(cfg)
    if args.sequence:
        if args.base or args.proposals:
            raise UsageError("use either --sequence or --base/--proposals")
        if args.history is not None:
            ecfg = replace(ecfg, max_history=args.history)
        frames, window = read_sequence(args.sequence, axis)
        merged = sequence_multi_frame(frames, ecfg, window)
        mode, sources = "multi_frame", frames
    else:
        if not args.base or not args.proposals:
            raise UsageError("multi-model mode needs --base and at least one --proposals file")
        frames, window = read_sequence(args.base, axis)
        others = []
        for p in args.proposals:
            fr, _ = read_sequence(p, axis)
            by_id = {f.frame_id: f for f in fr}
            if set(by_id) != {f.frame_id for f in frames}:
                raise SchemaError(f"{p}: frame ids differ from the base file")
            others.append(by_id)
        merged = _pmap(
            lambda f: multi_model_ensemble([f] + [o[f.frame_id] for o in others], ecfg),
            frames,
            threads,
        )
        mode, sources = "multi_model", frames
    write_sequence(merged, args.out, window, axis)
    if args.report:
        added = {c.value: 0 for c in CATEGORIES}
        for src, out in zip(sources, merged):
            for c in CATEGORIES:
                added[c.value] += len(out.by_category(c)) - len(src.by_category(c))
        write_report(
            {
                "kind": "ensemble",
                "mode": mode,
                "frames": len(merged),
                "cd_threshold": ecfg.cd_threshold,
                "score_decay": ecfg.score_decay,
                "added": added,
            },
            args.report,
        )
    return 0


def cmd_raster(args, cfg) -> int:
    rcfg = cfg.get("raster", {})
    thickness = int(_pick(args.thickness, rcfg, "thickness", 3))
    mode = _pick(args.crossing_mode, rcfg, "crossing_mode", "contour")
    frames, window = read_sequence(args.inp, _axis(cfg))
    grid = config_mod.grid_from(cfg)
    grid = GridSpec(grid.rows, grid.cols, window)
    if args.frame:
        wanted = set(args.frame)
        missing = wanted - {f.frame_id for f in frames}
        if missing:
            raise SchemaError(f"unknown frame ids: {sorted(missing)}")
        frames = [f for f in frames if f.frame_id in wanted]
    ccfg = config_mod.compaction_from(cfg)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    mask_cats = (Category.PED_CROSSING, Category.LANE_DIVIDER)
    entries, vectorized = [], []
    for f in frames:
        elements = [e for e in f.elements if e.category is Category.ROAD_BOUNDARY]
        for c in mask_cats:
            filled = c is Category.PED_CROSSING and mode == "contour"
            m = rasterize_many(f.by_category(c), grid, thickness, filled=filled)
            name = f"{f.frame_id}_{c.value}.pgm"
            write_pgm(m, out_dir / name)
            entries.append({"file": name, "frame_id": f.frame_id, "category": c.value, "set_cells": int(m.bits.sum())})
            elements.extend(mask_to_elements(m, c, args.score, ccfg, crossing_mode=mode))
        vectorized.append(f.with_elements(elements))
    if args.vectorize:
        write_sequence(vectorized, args.vectorize, window, _axis(cfg))
    if args.report:
        write_report(
            {"kind": "raster", "rows": grid.rows, "cols": grid.cols, "thickness": thickness, "masks": entries},
            args.report,
        )
    return 0


def cmd_synth(args, cfg) -> int:
    scfg = config_mod.synth_from(cfg)
    if args.seed is not None:
        scfg = replace(scfg, seed=args.seed)
    if args.frames is not None:
        scfg = replace(scfg, n_frames=args.frames)
    noise = scfg.noise
    for flag, key in (
        ("jitter", "point_jitter"),
        ("dropout", "dropout"),
        ("fp_rate", "fp_rate"),
        ("score_spread", "tp_score_spread"),
    ):
        val = getattr(args, flag)
        if val is not None:
            noise = replace(noise, **{key: val})
    scfg = replace(scfg, noise=noise)
    gt, preds = generate_synthetic(scfg)
    write_sequence(gt, args.out_gt, scfg.window, _axis(cfg))
    if args.out_pred:
        write_sequence(preds, args.out_pred, scfg.window, _axis(cfg))
    if args.report:
        write_report(
            {
                "kind": "synth",
                "seed": scfg.seed,
                "frames": len(gt),
                "gt_elements": sum(len(f.elements) for f in gt),
                "pred_elements": sum(len(f.elements) for f in preds),
            },
            args.report,
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML or JSON config file")
    common.add_argument("--seed", type=int, help="RNG seed (overrides config)")
    common.add_argument("--threads", type=int, help="worker threads (default 1)")
    common.add_argument("--report", help="write a JSON report here")
    common.add_argument("-v", "--verbose", action="store_true")

    p = _Parser(prog="vecmap", description="Vector HD-map compaction, evaluation and ensembling.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("compact", parents=[common], help="canonicalize and simplify a sequence")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--method", choices=[m.value for m in Method])
    s.add_argument("--epsilon", type=float, help="Douglas-Peucker tolerance in meters")
    s.add_argument("--area", type=float, help="Visvalingam area threshold in square meters")
    s.add_argument("--thresholds", type=float, nargs="+", default=[0.2, 0.3, 0.4, 0.5],
                   help="AP thresholds for the fidelity report")
    s.set_defaults(func=cmd_compact)

    s = sub.add_parser("stats", parents=[common], help="point and instance counts")
    s.add_argument("--raw", required=True)
    s.add_argument("--compacted")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("eval", parents=[common], help="chamfer AP of predictions against ground truth")
    s.add_argument("--pred", required=True)
    s.add_argument("--gt", required=True)
    s.add_argument("--thresholds", type=float, nargs="+")
    s.add_argument("--samples", type=int, help="chamfer resample count")
    s.add_argument("--assume-score", type=float, help="score for unscored predictions")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("ensemble", parents=[common], help="multi-model or multi-frame merge")
    s.add_argument("--base")
    s.add_argument("--proposals", nargs="+")
    s.add_argument("--sequence")
    s.add_argument("--history", type=int)
    s.add_argument("--out", required=True)
    s.add_argument("--T", type=float, help="chamfer threshold in meters")
    s.add_argument("--sigma", type=float, help="score decay for added proposals")
    s.add_argument("--samples", type=int)
    s.set_defaults(func=cmd_ensemble)

    s = sub.add_parser("raster", parents=[common], help="dump PGM masks and re-vectorize them")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--out-dir", required=True)
    s.add_argument("--frame", action="append", help="frame id to rasterize; repeatable, default all frames")
    s.add_argument("--thickness", type=int)
    s.add_argument("--crossing-mode", choices=["contour", "skeleton"])
    s.add_argument("--score", type=float, help="score given to vectorized elements")
    s.add_argument("--vectorize", help="write mask-derived elements to this sequence file")
    s.set_defaults(func=cmd_raster)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic corpus")
    s.add_argument("--out-gt", required=True)
    s.add_argument("--out-pred")
    s.add_argument("--frames", type=int)
    s.add_argument("--jitter", type=float)
    s.add_argument("--dropout", type=float)
    s.add_argument("--fp-rate", type=float)
    s.add_argument("--score-spread", type=float)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(f"vecmap: error: {err}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        cfg = config_mod.load_config(args.config)
        return args.func(args, cfg)
    except (UsageError, SchemaError, ValueError, FileNotFoundError) as err:
        print(f"vecmap: error: {err}", file=sys.stderr)
        return 1
    except Exception:
        log.exception("internal error")
        return 2


if __name__ == "__main__":
    sys.exit(main())
