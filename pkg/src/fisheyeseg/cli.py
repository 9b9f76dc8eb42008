"""Command-line front end: ``simulate``, ``segment`` and ``evaluate``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .camera import load_calibration
from .constraints import Thresholds
from .errors import CoverageError, DomainError, FisheyeSegError
from .evaluation import (DEFAULT_BIN_SIZE, DEFAULT_RANGE_GATE, aggregate, range_map, score_frame,
                         write_range_map, write_scores)
from .flow import DEFAULT_CELL_SIZE, average_flow, read_flow, write_grid
from .fusion import (DEFAULT_THRESHOLD, FusionWeights, read_pgm, render_heatmap, render_mask,
                     write_pgm)
from .odometry import (DEFAULT_MOTION_FLOOR, camera_motion, dead_reckon, load_mounting,
                       read_odometry_log)
from .pipeline import process_pair
from .simulator import CLASS_TAGS, load_scene, preset, read_frames, read_ground_truth, simulate, write_dataset

log = logging.getLogger("fisheyeseg")


class UsageError(FisheyeSegError):
    """Invalid command-line or configuration values (exit code 2)."""


@dataclass
class PipelineConfig:
    """Inputs and tunables of a ``segment`` run.

    ``frames`` is a frame list (``index t_prev t_cur flow-file`` per line);
    flow paths in it are relative to its directory.
    """

    calibration: str
    mounting: str
    frames: str
    odometry: str
    output: str = "segment-out"
    weights: FusionWeights = field(default_factory=FusionWeights)
    threshold: float = DEFAULT_THRESHOLD
    thresholds: Thresholds = field(default_factory=Thresholds)
    motion_floor: float = DEFAULT_MOTION_FLOOR
    cell_size: int = DEFAULT_CELL_SIZE

    @classmethod
    def for_dataset(cls, directory: str, **kw) -> "PipelineConfig":
        """Config for a directory written by ``simulate``."""
        j = lambda name: os.path.join(directory, name)  # noqa: E731
        return cls(j("calibration.ini"), j("mounting.ini"), j("frames.txt"), j("odometry.txt"), **kw)

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        """Read the ``[pipeline]`` section of an INI file; relative paths resolve against it."""
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not parser.read(path):
            raise UsageError(f"cannot read config {path}")
        if not parser.has_section("pipeline"):
            raise UsageError(f"{path}: missing [pipeline] section")
        sec = parser["pipeline"]
        base = os.path.dirname(os.path.abspath(path))

        def p(key, default=None):
            if key not in sec:
                if default is None:
                    raise UsageError(f"{path}: missing '{key}'")
                return default
            return os.path.normpath(os.path.join(base, sec[key]))

        try:
            return cls(
                calibration=p("calibration"), mounting=p("mounting"), frames=p("frames"),
                odometry=p("odometry"), output=p("output", os.path.join(base, "segment-out")),
                weights=FusionWeights.parse(sec.get("weights", str(FusionWeights()))),
                threshold=sec.getfloat("threshold", DEFAULT_THRESHOLD),
                thresholds=Thresholds(
                    sec.getfloat("lambda_h", Thresholds.lambda_h),
                    sec.getfloat("lambda_p", Thresholds.lambda_p),
                    sec.getfloat("lambda_s", Thresholds.lambda_s),
                ),
                motion_floor=sec.getfloat("motion_floor", DEFAULT_MOTION_FLOOR),
                cell_size=sec.getint("cell_size", DEFAULT_CELL_SIZE),
            )
        except ValueError as exc:
            raise UsageError(f"{path}: {exc}") from exc

    def validate(self) -> None:
        for name in ("calibration", "mounting", "frames", "odometry"):
            if not os.path.isfile(getattr(self, name)):
                raise UsageError(f"{name} file not found: {getattr(self, name)}")
        if not 0.0 <= self.threshold <= 1.0:
            raise UsageError("threshold must lie in [0, 1]")
        th = self.thresholds
        if min(th.lambda_h, th.lambda_p, th.lambda_s, self.motion_floor) < 0.0:
            raise UsageError("lambda values and motion floor must be non-negative")
        if self.cell_size < 1:
            raise UsageError("cell size must be >= 1")

    def as_dict(self) -> dict:
        d = asdict(self)
        d["weights"] = str(self.weights)
        return d

    def digest(self) -> str:
        """SHA-256 of the tunables (paths excluded, so a moved dataset hashes the same)."""
        d = {k: v for k, v in self.as_dict().items()
             if k not in ("calibration", "mounting", "frames", "odometry", "output")}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    spec = load_scene(args.scene) if args.scene else preset(args.preset)
    over = {}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.noise is not None:
        over["noise"] = args.noise
    if args.frames is not None:
        over["n_frames"] = args.frames
    spec = replace(spec, **over)
    sim = simulate(spec)
    write_dataset(sim, args.out)
    log.info("wrote %d frame pairs to %s", len(sim.pairs), args.out)
    return 0


def _segment_one(cfg: PipelineConfig, calib, mounting, samples, base, entry):
    index, t_prev, t_cur, name = entry
    path = os.path.join(base, name)
    try:
        flow = read_flow(path)
    except FileNotFoundError:
        return index, None, f"missing flow file {name}"
    try:
        delta = dead_reckon(samples, t_prev, t_cur)
    except CoverageError as exc:
        return index, None, f"odometry: {exc}"
    geom = camera_motion(delta, calib, mounting, cfg.motion_floor)
    grid = average_flow(flow, cfg.cell_size, calib.image_size)
    res = process_pair(grid, calib, geom, cfg.weights, cfg.thresholds, cfg.threshold)
    out = cfg.output
    write_pgm(os.path.join(out, f"heatmap_{index:05d}.pgm"),
              render_heatmap(res.likelihood, cfg.cell_size, calib.image_size))
    write_pgm(os.path.join(out, f"mask_{index:05d}.pgm"),
              render_mask(res.mask, cfg.cell_size, calib.image_size))
    write_grid(os.path.join(out, f"likelihood_{index:05d}.smlg"), res.likelihood)
    return index, {
        "index": index,
        "degenerate": bool(res.degenerate),
        "cells": int(np.count_nonzero(grid.valid)),
        "invalid_cells": int(np.count_nonzero(~grid.valid)),
        "dropped_fov": res.dropped,
        "moving_cells": int(np.count_nonzero(res.mask.moving)),
    }, None


def run_segment(cfg: PipelineConfig, jobs: int = 1) -> dict:
    """Segment every frame pair listed in ``cfg.frames``; returns the manifest."""
    cfg.validate()
    calib = load_calibration(cfg.calibration)
    mounting = load_mounting(cfg.mounting)
    samples = read_odometry_log(cfg.odometry)
    entries = read_frames(cfg.frames)
    if cfg.weights.three_view > 0.0:
        log.warning("three-view weight ignored: dense two-frame flow provides no triple correspondences")
    os.makedirs(cfg.output, exist_ok=True)
    base = os.path.dirname(os.path.abspath(cfg.frames))

    def work(entry):
        return _segment_one(cfg, calib, mounting, samples, base, entry)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(work, entries))
    else:
        results = [work(e) for e in entries]

    frames, skipped = [], []
    for index, info, reason in sorted(results, key=lambda r: r[0]):
        if info is None:
            log.warning("frame %d skipped: %s", index, reason)
            skipped.append({"index": index, "reason": reason})
        else:
            frames.append(info)
    manifest = {
        "config": cfg.as_dict(),
        "config_sha256": cfg.digest(),
        "frames": frames,
        "skipped": skipped,
        "totals": {
            "processed": len(frames),
            "skipped": len(skipped),
            "invalid_cells": sum(f["invalid_cells"] for f in frames),
            "dropped_fov": sum(f["dropped_fov"] for f in frames),
        },
    }
    manifest["config"] = {k: (os.path.relpath(v, cfg.output) if k in
                              ("calibration", "mounting", "frames", "odometry") else v)
                          for k, v in manifest["config"].items() if k != "output"}
    with open(os.path.join(cfg.output, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def cmd_segment(args) -> int:
    if args.config:
        cfg = PipelineConfig.from_file(args.config)
    elif args.data:
        cfg = PipelineConfig.for_dataset(args.data)
    else:
        raise UsageError("segment needs --config or --data")
    if args.out:
        cfg.output = args.out
    if args.threshold is not None:
        cfg.threshold = args.threshold
    if args.weights is not None:
        cfg.weights = _parse_weights(args.weights)
    if args.cell_size is not None:
        cfg.cell_size = args.cell_size
    th = cfg.thresholds
    cfg.thresholds = Thresholds(
        th.lambda_h if args.lambda_h is None else args.lambda_h,
        th.lambda_p if args.lambda_p is None else args.lambda_p,
        th.lambda_s if args.lambda_s is None else args.lambda_s,
    )
    if args.motion_floor is not None:
        cfg.motion_floor = args.motion_floor
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    manifest = run_segment(cfg, args.jobs)
    t = manifest["totals"]
    print(f"processed {t['processed']} frame pairs, skipped {t['skipped']}, "
          f"dropped {t['dropped_fov']} cells at the fov rim")
    return 0


def run_evaluate(masks_dir: str, truth_dir: str, range_gate: float = DEFAULT_RANGE_GATE,
                 bin_size: float = DEFAULT_BIN_SIZE):
    """Score ``mask_NNNNN.pgm`` files against a simulator ground-truth directory."""
    truth = read_ground_truth(truth_dir)
    frames = [idx for idx, *_ in read_frames(os.path.join(truth_dir, "frames.txt"))]
    scored = []
    for idx in frames:
        path = os.path.join(masks_dir, f"mask_{idx:05d}.pgm")
        if not os.path.isfile(path):
            continue
        mask = read_pgm(path) > 0
        scored.append(score_frame(mask, truth.get(idx, []), idx, range_gate))
    if not scored:
        raise FisheyeSegError("no frames shared between masks and ground truth")
    objects = [s for f in scored for s in f.objects]
    return scored, aggregate(objects), range_map(objects, bin_size, range_gate)


def cmd_evaluate(args) -> int:
    scored, summary, rmap = run_evaluate(args.masks, args.truth, args.range_gate, args.bin_size)
    fp = float(np.mean([f.fp_ratio for f in scored]))
    print(f"{'class':<12} {'samples':>7} {'det.rate':>8} {'TPR':>6} {'IoU':>6}")
    for c in summary.values():
        print(f"{c.tag:<12} {c.samples:>7d} {c.detection_rate:>8.3f} {c.mean_tpr:>6.3f} {c.mean_iou:>6.3f}")
    print(f"frames {len(scored)}  mean FP coverage {fp:.4f}")
    if args.report:
        write_scores(args.report, scored, summary)
    if args.range_map:
        write_range_map(args.range_map, rmap)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _parse_weights(text: str) -> FusionWeights:
    try:
        return FusionWeights.parse(text)
    except (DomainError, ValueError) as exc:
        raise UsageError(f"--weights: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fisheyeseg", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="generate a synthetic dataset")
    src = sim.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset", choices=CLASS_TAGS)
    src.add_argument("--scene", help="scene description (JSON)")
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--noise", type=float, help="flow noise std in pixels")
    sim.add_argument("--frames", type=int, help="number of frames")
    sim.set_defaults(func=cmd_simulate)

    seg = sub.add_parser("segment", help="segment moving objects in a dataset")
    seg.add_argument("--config", help="INI file with a [pipeline] section")
    seg.add_argument("--data", help="dataset directory written by 'simulate'")
    seg.add_argument("--out")
    seg.add_argument("--threshold", type=float)
    seg.add_argument("--weights", help="e,d,h,p,3v")
    seg.add_argument("--lambda-h", type=float)
    seg.add_argument("--lambda-p", type=float)
    seg.add_argument("--lambda-s", type=float)
    seg.add_argument("--motion-floor", type=float)
    seg.add_argument("--cell-size", type=int)
    seg.add_argument("--jobs", type=int, default=1)
    seg.set_defaults(func=cmd_segment)

    ev = sub.add_parser("evaluate", help="score masks against ground truth")
    ev.add_argument("--masks", required=True)
    ev.add_argument("--truth", required=True, help="dataset directory with ground truth")
    ev.add_argument("--range-gate", type=float, default=DEFAULT_RANGE_GATE)
    ev.add_argument("--bin-size", type=float, default=DEFAULT_BIN_SIZE)
    ev.add_argument("--report", help="write line-delimited JSON scores here")
    ev.add_argument("--range-map", help="write the range map grid (SMLG) here")
    ev.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.error(str(exc))  # exits with 2
    except (FisheyeSegError, OSError, ValueError) as exc:
        print(f"fisheyeseg: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
