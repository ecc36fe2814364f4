"""Command-line surface: synth, align, build, eval, inspect.

Exit codes:
  0  success
  2  configuration error
  3  I/O error
  4  clock fit failed (no stable trigger match / too few pulses)
  5  missing predictions
  6  container checksum mismatch
  build stages map to distinct codes: 10 ingest, 11 clock, 12 windowing,
  13 rasterize, 14 rgb, 15 actions, 16 container.
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import container, evaluation, ingest, pipeline, synth
from .errors import (
    ChecksumMismatch,
    ConfigInvalid,
    EvpipeError,
    InsufficientPulses,
    MissingPredictions,
    NoStableMatch,
)

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_CLOCK = 4
EXIT_PREDICTIONS = 5
EXIT_CHECKSUM = 6

STAGE_CODES = {
    "ingest": 10,
    "clock": 11,
    "windowing": 12,
    "rasterize": 13,
    "rgb": 14,
    "actions": 15,
    "container": 16,
}


def _emit(args, result, lines):
    if args.json:
        print(json.dumps(result, sort_keys=True))
    else:
        for line in lines:
            print(line)


def cmd_synth(args):
    cfg = synth.SceneConfig.from_json_file(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    _, _, summary = synth.generate_episode(cfg, out_dir=args.out)
    _emit(
        args,
        {"command": "synth", "out": args.out, **summary},
        [
            f"wrote episode to {args.out}",
            f"frames: {summary['frames']}  cd events: {summary['cd_events']}  "
            f"triggers: {summary['trigger_events']}",
        ],
    )
    return 0


def cmd_align(args):
    model = pipeline.align_episode(args.episode, edge=args.edge)
    _emit(
        args,
        {"command": "align", **model.to_json_dict()},
        [
            f"alpha={model.alpha:.9f} beta_us={model.beta_us:.1f}",
            f"residual_rms_us={model.residual_rms_us:.2f} "
            f"matched_pulses={model.matched_pulses} rejected={model.rejected_pulses}",
        ],
    )
    return 0


def _build_one(settings):
    return pipeline.build_episode(settings)


def cmd_build(args):
    if args.batch:
        root = Path(args.batch)
        episode_dirs = sorted(
            p.parent for p in root.glob("*/" + ingest.META_FILE)
        )
        if len(episode_dirs) < 3:
            raise ConfigInvalid(f"batch root {root} holds {len(episode_dirs)} episodes; need >= 3")
        splits = container.assign_splits(len(episode_dirs), seed=args.seed or 0)
        jobs = []
        for ep_dir, split in zip(episode_dirs, splits):
            st = pipeline.BuildSettings(
                episode_dir=str(ep_dir),
                downsample_factor=args.factor,
                rgb_included=args.rgb,
                split=split,
            )
            jobs.append(st)
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                summaries = list(pool.map(_build_one, jobs))
        else:
            summaries = [_build_one(st) for st in jobs]
        total = sum(s["samples"] for s in summaries)
        _emit(
            args,
            {"command": "build", "episodes": len(summaries), "samples": total,
             "results": summaries},
            [f"built {len(summaries)} episodes, {total} samples"],
        )
        return 0

    settings = pipeline.BuildSettings.from_json_file(args.config)
    summary = pipeline.build_episode(settings)
    _emit(
        args,
        {"command": "build", **summary},
        [
            f"wrote {summary['samples']} samples to {summary['out_dir']}",
            f"held labels: {summary['held_labels']}  "
            f"events dropped: {summary['events_dropped']}",
        ],
    )
    return 0


def _truth_entries(container_dirs):
    for cdir in container_dirs:
        manifest, records = container.read_dataset(cdir)
        info = {
            "lighting": manifest.episode.get("lighting"),
            "path": manifest.episode.get("path"),
            "split": manifest.split,
        }
        for rec in records:
            yield info, rec.frame_index, (rec.action.v, rec.action.w)


def cmd_eval(args):
    predictions = evaluation.load_predictions_csv(args.predictions)
    group_by = tuple(k.strip() for k in args.group_by.split(",")) if args.group_by else ()
    if not group_by:
        group_by = ("lighting",)
    reports = evaluation.evaluate_policy(
        predictions, _truth_entries(args.container), group_by=group_by
    )
    rows = evaluation.write_report(
        reports, json_path=args.report_json, csv_path=args.report_csv
    )
    lines = []
    for row in rows:
        key = " ".join(f"{k}={row[k]}" for k in group_by)
        lines.append(
            f"{key}: linear={row['linear_mae']} angular={row['angular_mae']} "
            f"total={row['total_mae']} n={row['n']}"
        )
    _emit(args, {"command": "eval", "rows": rows}, lines)
    return 0


def cmd_inspect(args):
    split_counts = {}
    lines = []
    result = {"command": "inspect", "containers": []}
    for cdir in args.container:
        manifest, records = container.read_dataset(cdir)
        totals = []
        for rec in records:
            totals.append(rec.histogram.total())
        totals = np.asarray(totals, np.float64) if totals else np.zeros(0)
        split_counts[manifest.split] = split_counts.get(manifest.split, 0) + manifest.sample_count
        stats = {
            "dir": str(cdir),
            "samples": manifest.sample_count,
            "split": manifest.split,
            "rgb_included": manifest.rgb_included,
            "dims": f"{manifest.width}x{manifest.height}",
            "episode": manifest.episode,
            "count_min": float(totals.min()) if totals.size else 0.0,
            "count_mean": float(totals.mean()) if totals.size else 0.0,
            "count_max": float(totals.max()) if totals.size else 0.0,
            "crc": "OK",
        }
        result["containers"].append(stats)
        lines.append(
            f"{cdir}: {stats['samples']} samples split={stats['split']} "
            f"dims={stats['dims']} rgb={stats['rgb_included']} "
            f"counts(min/mean/max)={stats['count_min']:.0f}/"
            f"{stats['count_mean']:.1f}/{stats['count_max']:.0f} CRC OK"
        )
    result["split_counts"] = split_counts
    lines.append("per-split samples: " + ", ".join(f"{k}={v}" for k, v in sorted(split_counts.items())))
    _emit(args, result, lines)
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="evpipe",
        description="Event/RGB/odometry synchronization pipeline",
    )
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic episode")
    p.add_argument("--config", required=True, help="SceneConfig JSON path")
    p.add_argument("--out", required=True, help="output episode directory")
    p.add_argument("--seed", type=int, default=None, help="override config seed")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("align", help="fit the event/RGB clock model")
    p.add_argument("--episode", required=True, help="episode directory")
    p.add_argument("--edge", default="RISING", choices=["RISING", "FALLING"])
    p.set_defaults(fn=cmd_align)

    p = sub.add_parser("build", help="build the synchronized dataset container")
    p.add_argument("--config", help="BuildSettings JSON path")
    p.add_argument("--batch", help="root directory of episode subdirectories")
    p.add_argument("--jobs", type=int, default=1, help="parallel episodes in batch mode")
    p.add_argument("--seed", type=int, default=0, help="split-assignment seed in batch mode")
    p.add_argument("--factor", type=int, default=4, help="downsample factor in batch mode")
    p.add_argument("--rgb", action="store_true", help="include rgb in batch mode")
    p.set_defaults(fn=cmd_build)

    p = sub.add_parser("eval", help="grouped MAE report for a predictions CSV")
    p.add_argument("--predictions", required=True)
    p.add_argument("--container", required=True, nargs="+")
    p.add_argument("--group-by", default="lighting", help="comma list of lighting,path,split")
    p.add_argument("--report-json", default=None)
    p.add_argument("--report-csv", default=None)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("inspect", help="verify and summarize containers")
    p.add_argument("--container", required=True, nargs="+")
    p.set_defaults(fn=cmd_inspect)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "build" and not args.batch and not args.config:
        parser.error("build requires --config or --batch")
    try:
        return args.fn(args)
    except pipeline.StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return STAGE_CODES.get(exc.stage, 1)
    except (NoStableMatch, InsufficientPulses) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CLOCK
    except MissingPredictions as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PREDICTIONS
    except ChecksumMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CHECKSUM
    except ConfigInvalid as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EvpipeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
