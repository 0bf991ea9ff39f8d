"""Command-line interface.

Subcommands:
  synth             generate a labeled synthetic suite to disk
  run               process one cloud file into labels, lines and a report
  batch             process a directory of clouds or a generated suite
  eval              score a predicted label file against a truth file
  compare-channels  run both channels on the same frames, side by side

Exit codes: 0 success, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import cloud_io
from .config import PipelineConfig, default_config, load_config
from .errors import (ConfigError, CorruptionError, DegenerateInputError,
                     LidarMarksError, PipelineStageError, SchemaError,
                     StructuralError)
from .lines import write_lines
from .metrics import evaluate, format_report_table, report_rows_to_json
from .pipeline import compare_channels, run_batch, run_frame
from .synth import PROFILES, scene_suite


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(1)


def _build_parser() -> _Parser:
    p = _Parser(prog="lidarmarks", description=__doc__,
                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, channel=True):
        sp.add_argument("--config", help="pipeline config file (INI sections per stage)")
        if channel:
            sp.add_argument("--channel", choices=["reflectivity", "intensity"])
        sp.add_argument("--seed", type=int, help="override stage RNG seeds")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", type=int, help="parallel frame workers")

    sp = sub.add_parser("synth", help="generate labeled synthetic frames")
    sp.add_argument("--profile", choices=sorted(PROFILES), default="test_track")
    sp.add_argument("--frames", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.add_argument("--layout", choices=["binary", "text"], default="binary")

    sp = sub.add_parser("run", help="run the pipeline on one cloud file")
    sp.add_argument("cloud")
    sp.add_argument("--truth", help="ground-truth label sidecar for scoring")
    common(sp)

    sp = sub.add_parser("batch", help="run the pipeline over many frames")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--dir", help="directory of .cloud files with .labels sidecars")
    src.add_argument("--profile", choices=sorted(PROFILES))
    sp.add_argument("--frames", type=int, default=10)
    common(sp)

    sp = sub.add_parser("eval", help="score predicted labels against truth")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--truth", required=True)

    sp = sub.add_parser("compare-channels", help="reflectivity vs intensity")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--dir", help="directory of .cloud files with .labels sidecars")
    src.add_argument("--profile", choices=sorted(PROFILES))
    sp.add_argument("--frames", type=int, default=10)
    common(sp, channel=False)
    return p


def _load_pipeline_config(args) -> PipelineConfig:
    config = load_config(args.config) if getattr(args, "config", None) else default_config()
    if getattr(args, "channel", None):
        config = config.with_channel(args.channel)
    if getattr(args, "seed", None) is not None and args.command != "synth":
        config = config.with_seed(args.seed)
    if getattr(args, "workers", None):
        import dataclasses
        config = dataclasses.replace(config, workers=args.workers)
    return config


def _dir_items(directory):
    pairs = cloud_io.cloud_stem_paths(directory)
    if not pairs:
        raise StructuralError(f"no .cloud files in {directory}")
    for cloud_path, label_path in pairs:
        cloud = cloud_io.read_cloud(cloud_path)
        truth = None
        if label_path:
            truth = cloud_io.read_labels(label_path, expected_count=len(cloud))
        name = os.path.splitext(os.path.basename(cloud_path))[0]
        yield name, cloud, truth


def _suite_items(profile, frames, seed):
    for cloud, truth in scene_suite(profile, frames, seed):
        yield cloud.frame_id, cloud, truth.labels


def _cmd_synth(args) -> int:
    os.makedirs(args.out, exist_ok=True)
    count = 0
    for cloud, truth in scene_suite(args.profile, args.frames, args.seed):
        stem = os.path.join(args.out, cloud.frame_id)
        cloud_io.write_cloud(cloud, stem + ".cloud", layout=args.layout)
        cloud_io.write_labels(truth.labels, stem + ".labels")
        count += 1
    print(f"wrote {count} frames to {args.out}")
    return 0


def _cmd_run(args) -> int:
    config = _load_pipeline_config(args)
    cloud = cloud_io.read_cloud(args.cloud)
    result = run_frame(cloud, config)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.cloud))
    os.makedirs(out_dir, exist_ok=True)
    stem = os.path.join(out_dir, os.path.splitext(os.path.basename(args.cloud))[0])
    cloud_io.write_labels(result.predicted_labels, stem + ".pred_labels")
    write_lines(result.lines, stem + ".lines")
    n_marking = int(np.sum(result.predicted_labels == "marking"))
    accepted = sum(1 for ln in result.lines if ln.accepted)
    print(f"frame {cloud.frame_id or args.cloud}: {accepted} accepted lines, "
          f"{n_marking} marking points")
    for stage, ms in result.timings_ms.items():
        print(f"  {stage}: {ms:.1f} ms")
    if args.truth:
        truth = cloud_io.read_labels(args.truth, expected_count=len(cloud))
        report = evaluate(result.predicted_labels, truth, channel=config.channel)
        rows = [(os.path.basename(args.cloud), config.channel, report)]
        print(format_report_table(rows), end="")
    return 0


def _items_for(args):
    if args.dir:
        return lambda: _dir_items(args.dir)
    base_seed = args.seed if getattr(args, "seed", None) is not None else 0
    return lambda: _suite_items(args.profile, args.frames, base_seed)


def _write_reports(out_dir, rows):
    if not out_dir:
        return
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "report.tsv"), "w", encoding="ascii") as fh:
        fh.write(format_report_table(rows))
    with open(os.path.join(out_dir, "report.json"), "w", encoding="ascii") as fh:
        fh.write(report_rows_to_json(rows))


def _cmd_batch(args) -> int:
    config = _load_pipeline_config(args)
    dataset = args.dir or args.profile
    result = run_batch(_items_for(args)(), config)
    print(f"{result.n_frames} frames, {len(result.failures)} failures")
    for frame_id, err in result.failures:
        print(f"  FAILED {frame_id}: {err}")
    rows = []
    if result.aggregate_report is not None:
        rows = [(dataset, config.channel, result.aggregate_report)]
        print(format_report_table(rows), end="")
    _write_reports(args.out, rows)
    return 0


def _cmd_eval(args) -> int:
    pred = cloud_io.read_labels(args.pred)
    truth = cloud_io.read_labels(args.truth, expected_count=pred.size)
    report = evaluate(pred, truth)
    print(format_report_table([("files", "-", report)]), end="")
    return 0


def _cmd_compare(args) -> int:
    config = _load_pipeline_config(args)
    dataset = args.dir or args.profile
    comparison = compare_channels(_items_for(args), config)
    rows = comparison.table_rows(dataset)
    print(format_report_table(rows), end="")
    _write_reports(args.out, rows)
    return 0


_COMMANDS = {
    "synth": _cmd_synth,
    "run": _cmd_run,
    "batch": _cmd_batch,
    "eval": _cmd_eval,
    "compare-channels": _cmd_compare,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        sys.stderr.write(f"config error: {e}\n")
        return 1
    except FileNotFoundError as e:
        sys.stderr.write(f"data error: {e}\n")
        return 2
    except (SchemaError, CorruptionError, StructuralError,
            DegenerateInputError, PipelineStageError) as e:
        sys.stderr.write(f"data error: {e}\n")
        return 2
    except LidarMarksError as e:
        sys.stderr.write(f"error: {e}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
