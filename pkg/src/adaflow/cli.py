"""Command-line entry points.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import attention as attn
from .errors import ConfigError, DataError
from .keyframes import KeyframeSchedule, select_keyframes
from .partition import ClipPartition, PartitionParams, adaptive_partition, yt_diagnostic
from .pipeline import PipelineConfig, consistency_metrics, run_pipeline
from .propagation import precompute_correspondences
from .similarity import FeatureVolume, HeatmapCache
from .synth import SyntheticSpec, synth_video
from .tensor_store import tensor_read, tensor_write


def _load_features(path: str) -> FeatureVolume:
    values = tensor_read(path)
    if values.ndim != 4:
        raise DataError(f"{path}: features must be (n, h, w, d), got {values.shape}")
    return FeatureVolume(values)


def _load_json(path: str) -> dict:
    with open(path) as f:
        return json.load(f)


def _write_json(payload: dict, path: str) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)


def cmd_synth(args) -> int:
    spec = SyntheticSpec(scene_lengths=[int(x) for x in args.scenes.split(",")],
                         h=args.height, w=args.width, d=args.dim,
                         floor=args.floor, ceiling=args.ceiling,
                         motion=args.motion, seed=args.seed)
    volume, truth = synth_video(spec)
    tensor_write(volume.values, args.out)
    if args.truth:
        _write_json({"scene_starts": truth.scene_starts,
                     "scene_of": truth.scene_of.tolist(),
                     "permutations": truth.permutations.tolist()}, args.truth)
    print(f"wrote {volume.n} frames ({volume.h}x{volume.w}x{volume.d}) to {args.out}")
    return 0


def cmd_partition(args) -> int:
    features = _load_features(args.features)
    params = PartitionParams(window=args.window, step=args.step,
                             mean_threshold=args.ms, window_threshold=args.ws,
                             boundary=args.boundary)
    result = adaptive_partition(features, params)
    _write_json(result.to_dict(), args.out)
    print(f"{result.num_clips} clips over {result.n} frames -> {args.out}")
    return 0


def cmd_keyframes(args) -> int:
    partition = ClipPartition.from_dict(_load_json(args.partition))
    schedule = select_keyframes(partition, args.timesteps, args.seed,
                                fixed=args.fixed_keyframes)
    _write_json(schedule.to_dict(), args.out)
    print(f"{schedule.timesteps} timesteps x {schedule.num_clips} clips -> {args.out}")
    return 0


def cmd_slim(args) -> int:
    features = _load_features(args.features)
    schedule = KeyframeSchedule.from_dict(_load_json(args.keyframes))
    cache = HeatmapCache(features)
    hw = features.tokens_per_frame
    reports = []
    for t in range(schedule.timesteps):
        row = schedule.row(t)
        for q in range(len(row)):
            attn.select_kv_tokens(q, row, cache, args.budget_frames)
        report = attn.attention_cost(len(row), hw, args.budget_frames,
                                     d_head=args.d_head, heads=args.heads)
        reports.append({"t": t, "keyframes": len(row), **report.to_dict()})
    _write_json({"budget_frames": args.budget_frames, "timesteps": reports}, args.report)
    print(f"cost reports for {schedule.timesteps} timesteps -> {args.report}")
    return 0


def cmd_run(args) -> int:
    raw = _read_config(args.config)
    if args.oracle:
        raw["oracle"] = args.oracle
    if args.workers:
        raw["workers"] = args.workers
    config = PipelineConfig.from_mapping(raw)
    result = run_pipeline(config)
    ratio = result.consistency.kv_ratio
    print(f"edited {result.edited.shape[0]} frames, {result.partition.num_clips} clips, "
          f"kv ratio {ratio:.4f}, mean consistency {result.consistency.mean_similarity:.4f}")
    return 0


def cmd_metrics(args) -> int:
    edited = tensor_read(args.edited)
    features = _load_features(args.features)
    partition = ClipPartition.from_dict(_load_json(args.partition))
    schedule = KeyframeSchedule.from_dict(_load_json(args.schedule))
    correspondences = precompute_correspondences(features, partition, schedule)
    report = consistency_metrics(edited, correspondences, schedule)
    _write_json(report.to_dict(), args.out)
    print(f"mean consistency {report.mean_similarity:.4f} -> {args.out}")
    return 0


def cmd_yt(args) -> int:
    frames = tensor_read(args.frames)
    partition = ClipPartition.from_dict(_load_json(args.partition))
    stitched, boundaries = yt_diagnostic(frames, partition)
    tensor_write(stitched, args.out)
    _write_json({"boundaries": boundaries}, str(args.out) + ".json")
    print(f"y-t plot {stitched.shape} with boundaries {boundaries} -> {args.out}")
    return 0


def _read_config(path: str) -> dict:
    try:
        if str(path).endswith(".toml"):
            try:
                import tomllib
            except ModuleNotFoundError:
                import tomli as tomllib
            with open(path, "rb") as f:
                return tomllib.load(f)
        with open(path) as f:
            return json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except ValueError as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaflow",
                                     description="Adaptive partitioning, KV-slimmed extended "
                                                 "self-attention, and latent propagation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic multi-scene feature volume")
    p.add_argument("--scenes", required=True, help="comma-separated scene lengths, e.g. 10,10")
    p.add_argument("--height", type=int, default=4)
    p.add_argument("--width", type=int, default=4)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--floor", type=float, default=0.9)
    p.add_argument("--ceiling", type=float, default=0.2)
    p.add_argument("--motion", default="none")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--truth", default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("partition", help="split a feature volume into content clips")
    p.add_argument("--features", required=True)
    p.add_argument("--ms", type=float, default=0.75)
    p.add_argument("--ws", type=float, default=0.6)
    p.add_argument("--window", type=int, default=42)
    p.add_argument("--step", type=int, default=21)
    p.add_argument("--boundary", default="literal", choices=["literal", "strict"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("keyframes", help="sample one keyframe per clip per timestep")
    p.add_argument("--partition", required=True)
    p.add_argument("--timesteps", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fixed-keyframes", action="store_true",
                   help="always pick each clip's first frame")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_keyframes)

    p = sub.add_parser("slim", help="report KV slimming costs per timestep")
    p.add_argument("--features", required=True)
    p.add_argument("--keyframes", required=True, help="schedule JSON from 'adaflow keyframes'")
    p.add_argument("--budget-frames", type=int, default=attn.DEFAULT_BUDGET_FRAMES)
    p.add_argument("--d-head", type=int, default=64)
    p.add_argument("--heads", type=int, default=1)
    p.add_argument("--report", required=True)
    p.set_defaults(func=cmd_slim)

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True, help="TOML or JSON pipeline config")
    p.add_argument("--oracle", choices=["slimmed", "full-esa"], default=None,
                   help="override the attention route (full-esa = brute-force reference)")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("metrics", help="consistency metrics for an edited volume")
    p.add_argument("--edited", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--schedule", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("yt", help="stitch center pixel columns into a y-t diagnostic")
    p.add_argument("--frames", required=True, help="AFTN tensor (n, h, w[, c])")
    p.add_argument("--partition", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_yt)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (DataError, FileNotFoundError, json.JSONDecodeError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
