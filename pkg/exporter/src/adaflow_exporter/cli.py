"""CLI: export per-frame features and inverted latents for the editing pipeline.

Exit codes: 0 success, 2 bad arguments, 3 decode/model/export failure.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ExportError
from .export import run_export
from .video import DEFAULT_SIZE, load_frames


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaflow-export",
        description="Extract per-frame features and DDIM-style latents from a video "
                    "into AFTN files plus a manifest.")
    parser.add_argument("--video", required=True,
                        help="video file or directory of image frames")
    parser.add_argument("--model", required=True,
                        help="'multiscale' (weights-free) or 'sd:<repo-or-path>'")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--layer", default=None,
                        help="decoder layer tag for sd models (up0..up3), recorded in "
                             "the manifest")
    parser.add_argument("--timesteps", type=int, default=50)
    parser.add_argument("--size", default=f"{DEFAULT_SIZE[0]}x{DEFAULT_SIZE[1]}",
                        help="target WxH before encoding (default 672x384)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--limit", type=int, default=None, help="cap the frame count")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        width, height = (int(p) for p in args.size.lower().split("x"))
    except ValueError:
        print(f"bad --size {args.size!r}, expected WxH", file=sys.stderr)
        return 2
    if args.timesteps < 1:
        print(f"--timesteps must be >= 1, got {args.timesteps}", file=sys.stderr)
        return 2
    try:
        frames = load_frames(args.video, size=(width, height), limit=args.limit)
        manifest = run_export(frames, args.model, args.out, layer=args.layer,
                              timesteps=args.timesteps, seed=args.seed, video=args.video)
    except ExportError as e:
        print(f"export failed: {e}", file=sys.stderr)
        return 3
    print(f"exported {manifest.n} frames: features {manifest.feature_h}x"
          f"{manifest.feature_w}x{manifest.feature_d}, latents T={manifest.latent_timesteps} "
          f"{manifest.latent_h}x{manifest.latent_w}x{manifest.latent_c} -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
