"""Command line entry point: ``ts <subcommand>``.

Exit codes: 0 success, 1 failure (including partial extraction failure), 2 invalid config.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import InvalidConfig, TrajsetError
from .manifest import read_manifest

TRANSCODE_HINT = (
    "Inputs are Y4M files (4:2:0 or mono) or directories of PGM/PNG frames. "
    "Convert other containers first, e.g. "
    "`ffmpeg -i clip.avi -pix_fmt gray -f yuv4mpegpipe clip.y4m`."
)


def _common(p):
    p.add_argument("--config", help="TOML or JSON file overriding default parameters")


def _ts_opts(p):
    p.add_argument("--cell-size", type=int, dest="M", help="cell side M in pixels (default 10)")
    p.add_argument("--block-cells", type=int, dest="K", help="cells per block side K (default 5)")
    p.add_argument("--traj-len", type=int, dest="L", help="trajectory length L in frames (default 15)")
    p.add_argument("--variant", choices=["displacement", "local_coords", "displacement_skip2"])
    p.add_argument("--flow-window", type=int, help="flow averaging window (odd, default 15)")
    p.add_argument("--flow-iters", type=int, help="flow refinement iterations (default 3)")
    p.add_argument("--levels", choices=["all", "level0"], help="pyramid levels feeding TS features")


def _codebook_opts(p):
    p.add_argument("--ratio", type=float, help="fraction of features sampled for the GMM (default 0.01)")
    p.add_argument("--n-components", type=int, help="Gaussians in the codebook (default 64)")
    p.add_argument("--seed", type=int, help="codebook sampling/EM seed")
    p.add_argument("--pca-dim", type=int, help="optional PCA before the GMM (off by default)")


def _mlp_opts(p):
    p.add_argument("--hidden", type=int, help="hidden units (default 100)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--lr", type=float)


def build_parser():
    parser = argparse.ArgumentParser(prog="ts", description="Trajectory-Set action recognition pipeline.",
                                     epilog=TRANSCODE_HINT)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="videos -> TS feature files", epilog=TRANSCODE_HINT)
    p.add_argument("manifest")
    p.add_argument("out_dir")
    p.add_argument("--dump-trajectories", action="store_true", help="also write <key>.trj (TRJ1)")
    p.add_argument("--workers", type=int)
    _ts_opts(p)
    _common(p)

    p = sub.add_parser("fit-codebook", help="TS features -> GMM1 codebook")
    p.add_argument("feature_dir")
    p.add_argument("out")
    p.add_argument("--manifest", help="restrict to this manifest's videos")
    p.add_argument("--holdout-group", type=int, help="with --manifest: exclude this group")
    _codebook_opts(p)
    _common(p)

    p = sub.add_parser("encode", help="TS features + codebook -> Fisher vectors")
    p.add_argument("feature_dir")
    p.add_argument("gmm")
    p.add_argument("out_dir")
    _common(p)

    p = sub.add_parser("train", help="Fisher vectors -> MLP1 model")
    p.add_argument("fv_dir")
    p.add_argument("manifest")
    p.add_argument("out")
    _mlp_opts(p)
    _common(p)

    p = sub.add_parser("eval-logo", help="leave-one-group-out cross-validation")
    p.add_argument("manifest")
    p.add_argument("--features", help="feature cache directory (read if present, written otherwise)")
    p.add_argument("--out", help="write report.json and report.txt here")
    p.add_argument("--shared-codebook", action="store_true", help="fit one codebook on all videos")
    p.add_argument("--baseline", choices=["random"], help="replace the classifier by a baseline")
    p.add_argument("--workers", type=int)
    _ts_opts(p)
    _codebook_opts(p)
    _mlp_opts(p)
    _common(p)

    p = sub.add_parser("synth", help="write a synthetic motion dataset (Y4M + manifest)")
    p.add_argument("out_dir")
    p.add_argument("--per-class", type=int, default=10)
    p.add_argument("--groups", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--frames", type=int, default=60)
    p.add_argument("--jitter", type=float, default=0.2)

    p = sub.add_parser("plot", help="SVG of one block's cell trajectories from a TRJ1 dump")
    p.add_argument("dump")
    p.add_argument("out")
    p.add_argument("--frame", type=int, required=True, help="starting frame")
    p.add_argument("--block", type=int, nargs=2, required=True, metavar=("BX", "BY"),
                   help="top-left cell of the block")
    p.add_argument("--cell-size", type=int, default=10, dest="M")
    p.add_argument("--block-cells", type=int, default=5, dest="K")
    p.add_argument("--width", type=int)
    p.add_argument("--height", type=int)
    return parser


def overrides_from_args(args) -> dict:
    o = {}

    def put(section, key, value):
        if value is not None:
            if section:
                o.setdefault(section, {})[key] = value
            else:
                o[key] = value

    g = vars(args)
    put("ts", "M", g.get("M"))
    put("ts", "K", g.get("K"))
    put(None, "L", g.get("L"))
    put("ts", "variant", g.get("variant"))
    put("flow", "window", g.get("flow_window"))
    put("flow", "iterations", g.get("flow_iters"))
    put("tracker", "levels", g.get("levels"))
    put("codebook", "ratio", g.get("ratio"))
    put("codebook", "n_components", g.get("n_components"))
    put("codebook", "seed", g.get("seed"))
    put("codebook", "pca_dim", g.get("pca_dim"))
    put("mlp", "hidden_dim", g.get("hidden"))
    if g.get("epochs") is not None or g.get("lr") is not None:
        train = {}
        if g.get("epochs") is not None:
            train["epochs"] = g["epochs"]
        if g.get("lr") is not None:
            train["learning_rate"] = g["lr"]
        o.setdefault("mlp", {})["train"] = train
    put(None, "workers", g.get("workers"))
    if g.get("shared_codebook"):
        o["shared_codebook"] = True
    put(None, "baseline", g.get("baseline"))
    return o


def _run(args) -> int:
    cmd = args.command
    if cmd == "synth":
        from .synth import default_classes, make_dataset, write_dataset

        items = make_dataset(default_classes(args.size, args.size, args.frames), args.per_class, args.groups,
                             args.seed, args.jitter)
        print(write_dataset(items, args.out_dir))
        return 0
    if cmd == "plot":
        from .plot import cmd_plot

        n = cmd_plot(args.dump, args.frame, tuple(args.block), args.out, args.M, args.K, args.width, args.height)
        print(f"{args.out}: {n} trajectories")
        return 0

    config = load_config(args.config, overrides_from_args(args))
    if cmd == "extract":
        summary = pipeline.cmd_extract(args.manifest, config, args.out_dir, args.dump_trajectories)
        n = len(summary["videos"])
        print(f"extracted {n - summary['failures']}/{n} videos into {args.out_dir}")
        return 1 if summary["failures"] else 0
    if cmd == "fit-codebook":
        keys = None
        if args.manifest:
            rows = read_manifest(args.manifest).rows
            keys = [r.key for r in rows if args.holdout_group is None or r.group != args.holdout_group]
        cb = pipeline.cmd_fit_codebook(args.feature_dir, args.out, config, keys)
        print(f"{args.out}: {cb.gmm.n_components} components, dim {cb.gmm.dim}, {cb.n_samples} samples")
        return 0
    if cmd == "encode":
        res = pipeline.cmd_encode(args.feature_dir, args.gmm, args.out_dir, config)
        print(f"encoded {len(res['encoded'])} videos, skipped {len(res['skipped'])}")
        return 0
    if cmd == "train":
        model = pipeline.cmd_train(args.fv_dir, args.manifest, args.out, config)
        print(f"{args.out}: {model.n_classes} classes, final train loss {model.final_train_loss:.4f}")
        return 0
    if cmd == "eval-logo":
        report = pipeline.cmd_eval_logo(args.manifest, config, args.features, args.out)
        print(pipeline.format_report(report), end="")
        if args.out is None:
            print(json.dumps({"mean_accuracy": report["mean_accuracy"]}))
        return 0
    raise AssertionError(cmd)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return _run(args)
    except InvalidConfig as exc:
        print(f"ts: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except (TrajsetError, OSError, RuntimeError) as exc:
        print(f"ts: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
