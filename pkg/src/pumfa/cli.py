"""Command-line entry point.

Subcommands: gen-data, train, upsample, eval, attn-dump. Exit codes:
0 success, 1 usage error, 2 runtime failure. Every run echoes its resolved
configuration before doing work, so logs are self-describing.
"""

import argparse
import os
import sys

import numpy as np

from .attention_maps import dump_attention
from .checkpoint import CheckpointError
from .cloudio import CloudError, load_cloud, save_cloud
from .config import ConfigError, apply_overrides, load_train_config, resolved_lines
from .dataset import dataset_from_config, load_dataset, save_dataset
from .evaluation import NOISE_LEVELS, evaluate
from .geometry import farthest_point_sample
from .meshio import MeshError
from .reporting import (
    plot_attention_overlay,
    plot_cd_vs_noise,
    plot_loss_curve,
    write_attention_csv,
    write_metrics_csv,
    write_metrics_table,
    write_train_log,
)
from .training import TrainingError, load_model, train

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2

_RUNTIME_ERRORS = (
    CheckpointError,
    CloudError,
    ConfigError,
    MeshError,
    TrainingError,
    OSError,
    ValueError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse parser that reports usage problems as exceptions instead of
    exiting, so main() owns the exit code."""

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _echo_config(config):
    for line in resolved_lines(config):
        print(line)


def _echo_model(params, extra=None):
    print("[model]")
    for key, val in params.config.to_dict().items():
        print(f"{key} = {val}")
    for key, val in (extra or {}).items():
        print(f"{key} = {val}")


def _load_config(args):
    config = load_train_config(getattr(args, "config", None),
                               profile=getattr(args, "profile", "desk"))
    return apply_overrides(
        config,
        seed=getattr(args, "seed", None),
        checkpoint_path=getattr(args, "ckpt", None),
    )


def _cmd_gen_data(args):
    config = _load_config(args)
    _echo_config(config)
    pairs = dataset_from_config(config)
    save_dataset(args.out, pairs)
    print(f"wrote {len(pairs)} patch pairs to {args.out}")
    return EXIT_OK


def _cmd_train(args):
    config = _load_config(args)
    _echo_config(config)
    dataset = load_dataset(args.inp) if args.inp else None
    os.makedirs(args.out, exist_ok=True)
    result = train(config, dataset=dataset, resume=args.resume, log=print)
    log_path = os.path.join(args.out, "train_log.csv")
    curve_path = os.path.join(args.out, "loss_curve.png")
    write_train_log(result.history, log_path)
    plot_loss_curve(result.history, curve_path)
    final = result.final_metrics
    print(
        f"final cd_q {final['cd_q_d']:.6f} dcd_q {final['dcd_q_d']:.6f} "
        f"cd_qp {final['cd_qp_d']:.6f}"
    )
    print(f"checkpoint: {result.checkpoint_path}")
    print(f"log: {log_path}")
    print(f"figure: {curve_path}")
    return EXIT_OK


def _cmd_upsample(args):
    from .inference import upsample_cloud

    params = load_model(args.ckpt)
    ratio = args.ratio if args.ratio is not None else params.config.r
    _echo_model(params, {"ratio": ratio, "input": args.inp, "output": args.out})
    cloud = load_cloud(args.inp)
    try:
        dense = upsample_cloud(params, cloud, ratio=ratio)
    except ValueError as exc:
        if "power of" in str(exc):
            raise UsageError(str(exc))
        raise
    save_cloud(args.out, dense)
    print(f"{len(cloud)} -> {len(dense)} points written to {args.out}")
    return EXIT_OK


def _cmd_eval(args):
    config = _load_config(args)
    params = load_model(args.ckpt)
    levels = tuple(args.noise_level) if args.noise_level else NOISE_LEVELS
    _echo_config(config)
    result = evaluate(
        params,
        config.meshes,
        ratio=args.ratio,
        noise_levels=levels,
        seed=config.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "metrics.csv")
    txt_path = os.path.join(args.out, "metrics.txt")
    fig_path = os.path.join(args.out, "cd_vs_noise.png")
    write_metrics_csv(result, csv_path)
    write_metrics_table(result, txt_path)
    plot_cd_vs_noise(result, fig_path)
    with open(txt_path) as fh:
        print(fh.read(), end="")
    print(f"table: {txt_path}")
    print(f"csv: {csv_path}")
    print(f"figure: {fig_path}")
    return EXIT_OK


def _cmd_attn_dump(args):
    params = load_model(args.ckpt)
    heads = None
    if args.heads:
        try:
            heads = [int(h) for h in args.heads.split(",") if h.strip()]
        except ValueError:
            raise UsageError(f"--heads wants comma-separated integers, got {args.heads!r}")
    _echo_model(params, {"top_k": args.top_k, "heads": args.heads or "all"})
    cloud = load_cloud(args.inp)
    n = params.config.n
    if len(cloud) > n:
        cloud = cloud[farthest_point_sample(cloud, n, seed=0)]
    report = dump_attention(params, cloud, heads=heads, top_k=args.top_k,
                            out_dir=args.out)
    csv_path = os.path.join(args.out, "attention_topk.csv")
    fig_path = os.path.join(args.out, "attention_overlay.png")
    write_attention_csv(report, csv_path)
    plot_attention_overlay(report, fig_path)
    print(f"{len(report.layers)} layers dumped; overlays: "
          f"{len(report.overlay_paths)} ply files in {args.out}")
    print(f"csv: {csv_path}")
    print(f"figure: {fig_path}")
    return EXIT_OK


def _add_config_flags(sub):
    sub.add_argument("--config", help="INI config file")
    sub.add_argument("--profile", default="desk", choices=("paper", "desk"))
    sub.add_argument("--seed", type=int, default=None)


def build_parser():
    parser = _Parser(prog="pumfa", description=__doc__)
    subs = parser.add_subparsers(dest="command", parser_class=_Parser)

    gen = subs.add_parser("gen-data", help="generate a patch-pair dataset")
    _add_config_flags(gen)
    gen.add_argument("--out", default="dataset.npz", help="output .npz path")
    gen.set_defaults(fn=_cmd_gen_data)

    tr = subs.add_parser("train", help="train a model")
    _add_config_flags(tr)
    tr.add_argument("--ckpt", default=None, help="checkpoint path override")
    tr.add_argument("--in", dest="inp", default=None,
                    help="pre-generated dataset .npz (default: generate)")
    tr.add_argument("--out", default="runs", help="directory for logs and figures")
    tr.add_argument("--resume", action="store_true",
                    help="continue from the checkpoint if it exists")
    tr.set_defaults(fn=_cmd_train)

    up = subs.add_parser("upsample", help="upsample a point cloud file")
    up.add_argument("--in", dest="inp", required=True, help="input cloud (.xyz/.ply)")
    up.add_argument("--out", required=True, help="output cloud path")
    up.add_argument("--ckpt", required=True, help="model checkpoint")
    up.add_argument("--ratio", type=int, default=None,
                    help="upsampling ratio (a power of the model's r)")
    up.set_defaults(fn=_cmd_upsample)

    ev = subs.add_parser("eval", help="metric table over meshes and noise levels")
    _add_config_flags(ev)
    ev.add_argument("--ckpt", required=True)
    ev.add_argument("--out", default="evalout", help="directory for reports")
    ev.add_argument("--ratio", type=int, default=None)
    ev.add_argument("--noise-level", type=float, action="append", default=None,
                    help="evaluate this sigma only (repeatable)")
    ev.set_defaults(fn=_cmd_eval)

    at = subs.add_parser("attn-dump", help="decoder attention diagnostics")
    at.add_argument("--ckpt", required=True)
    at.add_argument("--in", dest="inp", required=True, help="input cloud")
    at.add_argument("--out", default="attnout", help="directory for overlays")
    at.add_argument("--top-k", type=int, default=30)
    at.add_argument("--heads", default=None, help="comma-separated head indices")
    at.set_defaults(fn=_cmd_attn_dump)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "fn", None) is None:
            parser.print_usage(sys.stderr)
            return EXIT_USAGE
        return args.fn(args)
    except SystemExit as exc:  # argparse -h/--help
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
