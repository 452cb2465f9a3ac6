"""Command line entry point: ``bril <subcommand>``.

Every subcommand accepts ``--config`` (a JSON pipeline config) and
``--out-dir``; artifact paths default to fixed names inside the output
directory and can be overridden individually.

Exit codes: 0 success, 2 configuration error, 3 stage failure.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline as pl
from .errors import ContractError

EXIT_OK, EXIT_CONFIG, EXIT_STAGE = 0, 2, 3

# flag dest -> PipelineConfig field
OVERRIDES = {
    "seed": "seed", "out_dir": "out_dir", "env_config": "env_config", "noise": "noise",
    "p": "p", "eps": "eps", "min_pts": "min_pts", "learning_rate": "learning_rate",
    "batch_size": "batch_size", "epochs": "epochs", "l2": "l2", "eval_episodes": "eval_episodes",
    "action_mode": "action_mode", "adapt_episodes": "adapt_episodes", "C": "C",
    "max_options": "max_options", "demos_in": "demos",
}


def _archetypes(text: str):
    out = []
    for part in text.split(","):
        name, _, count = part.partition(":")
        if not count:
            raise argparse.ArgumentTypeError(f"expected name:count, got {part!r}")
        out.append((name.strip(), int(count)))
    return out


def _options(text: str):
    return [[float(v) for v in opt.split(",")] for opt in text.split(";") if opt.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="pipeline config JSON")
    common.add_argument("--seed", type=int)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--env-config", dest="env_config")

    parser = argparse.ArgumentParser(prog="bril", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-demos", parents=[common], help="generate scripted demonstrations")
    p.add_argument("--out", help="demonstration file (default OUT_DIR/demos.jsonl)")
    p.add_argument("--archetypes", type=_archetypes, help="e.g. rush:100,mix:100,siege:100")
    p.add_argument("--noise", type=float)
    p.add_argument("--opponent", help="opponent archetype for the env")

    p = sub.add_parser("extract", parents=[common], help="demonstrations -> unit-ratio descriptors")
    p.add_argument("--demos")
    p.add_argument("--out")

    p = sub.add_parser("reduce", parents=[common], help="descriptors -> PCA model and coordinates")
    p.add_argument("--descriptors")
    p.add_argument("--p", type=int)
    p.add_argument("--pca-out")
    p.add_argument("--coords-out")

    p = sub.add_parser("cluster", parents=[common], help="DBSCAN on reduced coordinates")
    p.add_argument("--coords")
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", dest="min_pts", type=int)
    p.add_argument("--labels-out")
    p.add_argument("--centroids-out")

    train_flags = argparse.ArgumentParser(add_help=False)
    train_flags.add_argument("--learning-rate", dest="learning_rate", type=float)
    train_flags.add_argument("--batch-size", dest="batch_size", type=int)
    train_flags.add_argument("--epochs", type=int)
    train_flags.add_argument("--l2", type=float)

    play_flags = argparse.ArgumentParser(add_help=False)
    play_flags.add_argument("--action-mode", dest="action_mode", choices=["greedy", "sample"])
    play_flags.add_argument("--options", type=_options, help="behavior options 'x,y;x,y;...'")
    play_flags.add_argument("--max-options", dest="max_options", type=int)

    p = sub.add_parser("train", parents=[common, train_flags], help="train IL, BRIL and per-cluster IL")
    p.add_argument("--demos")
    p.add_argument("--coords")
    p.add_argument("--labels")
    p.add_argument("--centroids")
    p.add_argument("--models-dir")
    p.add_argument("--max-options", dest="max_options", type=int)

    p = sub.add_parser("eval", parents=[common, play_flags], help="fixed-option evaluation table")
    p.add_argument("--demos")
    p.add_argument("--pca")
    p.add_argument("--centroids")
    p.add_argument("--models-dir")
    p.add_argument("--episodes", dest="eval_episodes", type=int)
    p.add_argument("--out")

    p = sub.add_parser("adapt", parents=[common, play_flags], help="UCB1 adaptation over behavior options")
    p.add_argument("--models-dir")
    p.add_argument("--centroids")
    p.add_argument("--episodes", dest="adapt_episodes", type=int)
    p.add_argument("--C", dest="C", type=float)
    p.add_argument("--out")

    p = sub.add_parser("plot", help="SVG scatter from a labels CSV")
    p.add_argument("labels_csv")
    p.add_argument("--out", help="SVG path (default: labels path with .svg)")

    p = sub.add_parser("pipeline", parents=[common, train_flags, play_flags], help="run every stage")
    p.add_argument("--demos", dest="demos_in", help="use an existing demonstration file")
    p.add_argument("--archetypes", type=_archetypes)
    p.add_argument("--noise", type=float)
    p.add_argument("--p", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--min-pts", dest="min_pts", type=int)
    p.add_argument("--eval-episodes", dest="eval_episodes", type=int)
    p.add_argument("--adapt-episodes", dest="adapt_episodes", type=int)
    p.add_argument("--C", dest="C", type=float)
    return parser


def make_config(args) -> pl.PipelineConfig:
    cfg = pl.load_pipeline_config(args.config) if getattr(args, "config", None) else pl.PipelineConfig()
    for dest, name in OVERRIDES.items():
        val = getattr(args, dest, None)
        if val is not None:
            setattr(cfg, name, val)
    if getattr(args, "archetypes", None):
        cfg.archetypes = args.archetypes
    if getattr(args, "options", None):
        cfg.options = args.options
    if getattr(args, "opponent", None):
        cfg.env = {**cfg.env, "opponent_archetype": args.opponent}
    return cfg


def _require(*paths) -> None:
    for p in paths:
        if not Path(p).is_file():
            raise pl.ConfigError(f"input file {p} does not exist")


def _outdir(cfg, create=False) -> Path:
    out = Path(cfg.out_dir)
    if create:
        if not out.parent.is_dir():
            raise pl.ConfigError(f"parent of output directory {out} does not exist")
        out.mkdir(exist_ok=True)
    return out


def _path(explicit, out: Path, key: str) -> Path:
    return Path(explicit) if explicit else out / pl.ARTIFACTS[key]


def dispatch(args) -> int:
    cmd = args.command
    if cmd == "plot":
        _require(args.labels_csv)
        out = Path(args.out) if args.out else Path(args.labels_csv).with_suffix(".svg")
        try:
            pl.plot_stage(args.labels_csv, out)
        except ValueError as e:
            raise pl.StageError("plot", e) from e
        return EXIT_OK

    cfg = make_config(args)
    if cmd == "pipeline":
        if args.seed is None:
            raise pl.ConfigError("--seed is required for pipeline")
        paths = pl.run_pipeline(cfg, log=lambda m: print(m, file=sys.stderr))
        print(paths["evaluation"])
        return EXIT_OK

    cfg.validate()
    if cmd == "gen-demos":
        out = Path(args.out) if args.out else _outdir(cfg, create=True) / pl.ARTIFACTS["demos"]
        stage = (pl.gen_demos, cfg, out)
    elif cmd == "extract":
        out = _outdir(cfg, create=True)
        src = _path(args.demos, out, "demos")
        _require(src)
        stage = (pl.extract, src, _path(args.out, out, "descriptors"))
    elif cmd == "reduce":
        out = _outdir(cfg, create=True)
        src = _path(args.descriptors, out, "descriptors")
        _require(src)
        stage = (pl.reduce, src, cfg.p, _path(args.pca_out, out, "pca"), _path(args.coords_out, out, "coords"))
    elif cmd == "cluster":
        out = _outdir(cfg, create=True)
        src = _path(args.coords, out, "coords")
        _require(src)
        stage = (pl.cluster, src, cfg.eps, cfg.min_pts, _path(args.labels_out, out, "labels"),
                 _path(args.centroids_out, out, "centroids"))
    elif cmd == "train":
        out = _outdir(cfg, create=True)
        ins = [_path(args.demos, out, "demos"), _path(args.coords, out, "coords"),
               _path(args.labels, out, "labels"), _path(args.centroids, out, "centroids")]
        _require(*ins)
        models = Path(args.models_dir) if args.models_dir else out / "models"
        models.mkdir(exist_ok=True)
        stage = (pl.train_stage, cfg, *ins, models)
    elif cmd == "eval":
        out = _outdir(cfg, create=True)
        models = Path(args.models_dir) if args.models_dir else out / "models"
        ins = [_path(args.demos, out, "demos"), _path(args.pca, out, "pca"), _path(args.centroids, out, "centroids")]
        _require(*ins, models / "policy_il.json", models / "policy_bril.json")
        stage = (pl.eval_stage, cfg, *ins, models, _path(args.out, out, "evaluation"))
    elif cmd == "adapt":
        out = _outdir(cfg, create=True)
        models = Path(args.models_dir) if args.models_dir else out / "models"
        cents = _path(args.centroids, out, "centroids")
        _require(models / "policy_bril.json", *([] if cfg.options else [cents]))
        stage = (pl.adapt_stage, cfg, models, cents, _path(args.out, out, "adaptation"))
    else:  # pragma: no cover - argparse restricts choices
        raise pl.ConfigError(f"unknown command {cmd}")

    fn, *fargs = stage
    try:
        fn(*fargs)
    except pl.ConfigError:
        raise
    except Exception as e:  # noqa: BLE001
        raise pl.StageError(cmd, e) from e
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return dispatch(args)
    except pl.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ContractError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except pl.StageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_STAGE


if __name__ == "__main__":
    sys.exit(main())
