"""File-based workflow stages.

Every stage reads only the artifacts named in its signature and writes its
outputs atomically, so stages can be re-run one at a time.  Artifact names
inside the output directory are fixed (see ``ARTIFACTS``).
"""
from __future__ import annotations

import csv
import io
import json
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import bandit, evaluation
from .behavior_space import descriptors, fit_pca, load_pca, project, save_pca
from .clustering import (ClusterConfig, centroids, cluster_sizes, dbscan, read_labels_csv,
                         save_labels_csv)
from .demo_store import SplitSpec, atomic_write_text, flatten, load_demoset, save_demoset, split_per_cluster
from .errors import ContractError
from .microbuild_env import ARCHETYPES, EnvConfig, generate_demoset, load_env_config
from .policy_net import TrainConfig, load_policy, save_policy, train

ARTIFACTS = {
    "demos": "demos.jsonl",
    "descriptors": "descriptors.csv",
    "pca": "pca.json",
    "coords": "coords.csv",
    "labels": "labels.csv",
    "centroids": "centroids.csv",
    "evaluation": "evaluation.csv",
    "adaptation": "adaptation.csv",
    "adaptation_summary": "adaptation_summary.csv",
    "plot": "clusters.svg",
}
CSV_VERSION_LINE = "# format-version: 1\n"


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {cause}")


@dataclass
class PipelineConfig:
    seed: int = 0
    out_dir: str = "bril-out"
    demos: Optional[str] = None  # existing demonstration file; generated when absent
    env: Dict = field(default_factory=dict)
    env_config: Optional[str] = None
    archetypes: List[Tuple[str, int]] = field(default_factory=lambda: [("rush", 100), ("mix", 100), ("siege", 100)])
    noise: float = 0.1
    p: int = 2
    eps: float = 0.5
    min_pts: int = 5
    split: Tuple[float, float, float] = (0.6, 0.1, 0.3)
    learning_rate: float = 0.03
    batch_size: int = 64
    epochs: int = 20
    l2: float = 0.0
    eval_episodes: int = 100
    action_mode: str = "sample"
    adapt_episodes: int = 100
    C: float = bandit.SQRT2
    options: Optional[List[List[float]]] = None
    max_options: int = 4

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known - {"format_version"}
        if unknown:
            raise ConfigError(f"unknown pipeline config fields: {sorted(unknown)}")
        d = {k: v for k, v in d.items() if k in known}
        if "archetypes" in d:
            d["archetypes"] = [(str(a), int(n)) for a, n in d["archetypes"]]
        if "split" in d:
            d["split"] = tuple(float(x) for x in d["split"])
        return cls(**d)

    def env_cfg(self) -> EnvConfig:
        try:
            if self.env_config:
                cfg = load_env_config(self.env_config)
                return EnvConfig.from_dict({**cfg.to_dict(), **self.env}) if self.env else cfg
            return EnvConfig.from_dict(self.env)
        except (ContractError, TypeError, KeyError) as e:
            raise ConfigError(f"bad env config: {e}") from None

    def train_cfg(self, seed: int) -> TrainConfig:
        return TrainConfig(self.learning_rate, self.batch_size, self.epochs, seed, self.l2)

    def validate(self) -> None:
        if self.demos is not None and not Path(self.demos).is_file():
            raise ConfigError(f"demonstration file {self.demos} does not exist")
        if self.env_config is not None and not Path(self.env_config).is_file():
            raise ConfigError(f"env config {self.env_config} does not exist")
        for name, _ in self.archetypes:
            if name not in ARCHETYPES:
                raise ConfigError(f"unknown archetype {name!r}")
        if self.action_mode not in ("greedy", "sample"):
            raise ConfigError(f"action_mode must be greedy or sample, got {self.action_mode!r}")
        try:
            ClusterConfig(self.eps, self.min_pts)
            SplitSpec(self.split, self.seed)
            self.train_cfg(self.seed)
        except (ContractError, ValueError) as e:
            raise ConfigError(str(e)) from None
        if self.p < 1:
            raise ConfigError(f"p must be >= 1, got {self.p}")
        self.env_cfg()


def load_pipeline_config(path) -> PipelineConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            return PipelineConfig.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, TypeError) as e:
        raise ConfigError(f"cannot read pipeline config {path}: {e}") from None


def stage_seed(seed: int, stage: str) -> int:
    return int(np.random.SeedSequence([seed, zlib.crc32(stage.encode())]).generate_state(1)[0])


# --- small CSV helpers -----------------------------------------------------------------

def _write_csv(path, header: Sequence[str], rows) -> None:
    buf = io.StringIO()
    buf.write(CSV_VERSION_LINE)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    atomic_write_text(path, buf.getvalue())


def _read_csv(path) -> Tuple[List[str], List[List[str]]]:
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: missing header row")
    return rows[0], rows[1:]


def read_coords(path) -> Tuple[List[str], np.ndarray]:
    header, rows = _read_csv(path)
    ids = [r[0] for r in rows]
    return ids, np.array([[float(v) for v in r[1:]] for r in rows], dtype=float).reshape(len(rows), len(header) - 1)


def read_centroids(path) -> Tuple[Dict[int, np.ndarray], Dict[int, int]]:
    _, rows = _read_csv(path)
    cents = {int(r[0]): np.array([float(v) for v in r[2:]]) for r in rows}
    sizes = {int(r[0]): int(r[1]) for r in rows}
    return cents, sizes


def default_options(cents: Dict[int, np.ndarray], sizes: Dict[int, int], limit: int = 4) -> List[int]:
    """Cluster ids of the ``limit`` largest clusters (ties by lower id)."""
    return sorted(cents, key=lambda c: (-sizes[c], c))[:limit]


# --- stages ----------------------------------------------------------------------------

def gen_demos(cfg: PipelineConfig, out_path) -> None:
    out_path = Path(out_path)
    if not out_path.parent.is_dir():
        raise ConfigError(f"output directory {out_path.parent} does not exist")
    ds = generate_demoset(cfg.archetypes, cfg.env_cfg(), cfg.noise, stage_seed(cfg.seed, "gen-demos"))
    save_demoset(ds, out_path)


def extract(demos_path, out_path) -> None:
    ds = load_demoset(demos_path)
    D = descriptors(ds)
    _write_csv(out_path, ["id", *ds.schema.unit_types],
               [[d.id, *(repr(float(v)) for v in row)] for d, row in zip(ds, D)])


def read_descriptors(path) -> Tuple[List[str], np.ndarray]:
    return read_coords(path)


def reduce(descriptors_path, p: int, pca_path, coords_path) -> None:
    ids, D = read_descriptors(descriptors_path)
    model = fit_pca(D, p)
    save_pca(model, pca_path)
    B = project(model, D)
    _write_csv(coords_path, ["id", *(f"c{i}" for i in range(p))],
               [[i, *(repr(float(v)) for v in row)] for i, row in zip(ids, B)])


def cluster(coords_path, eps: float, min_pts: int, labels_path, centroids_path) -> None:
    _, B = read_coords(coords_path)
    labels = dbscan(B, ClusterConfig(eps, min_pts))
    save_labels_csv(B, labels, labels_path)
    cents = centroids(B, labels)
    sizes = cluster_sizes(labels)
    _write_csv(centroids_path, ["cluster", "size", *(f"c{i}" for i in range(B.shape[1]))],
               [[c, sizes[c], *(repr(float(v)) for v in cents[c])] for c in sorted(cents)])


def _labels(labels_path) -> np.ndarray:
    _, labels = read_labels_csv(labels_path)
    return labels


def train_stage(cfg: PipelineConfig, demos_path, coords_path, labels_path, centroids_path, out_dir) -> None:
    """Train IL on the whole training split, BRIL on the same split with behavior
    inputs, and one IL policy per option cluster on that cluster's training demos."""
    out_dir = Path(out_dir)
    ds = load_demoset(demos_path)
    ids, B = read_coords(coords_path)
    labels = _labels(labels_path)
    if ids != [d.id for d in ds] or len(labels) != len(ds):
        raise ContractError("coords/labels do not match the demonstration file")
    cents, sizes = read_centroids(centroids_path)
    tr, _, te = split_per_cluster(ds, labels, SplitSpec(cfg.split, stage_seed(cfg.seed, "split")))
    index = {d.id: i for i, d in enumerate(ds)}
    Btr = B[[index[d.id] for d in tr]]
    Bte = B[[index[d.id] for d in te]]
    tcfg = cfg.train_cfg(stage_seed(cfg.seed, "train"))
    A = ds.schema.action_count

    rows = []
    il, rep = train(flatten(tr), tcfg, flatten(te), action_count=A)
    save_policy(il, out_dir / "policy_il.json")
    atomic_write_text(out_dir / "train_il.csv", rep.to_csv())
    rows.append(["IL", len(tr), rep.test_accuracy, rep.test_loss])

    br, rep = train(flatten(tr, Btr), tcfg, flatten(te, Bte), behavior_dim=B.shape[1], action_count=A)
    save_policy(br, out_dir / "policy_bril.json")
    atomic_write_text(out_dir / "train_bril.csv", rep.to_csv())
    rows.append(["BRIL", len(tr), rep.test_accuracy, rep.test_loss])

    tr_ids = {d.id for d in tr}
    te_ids = {d.id for d in te}
    for c in default_options(cents, sizes, cfg.max_options):
        mem_tr = [i for i, d in enumerate(ds) if labels[i] == c and d.id in tr_ids]
        mem_te = [i for i, d in enumerate(ds) if labels[i] == c and d.id in te_ids]
        if not mem_tr:
            continue
        pol, rep = train(flatten(ds.subset(mem_tr)), tcfg, flatten(ds.subset(mem_te)) if mem_te else None,
                         action_count=A)
        save_policy(pol, out_dir / f"policy_il_c{c}.json")
        atomic_write_text(out_dir / f"train_il_c{c}.csv", rep.to_csv())
        rows.append([f"IL (C{c})", len(mem_tr), rep.test_accuracy, rep.test_loss])
    _write_csv(out_dir / "accuracy.csv", ["method", "train_demos", "test_accuracy", "test_loss"],
               [[m, n, f"{a:.6f}", f"{l:.6f}"] for m, n, a, l in rows])


def resolve_options(cfg: PipelineConfig, centroids_path) -> List[Tuple[str, np.ndarray]]:
    if cfg.options:
        return [(f"O{j}", np.asarray(o, dtype=float)) for j, o in enumerate(cfg.options)]
    cents, sizes = read_centroids(centroids_path)
    return [(f"C{c}", cents[c]) for c in default_options(cents, sizes, cfg.max_options)]


def eval_stage(cfg: PipelineConfig, demos_path, pca_path, centroids_path, models_dir, out_path) -> None:
    ds = load_demoset(demos_path)
    pca = load_pca(pca_path)
    cents, _ = read_centroids(centroids_path)
    env = cfg.env_cfg()
    D = descriptors(ds)
    models_dir = Path(models_dir)
    seed = stage_seed(cfg.seed, "eval")
    options = resolve_options(cfg, centroids_path)
    n = cfg.eval_episodes
    rows = []

    il = load_policy(models_dir / "policy_il.json")
    rows.append(evaluation.summarize(
        "IL", evaluation.play(il, env, n, seed, mode=cfg.action_mode), ds, pca, cents, D))
    for name, _ in options:
        path = models_dir / f"policy_il_{name.lower()}.json"
        if path.exists():
            pol = load_policy(path)
            rows.append(evaluation.summarize(
                f"IL ({name})", evaluation.play(pol, env, n, seed, mode=cfg.action_mode), ds, pca, cents, D))
    br = load_policy(models_dir / "policy_bril.json")
    for name, opt in options:
        rows.append(evaluation.summarize(
            f"BRIL ({name})", evaluation.play(br, env, n, seed, behavior=opt, mode=cfg.action_mode),
            ds, pca, cents, D))
    atomic_write_text(out_path, evaluation.summary_csv(rows, ds.schema.unit_types, sorted(cents)))


def adapt_stage(cfg: PipelineConfig, models_dir, centroids_path, log_path) -> bandit.AdaptationLog:
    br = load_policy(Path(models_dir) / "policy_bril.json")
    options = resolve_options(cfg, centroids_path)
    log = bandit.run_adaptation(br, [o for _, o in options], cfg.adapt_episodes, cfg.env_cfg(), cfg.C,
                                stage_seed(cfg.seed, "adapt"), cfg.action_mode)
    atomic_write_text(log_path, log.to_csv())
    names = [n for n, _ in options]
    _write_csv(Path(log_path).with_name(ARTIFACTS["adaptation_summary"]),
               ["method", "wins", "games"] + [f"{n}_wins" for n in names] + [f"{n}_plays" for n in names],
               [["BRIL (UCB1)", log.total_wins, cfg.adapt_episodes, *log.wins(), *log.plays()]])
    return log


def run_pipeline(cfg: PipelineConfig, log=print) -> Dict[str, Path]:
    cfg.validate()
    out = Path(cfg.out_dir)
    if not out.parent.is_dir():
        raise ConfigError(f"parent of output directory {out} does not exist")
    out.mkdir(exist_ok=True)
    (out / "models").mkdir(exist_ok=True)
    paths = {k: out / v for k, v in ARTIFACTS.items()}
    if cfg.demos:
        paths["demos"] = Path(cfg.demos)

    def run(stage, fn, *args):
        log(f"[{stage}]")
        try:
            return fn(*args)
        except (ConfigError, StageError):
            raise
        except Exception as e:  # noqa: BLE001 - any failure aborts with the stage name
            raise StageError(stage, e) from e

    if not cfg.demos:
        run("gen-demos", gen_demos, cfg, paths["demos"])
    run("extract", extract, paths["demos"], paths["descriptors"])
    run("reduce", reduce, paths["descriptors"], cfg.p, paths["pca"], paths["coords"])
    run("cluster", cluster, paths["coords"], cfg.eps, cfg.min_pts, paths["labels"], paths["centroids"])
    run("plot", plot_stage, paths["labels"], paths["plot"])
    run("train", train_stage, cfg, paths["demos"], paths["coords"], paths["labels"], paths["centroids"],
        out / "models")
    run("eval", eval_stage, cfg, paths["demos"], paths["pca"], paths["centroids"], out / "models",
        paths["evaluation"])
    run("adapt", adapt_stage, cfg, out / "models", paths["centroids"], paths["adaptation"])
    return paths


def plot_stage(labels_path, svg_path) -> None:
    from .plot import scatter_svg
    pts, labels = read_labels_csv(labels_path)
    atomic_write_text(svg_path, scatter_svg(pts, labels))
