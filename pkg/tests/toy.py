"""One seeded run of the toy BRIL workflow, held in memory and cached per seed.

Mirrors the pipeline stages (same stage seeds and defaults) without the file
round trips, so the acceptance checks can share trained models.
"""
import functools
import time
from types import SimpleNamespace

import numpy as np

from bril.behavior_space import descriptors, fit_pca, project
from bril.clustering import ClusterConfig, centroids, cluster_sizes, dbscan
from bril.demo_store import SplitSpec, flatten, split_per_cluster
from bril.microbuild_env import generate_demoset
from bril.pipeline import PipelineConfig, default_options, stage_seed
from bril.policy_net import train

ARCHETYPE_NAMES = ("rush", "mix", "siege")


def archetype_clusters(ds, D, pca, cents):
    """Map archetype -> cluster id by mutual nearest neighbour between cluster
    centroids and projected archetype mean descriptors; None when not one-to-one."""
    names = [d.meta["archetype"] for d in ds]
    means = {a: project(pca, D[[i for i, n in enumerate(names) if n == a]].mean(axis=0)) for a in ARCHETYPE_NAMES}
    cid = sorted(cents)
    nearest_arch = {c: min(means, key=lambda a: np.linalg.norm(cents[c] - means[a])) for c in cid}
    nearest_cluster = {a: min(cid, key=lambda c: np.linalg.norm(cents[c] - means[a])) for a in means}
    if all(nearest_arch[nearest_cluster[a]] == a for a in means) and len(set(nearest_cluster.values())) == 3:
        return nearest_cluster
    return None


@functools.lru_cache(maxsize=None)
def toy_run(seed: int):
    cfg = PipelineConfig(seed=seed)
    env = cfg.env_cfg()
    ds = generate_demoset(cfg.archetypes, env, cfg.noise, stage_seed(seed, "gen-demos"))
    D = descriptors(ds)
    pca = fit_pca(D, cfg.p)
    B = project(pca, D)
    labels = dbscan(B, ClusterConfig(cfg.eps, cfg.min_pts))
    cents = centroids(B, labels)
    sizes = cluster_sizes(labels)

    tr, _, te = split_per_cluster(ds, labels, SplitSpec(cfg.split, stage_seed(seed, "split")))
    index = {d.id: i for i, d in enumerate(ds)}
    Btr = B[[index[d.id] for d in tr]]
    Bte = B[[index[d.id] for d in te]]
    tcfg = cfg.train_cfg(stage_seed(seed, "train"))
    t0 = time.perf_counter()
    il, rep_il = train(flatten(tr), tcfg, flatten(te), action_count=env.action_count)
    br, rep_br = train(flatten(tr, Btr), tcfg, flatten(te, Bte), behavior_dim=B.shape[1],
                       action_count=env.action_count)
    train_seconds = time.perf_counter() - t0
    return SimpleNamespace(
        seed=seed, cfg=cfg, env=env, ds=ds, D=D, pca=pca, B=B, labels=labels, cents=cents, sizes=sizes,
        il=il, br=br, rep_il=rep_il, rep_br=rep_br, train_seconds=train_seconds,
        options=default_options(cents, sizes, cfg.max_options),
        arch_clusters=archetype_clusters(ds, D, pca, cents),
    )
