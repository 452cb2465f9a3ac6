"""Behavior fidelity and win-rate evaluation of trained policies.

A policy's realised behavior is estimated by averaging per-episode unit
ratios, finding the nearest demonstration in raw descriptor space and
reading off that demonstration's reduced coordinates.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np

from .behavior_space import PcaModel, descriptors, project, ratios
from .demo_store import DemoSet
from .errors import ContractError
from .microbuild_env import EnvConfig, EpisodeResult, observe, run_episode
from .policy_net import MlpPolicy, choose

EVAL_FORMAT_VERSION = 1


@dataclass
class BehaviorEstimate:
    mean_raw: np.ndarray
    nearest_demo_id: str
    coords: np.ndarray
    distance: float
    centroid_distances: Dict[int, float]


def mean_behavior(results: Sequence[EpisodeResult]) -> np.ndarray:
    if not results:
        raise ContractError("mean_behavior needs at least one episode")
    return np.mean([ratios(r.produced_counts) for r in results], axis=0)


def localize(mean, demoset: DemoSet, pca: PcaModel, descs: Optional[np.ndarray] = None) -> BehaviorEstimate:
    """Nearest demonstration to ``mean`` in raw descriptor space (lowest id on
    distance ties) and its reduced coordinates."""
    if len(demoset) == 0:
        raise ContractError("localize needs a non-empty demonstration set")
    if descs is None:
        descs = descriptors(demoset)
    mean = np.asarray(mean, dtype=float)
    d2 = ((descs - mean) ** 2).sum(axis=1)
    best = d2.min()
    ids = [demoset[i].id for i in np.flatnonzero(d2 == best)]
    winner = min(ids)
    j = next(i for i, d in enumerate(demoset) if d.id == winner)
    coords = project(pca, descs[j])
    return BehaviorEstimate(mean, winner, coords, float(np.sqrt(best)), {})


def centroid_distances(coords, cents: Mapping[int, Sequence[float]]) -> Dict[int, float]:
    c = np.asarray(coords, dtype=float)
    return {int(k): float(np.linalg.norm(c - np.asarray(v, dtype=float))) for k, v in cents.items()}


def nearest_centroid(coords, cents: Mapping[int, Sequence[float]]) -> int:
    dist = centroid_distances(coords, cents)
    return min(dist, key=lambda k: (dist[k], k))


def policy_controller(policy: MlpPolicy, behavior=None, mode: str = "sample",
                      rng: Optional[np.random.Generator] = None):
    """Game controller that feeds the observation (plus fixed behavior) to the policy."""
    if (behavior is None) != (policy.behavior_dim == 0):
        raise ContractError(f"{policy.mode} policy {'needs' if policy.behavior_dim else 'takes no'} behavior input")
    extra = None if behavior is None else np.asarray(behavior, dtype=float)

    def control(state) -> int:
        x = observe(state)
        if extra is not None:
            x = np.concatenate([x, extra])
        return choose(policy.forward(x), mode, rng)
    return control


def play(policy: MlpPolicy, cfg: EnvConfig, episodes: int, seed: int, behavior=None,
         mode: str = "sample") -> List[EpisodeResult]:
    """Run ``episodes`` games; game i uses env seed derived from (seed, i) and its own action stream."""
    results = []
    for i in range(episodes):
        ss = np.random.SeedSequence([seed, i])
        env_seed, act_seed = ss.generate_state(2)
        rng = np.random.default_rng(act_seed)
        results.append(run_episode(policy_controller(policy, behavior, mode, rng), cfg, int(env_seed)))
    return results


@dataclass
class MethodSummary:
    method: str
    wins: int
    games: int
    estimate: BehaviorEstimate
    count_mean: np.ndarray
    count_std: np.ndarray


def summarize(method: str, results: Sequence[EpisodeResult], demoset: DemoSet, pca: PcaModel,
              cents: Mapping[int, Sequence[float]], descs=None) -> MethodSummary:
    est = localize(mean_behavior(results), demoset, pca, descs)
    est.centroid_distances = centroid_distances(est.coords, cents)
    counts = np.array([r.produced_counts for r in results], dtype=float)
    std = counts.std(axis=0, ddof=1) if len(counts) > 1 else np.zeros(counts.shape[1])
    return MethodSummary(method, sum(r.outcome == "win" for r in results), len(results), est,
                         counts.mean(axis=0), std)


def summary_csv(rows: Sequence[MethodSummary], unit_names: Sequence[str], cluster_ids: Sequence[int]) -> str:
    """One row per method: wins, nearest demo, distance to each centroid and
    per-unit mean/std (sample std) of units produced."""
    buf = io.StringIO()
    buf.write(f"# format-version: {EVAL_FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    header = ["method", "wins", "games", "nearest_demo", "x", "y"]
    header += [f"dist_c{c}" for c in cluster_ids]
    for u in unit_names:
        header += [f"{u}_mean", f"{u}_std"]
    w.writerow(header)
    for r in rows:
        coords = list(r.estimate.coords) + [0.0] * max(0, 2 - len(r.estimate.coords))
        row = [r.method, r.wins, r.games, r.estimate.nearest_demo_id, f"{coords[0]:.6f}", f"{coords[1]:.6f}"]
        row += [f"{r.estimate.centroid_distances.get(c, float('nan')):.6f}" for c in cluster_ids]
        for m, s in zip(r.count_mean, r.count_std):
            row += [f"{m:.4f}", f"{s:.4f}"]
        w.writerow(row)
    return buf.getvalue()
