"""UCB1 over a discrete set of behavior options."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .errors import ContractError

SQRT2 = math.sqrt(2.0)


@dataclass
class BanditState:
    options: List[np.ndarray]
    C: float = SQRT2
    counts: List[int] = field(default=None)
    means: List[float] = field(default=None)
    t: int = 0

    def __post_init__(self):
        if not self.options:
            raise ContractError("bandit needs at least one option")
        if not (self.C >= 0 and math.isfinite(self.C)):
            raise ContractError(f"exploration constant must be finite and >= 0, got {self.C}")
        k = len(self.options)
        if self.counts is None:
            self.counts = [0] * k
        if self.means is None:
            self.means = [0.0] * k

    @property
    def k(self) -> int:
        return len(self.options)

    def scores(self) -> List[float]:
        """UCB1 index of every arm; +inf for arms never played."""
        out = []
        for n, m in zip(self.counts, self.means):
            if n == 0:
                out.append(math.inf)
            else:
                out.append(m + self.C * math.sqrt(2.0 * math.log(self.t) / n))
        return out


def select(b: BanditState) -> int:
    for j, n in enumerate(b.counts):
        if n == 0:
            return j
    s = b.scores()
    best = max(s)
    return s.index(best)


def update(b: BanditState, j: int, ret: float) -> BanditState:
    if not 0 <= j < b.k:
        raise ContractError(f"option index {j} outside 0..{b.k - 1}")
    if not 0.0 <= ret <= 1.0:
        raise ContractError(f"return must be in [0, 1], got {ret}")
    b.counts[j] += 1
    b.t += 1
    b.means[j] += (ret - b.means[j]) / b.counts[j]
    return b


@dataclass
class AdaptationLog:
    options: List[np.ndarray]
    rows: List[tuple] = field(default_factory=list)  # (episode, option, return, means snapshot)

    def plays(self) -> List[int]:
        out = [0] * len(self.options)
        for _, j, _, _ in self.rows:
            out[j] += 1
        return out

    def wins(self) -> List[int]:
        out = [0] * len(self.options)
        for _, j, r, _ in self.rows:
            out[j] += int(r)
        return out

    @property
    def total_wins(self) -> int:
        return sum(self.wins())

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# format-version: 1\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["episode", "option", "return"] + [f"mean_{j}" for j in range(len(self.options))])
        for ep, j, r, means in self.rows:
            w.writerow([ep, j, r] + [f"{m:.6f}" for m in means])
        return buf.getvalue()


def run_bandit(b: BanditState, pull, episodes: int) -> AdaptationLog:
    """Generic loop: ``pull(j, episode)`` returns a reward in [0, 1]."""
    log = AdaptationLog([np.asarray(o) for o in b.options])
    for ep in range(episodes):
        j = select(b)
        r = pull(j, ep)
        update(b, j, r)
        log.rows.append((ep, j, r, list(b.means)))
    return log


def run_adaptation(policy, options: Sequence[Sequence[float]], episodes: int, cfg, C: float = SQRT2,
                   seed: int = 0, mode: str = "sample") -> AdaptationLog:
    """Pick a behavior option per game with UCB1; return 1 for a win, 0 otherwise."""
    from .evaluation import policy_controller
    from .microbuild_env import run_episode

    if policy.behavior_dim == 0:
        raise ContractError("adaptation needs a behavior-conditioned policy")
    opts = [np.asarray(o, dtype=float) for o in options]
    for o in opts:
        if o.shape != (policy.behavior_dim,):
            raise ContractError(f"option {o} does not match behavior_dim {policy.behavior_dim}")
    b = BanditState(opts, C)

    def pull(j, ep):
        ss = np.random.SeedSequence([seed, ep])
        env_seed, act_seed = ss.generate_state(2)
        rng = np.random.default_rng(act_seed)
        res = run_episode(policy_controller(policy, opts[j], mode, rng), cfg, int(env_seed))
        return 1 if res.outcome == "win" else 0

    return run_bandit(b, pull, episodes)
