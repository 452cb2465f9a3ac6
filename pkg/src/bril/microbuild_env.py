"""MicroBuild: a small deterministic build-order game.

The player manages an economy (workers, barracks) and trains combat units
from five types with an asymmetric counter matrix.  A scripted opponent
builds its own army and attacks in waves.  Physics are deterministic; the
only randomness is the opponent's per-game plan (drawn at reset) and the
epsilon-noise of scripted demonstrators.

Action ids::

    0           wait
    1           train worker
    2           build barracks
    3 .. 3+K-1  train combat unit k
    3+K         attack with the whole army
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .demo_store import Demonstration, DemoSet, Schema
from .errors import ContractError


@dataclass(frozen=True)
class UnitType:
    name: str
    cost: int
    attack: float
    hp: float
    build_ticks: int
    # damage multiplier against each unit type, indexed like EnvConfig.unit_types
    counters: Tuple[float, ...]


DEFAULT_UNITS = (
    UnitType("rifle", 50, 1.0, 10.0, 3, (1.0, 0.6, 0.5, 1.0, 1.5)),
    UnitType("brute", 100, 2.0, 22.0, 4, (1.6, 1.0, 1.0, 0.8, 0.3)),
    UnitType("raider", 75, 1.5, 14.0, 3, (1.8, 1.0, 1.0, 0.6, 0.3)),
    UnitType("siege", 150, 3.2, 26.0, 5, (1.6, 1.5, 2.2, 1.0, 0.2)),
    UnitType("flyer", 125, 2.4, 20.0, 4, (0.8, 1.4, 1.4, 2.0, 1.0)),
)


@dataclass(frozen=True)
class OpponentSpec:
    composition: Tuple[float, ...]
    income: int
    first_attack: int
    wave_interval: int
    # uniform jitter applied per game to income (fraction) and attack timing (ticks)
    income_jitter: float = 0.1
    timing_jitter: int = 6


OPPONENTS: Dict[str, OpponentSpec] = {
    "horde": OpponentSpec((0.0, 0.0, 1.0, 0.0, 0.0), 15, 55, 25),
    "bruiser": OpponentSpec((0.0, 1.0, 0.0, 0.0, 0.0), 15, 55, 25),
    "skies": OpponentSpec((0.0, 0.0, 0.0, 0.0, 1.0), 15, 55, 25),
}


@dataclass(frozen=True)
class EnvConfig:
    unit_types: Tuple[UnitType, ...] = DEFAULT_UNITS
    worker_cost: int = 50
    worker_ticks: int = 3
    structure_costs: Dict[str, int] = field(default_factory=lambda: {"barracks": 150})
    barracks_ticks: int = 6
    income_per_worker: int = 3
    max_workers: int = 16
    start_workers: int = 6
    start_minerals: int = 50
    max_ticks: int = 150
    opponent_archetype: str = "horde"
    base_hp: float = 100.0
    raid_factor: float = 4.0

    def __post_init__(self):
        k = len(self.unit_types)
        if self.max_ticks < 1:
            raise ContractError(f"max_ticks must be >= 1, got {self.max_ticks}")
        if k < 1:
            raise ContractError("at least one unit type required")
        for u in self.unit_types:
            if len(u.counters) != k or min(u.counters) <= 0:
                raise ContractError(f"counter row of {u.name!r} must have {k} positive entries")
            if u.cost <= 0 or u.build_ticks < 1 or u.hp <= 0 or u.attack <= 0:
                raise ContractError(f"unit {u.name!r} has non-positive stats")
        if self.worker_cost <= 0 or min(self.structure_costs.values()) <= 0:
            raise ContractError("all costs must be positive")
        if self.opponent_archetype not in OPPONENTS:
            raise ContractError(f"unknown opponent archetype {self.opponent_archetype!r}")

    @property
    def n_units(self) -> int:
        return len(self.unit_types)

    @property
    def unit_names(self) -> List[str]:
        return [u.name for u in self.unit_types]

    @property
    def action_count(self) -> int:
        return self.n_units + 4

    @property
    def attack_action(self) -> int:
        return self.n_units + 3

    @property
    def state_dim(self) -> int:
        k = self.n_units
        # economy 5, own units k, produced so far k, in-progress 2*(k+2), enemy tally k, time 1, hp 2
        return 5 + 2 * k + 2 * (k + 2) + k + 3

    def schema(self) -> Schema:
        return Schema(self.state_dim, self.action_count, tuple(self.unit_names))

    def to_dict(self) -> dict:
        return {
            "format_version": 1,
            "unit_types": [
                {"name": u.name, "cost": u.cost, "attack": u.attack, "hp": u.hp,
                 "build_ticks": u.build_ticks, "counters": list(u.counters)}
                for u in self.unit_types
            ],
            "worker_cost": self.worker_cost,
            "worker_ticks": self.worker_ticks,
            "structure_costs": dict(self.structure_costs),
            "barracks_ticks": self.barracks_ticks,
            "income_per_worker": self.income_per_worker,
            "max_workers": self.max_workers,
            "start_workers": self.start_workers,
            "start_minerals": self.start_minerals,
            "max_ticks": self.max_ticks,
            "opponent_archetype": self.opponent_archetype,
            "base_hp": self.base_hp,
            "raid_factor": self.raid_factor,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EnvConfig":
        d = dict(d)
        d.pop("format_version", None)
        if "unit_types" in d:
            d["unit_types"] = tuple(
                UnitType(u["name"], int(u["cost"]), float(u["attack"]), float(u["hp"]),
                         int(u["build_ticks"]), tuple(float(c) for c in u["counters"]))
                for u in d["unit_types"]
            )
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ContractError(f"unknown env config fields: {sorted(unknown)}")
        return cls(**d)


def load_env_config(path) -> EnvConfig:
    with open(path, encoding="utf-8") as fh:
        return EnvConfig.from_dict(json.load(fh))


def save_env_config(cfg: EnvConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


# production queue entries: (kind, remaining ticks); kind -2 worker, -1 barracks, k >= 0 unit
WORKER, BARRACKS = -2, -1


@dataclass(frozen=True)
class GameState:
    tick: int
    minerals: int
    workers: int
    barracks: int
    units: Tuple[int, ...]
    queue: Tuple[Tuple[int, int], ...]
    enemy_units: Tuple[int, ...]
    enemy_minerals: int
    enemy_observed: Tuple[int, ...]
    own_hp: float
    enemy_hp: float
    # opponent plan drawn at reset
    enemy_income: int
    attack_ticks: Tuple[int, ...]
    produced: Tuple[int, ...]
    cfg: EnvConfig = field(repr=False, compare=False)


@dataclass
class EpisodeResult:
    outcome: str
    produced_counts: Tuple[int, ...]
    trace: List[Tuple[np.ndarray, int]]
    ticks: int = 0


def reset(cfg: EnvConfig, seed: int) -> GameState:
    if cfg.max_ticks < 1:
        raise ContractError("max_ticks must be >= 1")
    opp = OPPONENTS[cfg.opponent_archetype]
    rng = np.random.default_rng([seed, 0x0E11])
    income = int(round(opp.income * (1.0 + rng.uniform(-opp.income_jitter, opp.income_jitter))))
    first = opp.first_attack + int(rng.integers(-opp.timing_jitter, opp.timing_jitter + 1))
    ticks = []
    t = first
    while t < cfg.max_ticks:
        ticks.append(t)
        t += opp.wave_interval + int(rng.integers(-opp.timing_jitter, opp.timing_jitter + 1))
    k = cfg.n_units
    zeros = (0,) * k
    return GameState(
        tick=0,
        minerals=cfg.start_minerals,
        workers=cfg.start_workers,
        barracks=0,
        units=zeros,
        queue=(),
        enemy_units=zeros,
        enemy_minerals=0,
        enemy_observed=zeros,
        own_hp=cfg.base_hp,
        enemy_hp=cfg.base_hp,
        enemy_income=income,
        attack_ticks=tuple(ticks),
        produced=zeros,
        cfg=cfg,
    )


def _army_power(cfg: EnvConfig, x: Sequence[int], y: Sequence[int]) -> float:
    """Damage per tick army ``x`` deals to army ``y`` (composition-weighted counters)."""
    ny = sum(y)
    if ny == 0:
        return sum(c * u.attack for c, u in zip(x, cfg.unit_types))
    total = 0.0
    for c, u in zip(x, cfg.unit_types):
        if c:
            mult = sum(m * cy for m, cy in zip(u.counters, y)) / ny
            total += c * u.attack * mult
    return total


def _army_hp(cfg: EnvConfig, x: Sequence[int]) -> float:
    return sum(c * u.hp for c, u in zip(x, cfg.unit_types))


def resolve_combat(cfg: EnvConfig, att: Sequence[int], dfn: Sequence[int]):
    """Deterministic square-law battle.  Returns (attacker survivors, defender survivors)."""
    k = len(att)
    if sum(dfn) == 0:
        return tuple(att), (0,) * k
    if sum(att) == 0:
        return (0,) * k, tuple(dfn)
    dps_a = _army_power(cfg, att, dfn)
    dps_d = _army_power(cfg, dfn, att)
    t_a = _army_hp(cfg, dfn) / dps_a  # ticks for attacker to destroy defender
    t_d = _army_hp(cfg, att) / dps_d
    if t_a == t_d:
        return (0,) * k, (0,) * k
    if t_a < t_d:
        frac = math.sqrt(1.0 - (t_a / t_d) ** 2)
        return tuple(int(math.floor(c * frac + 0.5)) for c in att), (0,) * k
    frac = math.sqrt(1.0 - (t_d / t_a) ** 2)
    return (0,) * k, tuple(int(math.floor(c * frac + 0.5)) for c in dfn)


def _raid_damage(cfg: EnvConfig, survivors: Sequence[int]) -> float:
    return cfg.raid_factor * sum(c * u.attack for c, u in zip(survivors, cfg.unit_types))


def _opponent_build(cfg: EnvConfig, units: Tuple[int, ...], minerals: int, comp) -> Tuple[Tuple[int, ...], int]:
    units = list(units)
    while True:
        j = next_unit(comp, units)
        cost = cfg.unit_types[j].cost
        if minerals < cost:
            break
        minerals -= cost
        units[j] += 1
    return tuple(units), minerals


def next_unit(ratios: Sequence[float], counts: Sequence[int]) -> int:
    """Unit type with the largest deficit against the target ratios (lowest index on ties)."""
    total = sum(counts) + 1
    best, best_gap = 0, -math.inf
    for i, (r, c) in enumerate(zip(ratios, counts)):
        if r <= 0:
            continue
        gap = r * total - c
        if gap > best_gap:
            best, best_gap = i, gap
    return best


def step(state: GameState, action: int) -> Tuple[GameState, bool, Optional[str]]:
    cfg = state.cfg
    if not isinstance(action, (int, np.integer)) or not 0 <= action < cfg.action_count:
        raise ContractError(f"malformed action id {action!r}; expected 0..{cfg.action_count - 1}")
    if state.tick >= cfg.max_ticks or state.own_hp <= 0 or state.enemy_hp <= 0:
        raise ContractError("step called on a finished episode")
    action = int(action)
    k = cfg.n_units
    minerals = state.minerals
    workers = state.workers
    barracks = state.barracks
    units = list(state.units)
    queue = list(state.queue)
    enemy_units = state.enemy_units
    enemy_observed = list(state.enemy_observed)
    enemy_hp = state.enemy_hp
    own_hp = state.own_hp
    produced = list(state.produced)

    busy_barracks = sum(1 for kind, _ in queue if kind >= 0)
    worker_busy = any(kind == WORKER for kind, _ in queue)

    if action == 1:
        if not worker_busy and minerals >= cfg.worker_cost:
            minerals -= cfg.worker_cost
            queue.append((WORKER, cfg.worker_ticks))
    elif action == 2:
        cost = cfg.structure_costs["barracks"]
        if minerals >= cost:
            minerals -= cost
            queue.append((BARRACKS, cfg.barracks_ticks))
    elif 3 <= action < 3 + k:
        u = action - 3
        ut = cfg.unit_types[u]
        if busy_barracks < barracks and minerals >= ut.cost:
            minerals -= ut.cost
            queue.append((u, ut.build_ticks))
            produced[u] += 1
    elif action == cfg.attack_action and sum(units) > 0:
        enemy_observed = [max(a, b) for a, b in zip(enemy_observed, enemy_units)]
        att, dfn = resolve_combat(cfg, units, enemy_units)
        units = list(att)
        enemy_units = dfn
        enemy_hp -= _raid_damage(cfg, att)

    minerals += min(workers, cfg.max_workers) * cfg.income_per_worker

    remaining = []
    for kind, left in queue:
        left -= 1
        if left > 0:
            remaining.append((kind, left))
        elif kind == WORKER:
            workers += 1
        elif kind == BARRACKS:
            barracks += 1
        else:
            units[kind] += 1
    queue = remaining

    opp = OPPONENTS[cfg.opponent_archetype]
    enemy_minerals = state.enemy_minerals + state.enemy_income
    enemy_units, enemy_minerals = _opponent_build(cfg, enemy_units, enemy_minerals, opp.composition)
    if state.tick in state.attack_ticks and sum(enemy_units) > 0 and enemy_hp > 0:
        enemy_observed = [max(a, b) for a, b in zip(enemy_observed, enemy_units)]
        att, dfn = resolve_combat(cfg, enemy_units, units)
        enemy_units = att
        units = list(dfn)
        own_hp -= _raid_damage(cfg, att)

    tick = state.tick + 1
    outcome = None
    if enemy_hp <= 0:
        outcome = "win"
    elif own_hp <= 0 or tick >= cfg.max_ticks:
        outcome = "loss"
    new = replace(
        state,
        tick=tick,
        minerals=minerals,
        workers=workers,
        barracks=barracks,
        units=tuple(units),
        queue=tuple(queue),
        enemy_units=tuple(enemy_units),
        enemy_minerals=enemy_minerals,
        enemy_observed=tuple(enemy_observed),
        own_hp=own_hp,
        enemy_hp=enemy_hp,
        produced=tuple(produced),
    )
    return new, outcome is not None, outcome


def observe(state: GameState) -> np.ndarray:
    """Scaled observation vector; every entry is a non-negative count/fraction divided by a fixed scale."""
    cfg = state.cfg
    k = cfg.n_units
    obs = np.zeros(cfg.state_dim)
    supply = state.workers + sum(state.units)
    busy = sum(1 for kind, _ in state.queue if kind >= 0)
    obs[0] = min(state.minerals, 1000) / 100.0
    obs[1] = state.workers / 10.0
    obs[2] = supply / 20.0
    obs[3] = state.barracks / 2.0
    obs[4] = (state.barracks - busy) / 2.0
    obs[5:5 + k] = np.asarray(state.units) / 10.0
    obs[5 + k:5 + 2 * k] = np.asarray(state.produced) / 10.0
    base = 5 + 2 * k
    # per producible kind (worker, barracks, units): in-progress count and completion of the most advanced item
    totals = [cfg.worker_ticks, cfg.barracks_ticks] + [u.build_ticks for u in cfg.unit_types]
    for kind, left in state.queue:
        slot = kind + 2
        obs[base + 2 * slot] += 1.0
        frac = 1.0 - left / totals[slot]
        obs[base + 2 * slot + 1] = max(obs[base + 2 * slot + 1], frac)
    base += 2 * (k + 2)
    obs[base:base + k] = np.asarray(state.enemy_observed) / 10.0
    base += k
    obs[base] = state.tick / cfg.max_ticks
    obs[base + 1] = max(state.own_hp, 0.0) / cfg.base_hp
    obs[base + 2] = max(state.enemy_hp, 0.0) / cfg.base_hp
    return obs


Controller = Callable[[GameState], int]


def run_episode(controller: Controller, cfg: EnvConfig, seed: int) -> EpisodeResult:
    state = reset(cfg, seed)
    trace = []
    done, outcome = False, None
    while not done:
        action = int(controller(state))
        trace.append((observe(state), action))
        state, done, outcome = step(state, action)
    return EpisodeResult(outcome, state.produced, trace, state.tick)


# --- scripted demonstrators -------------------------------------------------------------

@dataclass(frozen=True)
class Archetype:
    name: str
    composition: Tuple[float, ...]
    worker_target: int = 10
    barracks_target: int = 2
    attack_size: int = 8


ARCHETYPES: Dict[str, Archetype] = {
    "rush": Archetype("rush", (1.0, 0.0, 0.0, 0.0, 0.0), attack_size=8),
    "mix": Archetype("mix", (0.5, 0.0, 0.5, 0.0, 0.0), attack_size=8),
    "siege": Archetype("siege", (0.25, 0.0, 0.0, 0.75, 0.0), attack_size=8),
    "air": Archetype("air", (0.0, 0.0, 0.0, 0.0, 1.0), attack_size=8),
    "economic": Archetype("economic", (0.0,) * 5, worker_target=16, barracks_target=0, attack_size=0),
}


def scripted_action(arch: Archetype, state: GameState) -> int:
    cfg = state.cfg
    army = sum(state.units)
    has_army = sum(arch.composition) > 0
    if has_army and army >= arch.attack_size:
        return cfg.attack_action
    queued_workers = sum(1 for kind, _ in state.queue if kind == WORKER)
    if state.workers + queued_workers < arch.worker_target:
        if queued_workers == 0:
            return 1 if state.minerals >= cfg.worker_cost else 0
    queued_barracks = sum(1 for kind, _ in state.queue if kind == BARRACKS)
    if state.barracks + queued_barracks < arch.barracks_target:
        return 2 if state.minerals >= cfg.structure_costs["barracks"] else 0
    if not has_army:
        return 0
    busy = sum(1 for kind, _ in state.queue if kind >= 0)
    if busy < state.barracks:
        pending = list(state.units)
        for kind, _ in state.queue:
            if kind >= 0:
                pending[kind] += 1
        u = next_unit(arch.composition, pending)
        if state.minerals >= cfg.unit_types[u].cost:
            return 3 + u
    return 0


def scripted_controller(arch: Archetype, noise: float, rng: np.random.Generator) -> Controller:
    def control(state: GameState) -> int:
        a = scripted_action(arch, state)
        if noise > 0 and rng.random() < noise:
            a = int(rng.integers(state.cfg.action_count))
        return a
    return control


def generate_demoset(archetypes: Sequence[Tuple[str, int]], cfg: EnvConfig, noise: float, seed: int) -> DemoSet:
    if not 0.0 <= noise <= 1.0:
        raise ContractError(f"noise must be in [0, 1], got {noise}")
    for name, count in archetypes:
        if name not in ARCHETYPES:
            raise ContractError(f"unknown archetype {name!r}; known: {sorted(ARCHETYPES)}")
        if count < 1:
            raise ContractError(f"archetype count must be >= 1, got {count} for {name!r}")
    demos = []
    for ai, (name, count) in enumerate(archetypes):
        arch = ARCHETYPES[name]
        for i in range(count):
            rng = np.random.default_rng([seed, ai, i])
            ep_seed = int(rng.integers(2**31))
            res = run_episode(scripted_controller(arch, noise, rng), cfg, ep_seed)
            demos.append(Demonstration(
                id=f"{name}-{i:05d}",
                pairs=[(s, a) for s, a in res.trace],
                unit_counts=tuple(res.produced_counts),
                outcome=res.outcome,
                meta={"archetype": name, "episode_seed": str(ep_seed)},
            ))
    return DemoSet(demos, cfg.schema())
