"""Demonstration data model, JSON-lines storage and per-cluster splitting.

File layout (UTF-8, one JSON object per line, keys sorted)::

    {"action_count": 9, "format_version": 1, "record": "schema", "state_dim": 37, "unit_types": [...]}
    {"actions": [...], "id": "...", "meta": {...}, "outcome": "win", "record": "demo",
     "states": [[...], ...], "unit_counts": [...]}
    ...

``states[t]`` and ``actions[t]`` form the t-th state-action pair.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ContractError

FORMAT_VERSION = 1
OUTCOMES = ("win", "loss")


class DemoFormatError(ValueError):
    """Malformed demonstration record; ``line`` is 1-based."""

    def __init__(self, msg: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class Schema:
    state_dim: int
    action_count: int
    unit_types: Tuple[str, ...]

    @property
    def n_units(self) -> int:
        return len(self.unit_types)


@dataclass
class Demonstration:
    id: str
    pairs: List[Tuple[np.ndarray, int]]
    unit_counts: Tuple[int, ...]
    outcome: str
    meta: Dict[str, str] = field(default_factory=dict)

    def __len__(self):
        return len(self.pairs)

    def states(self) -> np.ndarray:
        return np.array([s for s, _ in self.pairs], dtype=float)

    def actions(self) -> np.ndarray:
        return np.array([a for _, a in self.pairs], dtype=np.int64)

    def __eq__(self, other):
        if not isinstance(other, Demonstration):
            return NotImplemented
        return (
            self.id == other.id
            and self.outcome == other.outcome
            and tuple(self.unit_counts) == tuple(other.unit_counts)
            and self.meta == other.meta
            and len(self.pairs) == len(other.pairs)
            and all(a1 == a2 and np.array_equal(s1, s2)
                    for (s1, a1), (s2, a2) in zip(self.pairs, other.pairs))
        )


@dataclass
class DemoSet:
    demos: List[Demonstration]
    schema: Schema

    def __post_init__(self):
        self.validate()

    def __len__(self):
        return len(self.demos)

    def __iter__(self):
        return iter(self.demos)

    def __getitem__(self, i):
        return self.demos[i]

    def validate(self):
        seen = set()
        for d in self.demos:
            _check_demo(d, self.schema)
            if d.id in seen:
                raise SchemaError(f"duplicate demonstration id {d.id!r}")
            seen.add(d.id)

    def subset(self, indices: Sequence[int]) -> "DemoSet":
        return DemoSet([self.demos[i] for i in indices], self.schema)


def _check_demo(d: Demonstration, schema: Schema) -> None:
    if not d.pairs:
        raise SchemaError(f"demonstration {d.id!r} has no state-action pairs")
    if len(d.unit_counts) != schema.n_units:
        raise SchemaError(
            f"demonstration {d.id!r} has {len(d.unit_counts)} unit counts, schema has {schema.n_units}")
    if any(c < 0 for c in d.unit_counts):
        raise SchemaError(f"demonstration {d.id!r} has negative unit counts")
    if d.outcome not in OUTCOMES:
        raise SchemaError(f"demonstration {d.id!r} has outcome {d.outcome!r}")
    for s, a in d.pairs:
        if len(s) != schema.state_dim:
            raise SchemaError(
                f"demonstration {d.id!r}: state of length {len(s)}, schema state_dim {schema.state_dim}")
        if not 0 <= a < schema.action_count:
            raise SchemaError(f"demonstration {d.id!r}: action id {a} outside 0..{schema.action_count - 1}")


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"), allow_nan=False)


def _schema_record(schema: Schema) -> dict:
    return {
        "record": "schema",
        "format_version": FORMAT_VERSION,
        "state_dim": schema.state_dim,
        "action_count": schema.action_count,
        "unit_types": list(schema.unit_types),
    }


def _demo_record(d: Demonstration) -> dict:
    return {
        "record": "demo",
        "id": d.id,
        "outcome": d.outcome,
        "unit_counts": [int(c) for c in d.unit_counts],
        "meta": dict(d.meta),
        "states": [[float(v) for v in s] for s, _ in d.pairs],
        "actions": [int(a) for _, a in d.pairs],
    }


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_demoset(demoset: DemoSet, path) -> None:
    demoset.validate()
    lines = [_dumps(_schema_record(demoset.schema))]
    lines.extend(_dumps(_demo_record(d)) for d in demoset.demos)
    atomic_write_text(path, "\n".join(lines) + "\n")


def _parse_schema(rec: dict, lineno: int) -> Schema:
    if rec.get("record") != "schema":
        raise SchemaError(f"line {lineno}: expected schema header record")
    if rec.get("format_version") != FORMAT_VERSION:
        raise SchemaError(f"line {lineno}: unsupported format_version {rec.get('format_version')!r}")
    try:
        return Schema(int(rec["state_dim"]), int(rec["action_count"]), tuple(str(u) for u in rec["unit_types"]))
    except (KeyError, TypeError) as e:
        raise SchemaError(f"line {lineno}: incomplete schema record ({e})") from None


def _parse_demo(rec: dict, schema: Schema, lineno: int) -> Demonstration:
    if rec.get("record") == "schema":
        if _parse_schema(rec, lineno) != schema:
            raise SchemaError(f"line {lineno}: schema record disagrees with header")
        raise SchemaError(f"line {lineno}: repeated schema record")
    if rec.get("record") != "demo":
        raise DemoFormatError(f"unknown record type {rec.get('record')!r}", lineno)
    try:
        states, actions = rec["states"], rec["actions"]
        demo_id, outcome = rec["id"], rec["outcome"]
        counts = rec["unit_counts"]
    except KeyError as e:
        raise DemoFormatError(f"missing field {e}", lineno) from None
    if len(states) != len(actions):
        raise DemoFormatError("states and actions differ in length", lineno)
    if not actions:
        raise DemoFormatError("demonstration has no state-action pairs", lineno)
    for a in actions:
        if not isinstance(a, int) or not 0 <= a < schema.action_count:
            raise DemoFormatError(f"action id {a!r} outside 0..{schema.action_count - 1}", lineno)
    if len(counts) != schema.n_units:
        raise SchemaError(f"line {lineno}: {len(counts)} unit counts, schema has {schema.n_units}")
    for s in states:
        if len(s) != schema.state_dim:
            raise SchemaError(f"line {lineno}: state of length {len(s)}, schema state_dim {schema.state_dim}")
    if outcome not in OUTCOMES:
        raise DemoFormatError(f"outcome {outcome!r} not in {OUTCOMES}", lineno)
    return Demonstration(
        id=str(demo_id),
        pairs=[(np.asarray(s, dtype=float), int(a)) for s, a in zip(states, actions)],
        unit_counts=tuple(int(c) for c in counts),
        outcome=outcome,
        meta={str(k): str(v) for k, v in rec.get("meta", {}).items()},
    )


def load_demoset(path) -> DemoSet:
    schema = None
    demos = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise DemoFormatError(f"invalid JSON ({e.msg})", lineno) from None
            if not isinstance(rec, dict):
                raise DemoFormatError("record is not an object", lineno)
            if schema is None:
                schema = _parse_schema(rec, lineno)
            else:
                demos.append(_parse_demo(rec, schema, lineno))
    if schema is None:
        raise SchemaError(f"{path}: schema header record absent")
    return DemoSet(demos, schema)


@dataclass(frozen=True)
class SplitSpec:
    fractions: Tuple[float, float, float] = (0.6, 0.1, 0.3)
    seed: int = 0

    def __post_init__(self):
        if len(self.fractions) != 3 or any(f < 0 for f in self.fractions):
            raise ContractError(f"split fractions must be three non-negative numbers, got {self.fractions}")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ContractError(f"split fractions must sum to 1, got {sum(self.fractions)}")


def largest_remainder(n: int, fractions: Sequence[float]) -> List[int]:
    """Apportion ``n`` items by ``fractions``; leftover seats go to the largest
    remainders, lower index first on ties."""
    quotas = [n * f for f in fractions]
    sizes = [int(math.floor(q)) for q in quotas]
    left = n - sum(sizes)
    order = sorted(range(len(fractions)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in order[:left]:
        sizes[i] += 1
    return sizes


def split_per_cluster(demoset: DemoSet, labels: Sequence[int], spec: SplitSpec):
    """Return (train, val, test) DemoSets.  Each cluster label (noise included)
    is shuffled with a seeded generator and cut by largest-remainder sizes;
    demos keep their original relative order inside each split."""
    labels = list(labels)
    if len(labels) != len(demoset):
        raise ContractError(f"{len(labels)} labels for {len(demoset)} demonstrations")
    rng = np.random.default_rng(spec.seed)
    parts = [[], [], []]
    for lab in sorted(set(labels)):
        members = [i for i, l in enumerate(labels) if l == lab]
        members = [members[j] for j in rng.permutation(len(members))]
        sizes = largest_remainder(len(members), spec.fractions)
        start = 0
        for part, size in zip(parts, sizes):
            part.extend(members[start:start + size])
            start += size
    return tuple(demoset.subset(sorted(p)) for p in parts)


def flatten(demoset: DemoSet, behaviors: Optional[Sequence[Sequence[float]]] = None):
    """Stack all state-action pairs into ``(X, y)``; with ``behaviors`` each row is
    the state followed by its demonstration's behavior coordinates."""
    if behaviors is not None and len(behaviors) != len(demoset):
        raise ValueError(f"{len(behaviors)} behaviors for {len(demoset)} demonstrations")
    xs, ys = [], []
    for j, d in enumerate(demoset.demos):
        s = d.states()
        if behaviors is not None:
            b = np.asarray(behaviors[j], dtype=float)
            s = np.hstack([s, np.broadcast_to(b, (len(s), len(b)))])
        xs.append(s)
        ys.append(d.actions())
    if not xs:
        return np.zeros((0, demoset.schema.state_dim)), np.zeros(0, dtype=np.int64)
    return np.vstack(xs), np.concatenate(ys)
