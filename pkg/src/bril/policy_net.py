"""Feedforward softmax policy trained by minibatch SGD.

The same network class serves plain imitation (input = state) and
behavior-conditioned imitation (input = state followed by the behavior
coordinates).  ``behavior_dim`` records which one a network is.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .demo_store import atomic_write_text
from .errors import ContractError

HIDDEN = (256, 256, 256)
POLICY_FORMAT_VERSION = 1


@dataclass
class MlpPolicy:
    weights: List[np.ndarray]  # layer l maps width[l] -> width[l+1], stored (in, out)
    biases: List[np.ndarray]
    behavior_dim: int = 0

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ContractError("weights and biases must be non-empty lists of equal length")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if b.shape != (W.shape[1],):
                raise ContractError(f"layer {l}: bias shape {b.shape} does not match weights {W.shape}")
            if l and W.shape[0] != self.weights[l - 1].shape[1]:
                raise ContractError(f"layer {l}: input width {W.shape[0]} does not chain")

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def action_count(self) -> int:
        return self.weights[-1].shape[1]

    @property
    def state_dim(self) -> int:
        return self.input_dim - self.behavior_dim

    @property
    def mode(self) -> str:
        return "BRIL" if self.behavior_dim else "IL"

    @property
    def params(self) -> List[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def copy(self) -> "MlpPolicy":
        return MlpPolicy([W.copy() for W in self.weights], [b.copy() for b in self.biases], self.behavior_dim)

    def logits(self, X: np.ndarray) -> np.ndarray:
        h = X
        last = len(self.weights) - 1
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ W + b
            if l < last:
                h = np.maximum(h, 0.0)
        return h

    def forward_batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ContractError(f"expected inputs of width {self.input_dim}, got shape {X.shape}")
        return softmax(self.logits(X))

    def forward(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.input_dim,):
            raise ContractError(f"input length {x.shape} != input_dim {self.input_dim}")
        if not np.all(np.isfinite(x)):
            raise ContractError("input contains non-finite values")
        return softmax(self.logits(x[None, :]))[0]


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def init_policy(input_dim: int, action_count: int, seed: int, behavior_dim: int = 0,
                hidden: Sequence[int] = HIDDEN) -> MlpPolicy:
    if input_dim < 1 or action_count < 1:
        raise ContractError("input_dim and action_count must be >= 1")
    rng = np.random.default_rng(seed)
    widths = [input_dim, *hidden, action_count]
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpPolicy(weights, biases, behavior_dim)


# --- training ------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    epochs: int = 20
    seed: int = 0
    l2: float = 0.0

    def __post_init__(self):
        for name in ("learning_rate", "l2"):
            if not math.isfinite(getattr(self, name)):
                raise ContractError(f"{name} must be finite")
        if not 0 < self.learning_rate < 1:
            raise ContractError(f"learning_rate must be in (0, 1), got {self.learning_rate}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ContractError("batch_size and epochs must be >= 1")
        if self.l2 < 0:
            raise ContractError("l2 must be >= 0")


@dataclass
class TrainReport:
    epoch_losses: List[float] = field(default_factory=list)
    test_accuracy: float = 0.0
    test_loss: float = 0.0
    train_accuracy: float = 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# format-version: 1\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss"])
        for i, loss in enumerate(self.epoch_losses, start=1):
            w.writerow([i, repr(loss)])
        w.writerow(["test_accuracy", repr(self.test_accuracy)])
        w.writerow(["test_loss", repr(self.test_loss)])
        return buf.getvalue()


def as_arrays(rows) -> Tuple[np.ndarray, np.ndarray]:
    """Accept ``(X, y)`` arrays or a sequence of ``(input, action)`` pairs."""
    if isinstance(rows, tuple) and len(rows) == 2 and isinstance(rows[0], np.ndarray):
        X, y = rows
    else:
        rows = list(rows)
        if not rows:
            return np.zeros((0, 0)), np.zeros(0, dtype=np.int64)
        X = np.array([r[0] for r in rows], dtype=float)
        y = np.array([r[1] for r in rows], dtype=np.int64)
    return np.asarray(X, dtype=float), np.asarray(y, dtype=np.int64)


def loss_and_grads(policy: MlpPolicy, X: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean cross-entropy over the batch (plus ``l2/2 * sum W**2``) and its
    gradients, ordered like ``policy.params``."""
    acts = [X]
    h = X
    last = len(policy.weights) - 1
    for l, (W, b) in enumerate(zip(policy.weights, policy.biases)):
        h = h @ W + b
        if l < last:
            h = np.maximum(h, 0.0)
        acts.append(h)
    logits = acts[-1]
    z = logits - logits.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    n = len(X)
    logp = z[np.arange(n), y] - logsum
    loss = -logp.mean()
    if l2:
        loss += 0.5 * l2 * sum(float((W * W).sum()) for W in policy.weights)

    delta = np.exp(z - logsum[:, None])
    delta[np.arange(n), y] -= 1.0
    delta /= n
    grads = [None] * (2 * len(policy.weights))
    for l in range(last, -1, -1):
        W = policy.weights[l]
        gW = acts[l].T @ delta
        if l2:
            gW = gW + l2 * W
        grads[2 * l] = gW
        grads[2 * l + 1] = delta.sum(axis=0)
        if l:
            delta = (delta @ W.T) * (acts[l] > 0)
    return float(loss), grads


def evaluate(policy: MlpPolicy, X: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """(accuracy, mean cross-entropy); argmax ties resolve to the lowest index."""
    if len(X) == 0:
        return 0.0, 0.0
    logits = policy.logits(X)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    acc = float((logits.argmax(axis=1) == y).mean())
    return acc, float(-logp[np.arange(len(y)), y].mean())


def train(rows, cfg: TrainConfig, test_rows=None, behavior_dim: int = 0,
          policy: Optional[MlpPolicy] = None, action_count: Optional[int] = None):
    X, y = as_arrays(rows)
    if len(X) == 0:
        raise ContractError("train needs at least one row")
    if test_rows is not None:
        Xt, yt = as_arrays(test_rows)
        if len(Xt) and Xt.shape[1] != X.shape[1]:
            raise ContractError(f"test rows have width {Xt.shape[1]}, training rows {X.shape[1]}")
    else:
        Xt, yt = X[:0], y[:0]
    if policy is None:
        if action_count is None:
            action_count = int(y.max()) + 1
        policy = init_policy(X.shape[1], action_count, cfg.seed, behavior_dim)
    else:
        policy = policy.copy()
    if X.shape[1] != policy.input_dim:
        raise ContractError(f"rows have width {X.shape[1]}, policy expects {policy.input_dim}")
    if y.min() < 0 or y.max() >= policy.action_count:
        raise ContractError("action id outside the policy's action range")

    rng = np.random.default_rng([cfg.seed, 1])
    report = TrainReport()
    params = policy.params
    n = len(X)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = loss_and_grads(policy, X[idx], y[idx], cfg.l2)
            for p, g in zip(params, grads):
                p -= cfg.learning_rate * g
        report.epoch_losses.append(evaluate(policy, X, y)[1])
    report.train_accuracy = evaluate(policy, X, y)[0]
    report.test_accuracy, report.test_loss = evaluate(policy, Xt, yt)
    return policy, report


def gradient_check(policy: MlpPolicy, row, n_params: int = 200, step: float = 1e-5, seed: int = 0) -> float:
    """Max relative error between backprop and central differences over a random
    subsample of parameters."""
    x, a = row
    X = np.asarray(x, dtype=float)[None, :]
    y = np.array([int(a)])
    _, grads = loss_and_grads(policy, X, y)
    params = policy.params
    sizes = [p.size for p in params]
    total = sum(sizes)
    rng = np.random.default_rng(seed)
    picks = rng.choice(total, size=min(n_params, total), replace=False)
    offsets = np.cumsum([0] + sizes)
    worst = 0.0
    for flat in np.sort(picks):
        k = int(np.searchsorted(offsets, flat, side="right") - 1)
        p, g = params[k].reshape(-1), grads[k].reshape(-1)
        i = flat - offsets[k]
        orig = p[i]
        p[i] = orig + step
        up, _ = loss_and_grads(policy, X, y)
        p[i] = orig - step
        down, _ = loss_and_grads(policy, X, y)
        p[i] = orig
        num = (up - down) / (2 * step)
        ana = g[i]
        err = abs(ana - num) / max(abs(ana), abs(num), 1e-8)
        worst = max(worst, err)
    return worst


def act(policy: MlpPolicy, state, behavior=None, mode: str = "greedy",
        rng: Optional[np.random.Generator] = None) -> int:
    if (behavior is None) != (policy.behavior_dim == 0):
        raise ContractError(f"{policy.mode} policy {'needs' if policy.behavior_dim else 'takes no'} behavior input")
    x = np.asarray(state, dtype=float)
    if behavior is not None:
        x = np.concatenate([x, np.asarray(behavior, dtype=float)])
    probs = policy.forward(x)
    return choose(probs, mode, rng)


def choose(probs: np.ndarray, mode: str, rng: Optional[np.random.Generator]) -> int:
    if mode == "greedy":
        return int(np.argmax(probs))
    if mode == "sample":
        if rng is None:
            raise ContractError("sample mode needs a random generator")
        # inverse-CDF draw keeps one uniform per decision
        u = rng.random()
        idx = int(np.searchsorted(np.cumsum(probs), u * probs.sum(), side="right"))
        return min(idx, len(probs) - 1)
    raise ContractError(f"unknown action mode {mode!r}")


# --- serialization -----------------------------------------------------------------

def policy_to_dict(policy: MlpPolicy) -> dict:
    return {
        "format_version": POLICY_FORMAT_VERSION,
        "mode": policy.mode,
        "state_dim": policy.state_dim,
        "behavior_dim": policy.behavior_dim,
        "action_count": policy.action_count,
        "widths": [policy.input_dim] + [W.shape[1] for W in policy.weights],
        "layers": [
            {"rows": W.shape[0], "cols": W.shape[1], "weights": W.ravel().tolist(), "bias": b.tolist()}
            for W, b in zip(policy.weights, policy.biases)
        ],
    }


def policy_from_dict(d: dict) -> MlpPolicy:
    if d.get("format_version") != POLICY_FORMAT_VERSION:
        raise ContractError(f"unsupported policy format_version {d.get('format_version')!r}")
    weights = [np.array(L["weights"], dtype=float).reshape(L["rows"], L["cols"]) for L in d["layers"]]
    biases = [np.array(L["bias"], dtype=float) for L in d["layers"]]
    pol = MlpPolicy(weights, biases, int(d["behavior_dim"]))
    if pol.mode != d["mode"] or pol.state_dim != d["state_dim"]:
        raise ContractError("policy header disagrees with layer shapes")
    return pol


def save_policy(policy: MlpPolicy, path) -> None:
    atomic_write_text(path, json.dumps(policy_to_dict(policy), separators=(",", ":")) + "\n")


def load_policy(path) -> MlpPolicy:
    with open(path, encoding="utf-8") as fh:
        return policy_from_dict(json.load(fh))
