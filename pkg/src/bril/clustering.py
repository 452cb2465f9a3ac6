"""DBSCAN over reduced descriptors, centroids and label CSV export."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Dict

import numpy as np

from . import kernels
from .demo_store import atomic_write_text
from .errors import ContractError

NOISE = -1
CSV_FORMAT_VERSION = 1


@dataclass(frozen=True)
class ClusterConfig:
    eps: float
    min_pts: int

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ContractError(f"eps must be finite and positive, got {self.eps}")
        if self.min_pts < 1:
            raise ContractError(f"min_pts must be >= 1, got {self.min_pts}")


def dbscan(points, cfg: ClusterConfig) -> np.ndarray:
    """Label each point with a cluster id (0, 1, ... by first core point in
    index order) or -1 for noise.  Border points join the first cluster that
    reaches them."""
    labels, _ = dbscan_with_cores(points, cfg)
    return labels


def dbscan_with_cores(points, cfg: ClusterConfig):
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim == 1:
        pts = pts[:, None]
    if len(pts) == 0:
        raise ContractError("dbscan needs at least one point")
    return kernels.dbscan_labels(pts, float(cfg.eps), int(cfg.min_pts))


def centroids(points, labels) -> Dict[int, np.ndarray]:
    pts = np.asarray(points, dtype=float)
    labels = np.asarray(labels)
    if len(pts) != len(labels):
        raise ContractError(f"{len(labels)} labels for {len(pts)} points")
    return {int(c): pts[labels == c].mean(axis=0) for c in np.unique(labels) if c != NOISE}


def cluster_sizes(labels) -> Dict[int, int]:
    labels = np.asarray(labels)
    return {int(c): int((labels == c).sum()) for c in np.unique(labels) if c != NOISE}


def labels_csv(points, labels) -> str:
    pts = np.asarray(points, dtype=float)
    buf = io.StringIO()
    buf.write(f"# format-version: {CSV_FORMAT_VERSION}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "x", "y", "label"])
    for i, (p, lab) in enumerate(zip(pts, labels)):
        y = repr(float(p[1])) if len(p) > 1 else "0.0"
        w.writerow([i, repr(float(p[0])), y, int(lab)])
    return buf.getvalue()


def save_labels_csv(points, labels, path) -> None:
    atomic_write_text(path, labels_csv(points, labels))


def read_labels_csv(path):
    """Returns (points as n x 2 array, labels).  Raises ValueError on malformed rows."""
    xs, labels = [], []
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        return np.zeros((0, 2)), np.zeros(0, dtype=np.int64)
    header, body = rows[0], rows[1:]
    if header != ["index", "x", "y", "label"]:
        raise ValueError(f"unexpected labels CSV header {header}")
    for lineno, r in enumerate(body, start=2):
        if len(r) != 4:
            raise ValueError(f"row {lineno}: expected 4 fields, got {len(r)}")
        try:
            xs.append((float(r[1]), float(r[2])))
            labels.append(int(r[3]))
        except ValueError:
            raise ValueError(f"row {lineno}: non-numeric field in {r}") from None
    return np.array(xs, dtype=float).reshape(-1, 2), np.array(labels, dtype=np.int64)
