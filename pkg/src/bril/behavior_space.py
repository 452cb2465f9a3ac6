"""Unit-ratio behavioral descriptors and PCA reduction.

Descriptors are standardized per dimension (sample mean/std, zero-variance
dimensions get std 1), the covariance of the standardized data is
diagonalised with cyclic Jacobi rotations, and the top ``p`` eigenvectors
form the projection.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .demo_store import Demonstration, atomic_write_text
from .errors import ContractError

PCA_FORMAT_VERSION = 1


def compute_descriptor(demo: Demonstration) -> np.ndarray:
    return ratios(demo.unit_counts)


def ratios(counts: Sequence[float]) -> np.ndarray:
    """Counts normalised to sum to 1; an all-zero tally stays all zero."""
    c = np.asarray(counts, dtype=float)
    total = c.sum()
    if total <= 0:
        return np.zeros_like(c)
    return c / total


def descriptors(demoset) -> np.ndarray:
    return np.array([compute_descriptor(d) for d in demoset.demos], dtype=float).reshape(
        len(demoset), demoset.schema.n_units)


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    std: np.ndarray
    components: np.ndarray  # p x n, rows are unit eigenvectors
    eigenvalues: np.ndarray  # p, descending
    spectrum: np.ndarray  # all n eigenvalues, descending

    @property
    def n(self) -> int:
        return self.components.shape[1]

    @property
    def p(self) -> int:
        return self.components.shape[0]

    def to_dict(self) -> dict:
        return {
            "format_version": PCA_FORMAT_VERSION,
            "n": self.n,
            "p": self.p,
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "spectrum": self.spectrum.tolist(),
            "components": self.components.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PcaModel":
        if d.get("format_version") != PCA_FORMAT_VERSION:
            raise ContractError(f"unsupported PCA format_version {d.get('format_version')!r}")
        n, p = int(d["n"]), int(d["p"])
        return cls(
            mean=np.array(d["mean"], dtype=float),
            std=np.array(d["std"], dtype=float),
            components=np.array(d["components"], dtype=float).reshape(p, n),
            eigenvalues=np.array(d["eigenvalues"], dtype=float),
            spectrum=np.array(d["spectrum"], dtype=float),
        )


def save_pca(model: PcaModel, path) -> None:
    atomic_write_text(path, json.dumps(model.to_dict(), indent=1) + "\n")


def load_pca(path) -> PcaModel:
    with open(path, encoding="utf-8") as fh:
        return PcaModel.from_dict(json.load(fh))


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def fit_pca(descs, p: int = 2, tol: float = 1e-12) -> PcaModel:
    X = np.asarray(descs, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise ContractError("fit_pca needs at least 2 descriptors")
    n = X.shape[1]
    if not 1 <= p <= n:
        raise ContractError(f"p must be in 1..{n}, got {p}")
    mean = X.mean(axis=0)
    std = X.std(axis=0, ddof=1)
    std[std == 0] = 1.0
    Z = (X - mean) / std
    cov = Z.T @ Z / (len(X) - 1)
    cov = (cov + cov.T) / 2
    w, V = kernels.jacobi_eigh(cov, tol=tol)
    # stable sort: equal eigenvalues keep their Jacobi column order
    order = np.argsort(-w, kind="stable")
    w = w[order]
    comps = np.array([_canonical_sign(V[:, i]) for i in order])
    return PcaModel(mean=mean, std=std, components=comps[:p].copy(), eigenvalues=w[:p].copy(), spectrum=w)


def project(model: PcaModel, d) -> np.ndarray:
    """Coordinates of one descriptor (1-D input) or of each row (2-D input)."""
    d = np.asarray(d, dtype=float)
    if d.shape[-1] != model.n:
        raise ContractError(f"descriptor length {d.shape[-1]} != model dimension {model.n}")
    z = (d - model.mean) / model.std
    return z @ model.components.T


def unproject(model: PcaModel, coords) -> np.ndarray:
    return np.asarray(coords, dtype=float) @ model.components * model.std + model.mean


def explained_variance(model: PcaModel) -> np.ndarray:
    # equals eigenvalue / n unless some dimension had zero variance
    total = model.spectrum.sum()
    if total <= 0:
        return np.zeros(model.p)
    return model.eigenvalues / total
