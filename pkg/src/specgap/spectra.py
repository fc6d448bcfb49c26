"""Dense and iterative Hermitian eigensolvers returning a common result record."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import ResourceError, SparseOperator

DENSE_LIMIT = 4096
DEFAULT_SEED = 1234


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    residuals: np.ndarray | None = None
    label: str | None = None
    vectors: np.ndarray | None = field(default=None, repr=False)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        order = np.argsort(self.eigenvalues, kind="stable")
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=float)[order]
        if self.residuals is not None:
            self.residuals = np.asarray(self.residuals, dtype=float)[order]
        if self.vectors is not None:
            self.vectors = self.vectors[:, order]

    @property
    def ground(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def gap(self) -> float:
        if len(self.eigenvalues) < 2:
            return float("inf")
        return float(self.eigenvalues[1] - self.eigenvalues[0])

    def to_json(self) -> str:
        return json.dumps({
            "eigenvalues": self.eigenvalues.tolist(),
            "residuals": None if self.residuals is None else self.residuals.tolist(),
            "meta": {**self.meta, "label": self.label},
        })


def _as_matrix(op):
    if isinstance(op, SparseOperator):
        return op.matrix
    return op


def diagonalize_dense(op, label=None, vectors: bool = False) -> SpectrumResult:
    m = _as_matrix(op)
    n = m.shape[0]
    if n > DENSE_LIMIT:
        raise ResourceError(f"dense diagonalization limited to dimension {DENSE_LIMIT}, got {n}")
    a = m.toarray() if sp.issparse(m) else np.asarray(m)
    if np.iscomplexobj(a) and not np.any(a.imag):
        a = a.real
    w, v = np.linalg.eigh(a)
    # residual through the sparse form: dense products are slow on one core
    res = np.linalg.norm(sp.csr_matrix(a) @ v - v * w, axis=0)
    return SpectrumResult(w, res, label, v if vectors else None, {"method": "dense"})


def lowest_k(op, k: int = 1, seed: int = DEFAULT_SEED, label=None, tol: float = 1e-12,
             maxiter: int | None = None) -> SpectrumResult:
    """``k`` smallest eigenvalues; Lanczos with a seeded start vector, dense for small problems."""
    m = _as_matrix(op)
    n = m.shape[0]
    if n <= max(64, 2 * k + 2):
        r = diagonalize_dense(m, label)
        return SpectrumResult(r.eigenvalues[:k], r.residuals[:k], label, meta={"method": "dense"})
    m = sp.csr_matrix(m)
    if not np.any(m.data.imag):
        m = m.real
    v0 = np.random.default_rng(seed).standard_normal(n)
    w, v = spla.eigsh(m, k=k, which="SA", v0=v0, tol=tol, maxiter=maxiter)
    res = np.linalg.norm(m @ v - v * w, axis=0)
    return SpectrumResult(w, res, label, meta={"method": "lanczos", "seed": seed})


def block_resolved(blocks, lowest: int | None = None) -> list[SpectrumResult]:
    """Diagonalize each ``(label, operator)`` block independently."""
    out = []
    for label, op in blocks:
        if lowest is None or _as_matrix(op).shape[0] <= DENSE_LIMIT:
            r = diagonalize_dense(op, label)
            if lowest is not None:
                r = SpectrumResult(r.eigenvalues[:lowest], r.residuals[:lowest], label, meta=r.meta)
        else:
            r = lowest_k(op, lowest, label=label)
        out.append(r)
    return out


def merged_eigenvalues(results) -> np.ndarray:
    return np.sort(np.concatenate([r.eigenvalues for r in results]))
