"""Classical (Torgerson) multidimensional scaling."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MdsEmbedding:
    coordinates: np.ndarray  # m x k
    eigenvalues: np.ndarray  # all eigenvalues of the centred Gram matrix, descending
    explained: float  # share of the positive spectrum captured by the first k axes


def classical_mds(D, k: int = 2, *, tol: float = 1e-9) -> MdsEmbedding:
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    m = D.shape[0]
    if k < 1:
        raise ValueError("k must be at least 1")
    if m == 0:
        raise ValueError("empty distance matrix")
    scale = max(1.0, float(np.abs(D).max()))
    if not np.allclose(D, D.T, rtol=0, atol=tol * scale):
        raise ValueError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(D)) > tol * scale):
        raise ValueError("distance matrix must have a zero diagonal")
    J = np.eye(m) - 1.0 / m
    B = -0.5 * J @ np.square(D) @ J
    vals, vecs = np.linalg.eigh((B + B.T) / 2)
    order = np.argsort(vals)[::-1]
    vals, vecs = vals[order], vecs[:, order]
    # fix eigenvector signs: largest-magnitude entry positive
    pivots = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[pivots, np.arange(m)])
    signs[signs == 0] = 1
    vecs = vecs * signs
    kk = min(k, m)
    pos = np.clip(vals, 0, None)
    coords = vecs[:, :kk] * np.sqrt(pos[:kk])
    if kk < k:
        coords = np.hstack([coords, np.zeros((m, k - kk))])
    total = pos.sum()
    explained = float(pos[:kk].sum() / total) if total > 0 else 1.0
    return MdsEmbedding(coords, vals, explained)
