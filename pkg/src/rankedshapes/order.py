"""
Orders and dispersion summaries on ranked tree shapes.

Distances are compared through exact integer keys (d1, or d2 squared), so
signs and ties never depend on floating-point rounding.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import FMatrix, balanced_fmatrix, enumerate_shapes, fmatrix_to_code, unbalanced_fmatrix, zigzag
from .frechet import _weighted_sample, as_fmatrix, frechet_mean_exact, frechet_mean_sa, TargetMatrix
from .metrics import DimensionError
from .models import kingman_mean

BEFORE, EQUAL, AFTER = -1, 0, 1
KINGMAN_EXACT_MAX_N = 10
KINGMAN_SA_SEED = 20230101


def _key(F1: FMatrix, F2: FMatrix, p: int) -> int:
    """Integer surrogate of d_p: d1 itself or d2 squared."""
    if F1.n != F2.n:
        raise DimensionError(f"leaf counts differ: {F1.n} vs {F2.n}")
    diff = F1.flat - F2.flat
    if p == 1:
        return int(np.abs(diff).sum())
    if p == 2:
        return int((diff * diff).sum())
    raise ValueError("p must be 1 or 2")


def _magnitude(key: int, p: int) -> float:
    return float(key) if p == 1 else math.sqrt(key)


def is_unbalanced_side(x: FMatrix, p: int = 2) -> bool:
    """True when ``d(x, T_unb) <= d(x, T_bal)``."""
    return _key(x, unbalanced_fmatrix(x.n), p) <= _key(x, balanced_fmatrix(x.n), p)


def signed_distance(x, ref, p: int = 2) -> float:
    """``-d(x, ref)`` on the unbalanced side, ``+d(x, ref)`` otherwise."""
    x, ref = as_fmatrix(x), as_fmatrix(ref)
    d = _magnitude(_key(x, ref, p), p)
    return -d if is_unbalanced_side(x, p) else d


def _signed_key(x: FMatrix, ref: FMatrix, p: int) -> int:
    k = _key(x, ref, p)
    return -k if is_unbalanced_side(x, p) else k


def lex_compare(F1, F2) -> int:
    """Compare column-vectorised F-matrices: ``F1`` comes first when the
    first non-zero entry of ``F1 - F2`` is positive."""
    F1, F2 = as_fmatrix(F1), as_fmatrix(F2)
    if F1.n != F2.n:
        raise DimensionError(f"leaf counts differ: {F1.n} vs {F2.n}")
    for a, b in zip(F1.column_vector(), F2.column_vector()):
        if a != b:
            return BEFORE if a > b else AFTER
    return EQUAL


def sort_key(x, ref, p: int = 2) -> tuple:
    """Key realising the total order: signed distance, then lexicographic."""
    x, ref = as_fmatrix(x), as_fmatrix(ref)
    return (_signed_key(x, ref, p), tuple(-v for v in x.column_vector()))


def total_compare(T1, T2, ref, p: int = 2) -> int:
    k1, k2 = sort_key(T1, ref, p), sort_key(T2, ref, p)
    return BEFORE if k1 < k2 else AFTER if k1 > k2 else EQUAL


def sort_shapes(shapes: Sequence, ref, p: int = 2) -> list[FMatrix]:
    ref = as_fmatrix(ref)
    return sorted((as_fmatrix(x) for x in shapes), key=lambda F: sort_key(F, ref, p))


@functools.lru_cache(maxsize=None)
def kingman_reference(n: int) -> FMatrix:
    """Fréchet mean of the Kingman shape distribution (exact for small n,
    otherwise annealing from a fixed seed)."""
    target = TargetMatrix(kingman_mean(n), n)
    if n <= KINGMAN_EXACT_MAX_N:
        return frechet_mean_exact(target, cap=KINGMAN_EXACT_MAX_N).mean
    from .core import code_to_fmatrix

    return code_to_fmatrix(frechet_mean_sa(target, seed=KINGMAN_SA_SEED, chains=4).state)


# ---------------------------------------------------------------------------
# Entropy


def entropy(pmf, *, tol: float = 1e-10) -> float:
    """Shannon entropy (natural log) of a normalised pmf."""
    values = np.asarray(list(pmf.values()) if isinstance(pmf, Mapping) else pmf, dtype=float)
    if values.size == 0:
        raise ValueError("empty pmf")
    if np.any(values < 0):
        raise ValueError("pmf has negative entries")
    if abs(values.sum() - 1) > tol:
        raise ValueError(f"pmf is not normalised (sums to {values.sum():.12g})")
    nz = values[values > 0]
    return float(max(-(nz * np.log(nz)).sum(), 0.0))


def max_entropy(n: int) -> float:
    return math.log(zigzag(n - 1))


# ---------------------------------------------------------------------------
# Credible balls


@dataclass(frozen=True)
class BallSummary:
    center: FMatrix
    radius: float
    level: float
    mass: float
    members: tuple[FMatrix, ...]
    boundary: tuple[FMatrix, ...]
    p: int

    @property
    def boundary_codes(self) -> list[tuple[int, ...]]:
        return [fmatrix_to_code(F) for F in self.boundary]


def credible_ball(sample=None, center=None, level: float = 0.95, *, pmf=None, p: int = 2, tol: float = 1e-12) -> BallSummary:
    """Smallest ball around ``center`` holding at least ``level`` of the mass.

    The radius is taken from the achieved distances. Boundary shapes (those at
    the radius) are split by the sign of their signed distance to the center
    and each side is summarised by its first and last element under the
    total order.
    """
    if not 0 < level <= 1:
        raise ValueError("level must lie in (0, 1]")
    if center is None:
        raise ValueError("a center is required")
    shapes, w = _weighted_sample(sample, pmf)
    c = as_fmatrix(center)
    keys = np.array([_key(F, c, p) for F in shapes])
    radius_key = None
    cum = 0.0
    for k in np.unique(keys):
        cum += float(w[keys == k].sum())
        if cum >= level - tol:
            radius_key = int(k)
            break
    if radius_key is None:
        radius_key = int(keys.max())
    inside = keys <= radius_key
    members = tuple(sort_shapes([F for F, ok in zip(shapes, inside) if ok], c, p))
    edge = [F for F, k in zip(shapes, keys) if k == radius_key]
    boundary: list[FMatrix] = []
    for side in (True, False):
        part = sort_shapes([F for F in edge if is_unbalanced_side(F, p) == side], c, p)
        if part:
            boundary.append(part[0])
            if part[-1] != part[0]:
                boundary.append(part[-1])
    return BallSummary(c, _magnitude(radius_key, p), level, float(w[inside].sum()), members, tuple(boundary), p)


# ---------------------------------------------------------------------------
# Ordered histograms


def ordered_histogram(sample=None, ref=None, *, pmf=None, p: int = 2) -> list[tuple[int, tuple[int, ...], float, float]]:
    """Rows ``(rank, code, probability, signed distance)`` in total order."""
    shapes, w = _weighted_sample(sample, pmf)
    ref = kingman_reference(shapes[0].n) if ref is None else as_fmatrix(ref)
    weight = dict(zip(shapes, w))
    rows = []
    for rank, F in enumerate(sort_shapes(shapes, ref, p), start=1):
        rows.append((rank, fmatrix_to_code(F), float(weight[F]), signed_distance(F, ref, p)))
    return rows


def histogram_csv(rows) -> str:
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(["rank", "code", "probability", "signed_distance"])
    for rank, code, prob, sd in rows:
        out.writerow([rank, " ".join(map(str, code)), repr(prob), repr(sd)])
    return buf.getvalue()


def all_shapes_sorted(n: int, ref=None, p: int = 2) -> list[FMatrix]:
    ref = kingman_reference(n) if ref is None else ref
    return sort_shapes(enumerate_shapes(n), ref, p)
