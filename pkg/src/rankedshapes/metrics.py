"""
d1 / d2 distances between ranked tree shapes and ranked genealogies.

Isochronous genealogies are compared through the Hadamard product of the
F-matrix with the weight matrix ``W[i, j] = u_j - u_{i+1}`` built from the
branching times. Heterochronous genealogies are first brought to a common
event grid (see :func:`align_heterochronous`).
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .core import (
    FMatrix,
    HeteroCode,
    InvalidShapeError,
    branch_fmatrix,
    code_to_fmatrix,
    event_structure,
    iso_hetero_code,
    validate_code,
)

TIME_TOLERANCE = 1e-9


class DimensionError(ValueError):
    """Trees of different leaf counts (or matrix sizes) were compared."""


def _lp(diff: np.ndarray, p: int) -> float:
    if p == 1:
        return float(np.abs(diff).sum())
    if p == 2:
        return float(np.sqrt(np.square(diff).sum()))
    raise ValueError("p must be 1 or 2")


def d_shape(F1: FMatrix, F2: FMatrix, p: int = 2) -> float:
    if F1.n != F2.n:
        raise DimensionError(f"leaf counts differ: {F1.n} vs {F2.n}")
    return _lp(F1.flat - F2.flat, p)


# ---------------------------------------------------------------------------
# Isochronous genealogies


@dataclass(frozen=True)
class RankedGenealogy:
    """Ranked shape plus branching times ``u_1 > ... > u_{n-1} > 0``.

    ``times[k]`` is the time before present at which internal node ``k + 2``
    splits; the leaves sit at time 0.
    """

    code: tuple[int, ...]
    times: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "code", tuple(int(x) for x in self.code))
        object.__setattr__(self, "times", tuple(float(x) for x in self.times))
        report = validate_code(self.code)
        if not report:
            raise InvalidShapeError(report.message)
        if len(self.times) != len(self.code):
            raise ValueError("need one branching time per internal node")
        check_times(self.times)

    @property
    def n(self) -> int:
        return len(self.code) + 1

    @property
    def fmatrix(self) -> FMatrix:
        return code_to_fmatrix(self.code)

    def scaled(self, factor: float) -> "RankedGenealogy":
        return RankedGenealogy(self.code, tuple(factor * u for u in self.times))


def check_times(times: Sequence[float]) -> None:
    u = np.asarray(times, dtype=float)
    if np.any(~np.isfinite(u)):
        raise ValueError("times must be finite")
    if u.size and u[-1] <= 0:
        raise ValueError("branching times must be positive")
    if np.any(np.diff(u) >= 0):
        raise ValueError("branching times must be strictly decreasing")


def weight_matrix(times: Sequence[float]) -> np.ndarray:
    """Dense lower-triangular ``W`` with ``W[i, j] = u_j - u_{i+1}`` (1-based,
    ``u_n = 0``)."""
    u = np.asarray(times, dtype=float)
    if np.any(np.diff(u) > 0) or (u.size and u[-1] < 0):
        raise ValueError("times must be non-increasing and non-negative")
    full = np.append(u, 0.0)
    k = u.size
    W = full[None, :k] - full[1 : k + 1, None]
    return np.tril(W)


def genealogy_product(G: RankedGenealogy) -> np.ndarray:
    return G.fmatrix.dense() * weight_matrix(G.times)


def d_genealogy(G1: RankedGenealogy, G2: RankedGenealogy, p: int = 2) -> float:
    if G1.n != G2.n:
        raise DimensionError(f"leaf counts differ: {G1.n} vs {G2.n}")
    return _lp(genealogy_product(G1) - genealogy_product(G2), p)


# ---------------------------------------------------------------------------
# Heterochronous genealogies


@dataclass(frozen=True)
class HeteroGenealogy:
    """Heterochronous ranked genealogy.

    ``node_times[k]`` is the time before present of the node created at
    position ``k`` of the code (split time for internal nodes, sampling time
    for leaves). Consecutive leaves whose times agree within
    ``TIME_TOLERANCE`` form one sampling event.
    """

    code: HeteroCode
    node_times: tuple[float, ...]
    kinds: tuple[str, ...] = field(init=False, repr=False)
    event_times: tuple[float, ...] = field(init=False, repr=False)
    samples_per_event: tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "node_times", tuple(float(x) for x in self.node_times))
        report = self.code.validate()
        if not report:
            raise InvalidShapeError(report.message)
        if len(self.node_times) != len(self.code.t):
            raise ValueError("need one time per node")
        kinds, times, sizes = [], [], []
        for s, u in zip(self.code.sigma, self.node_times):
            if s == 0 and kinds and kinds[-1] == "s" and abs(times[-1] - u) <= TIME_TOLERANCE:
                sizes[-1] += 1
                continue
            kinds.append("c" if s else "s")
            times.append(u)
            if not s:
                sizes.append(1)
        if abs(times[-1]) > TIME_TOLERANCE:
            raise ValueError("the most recent sampling event must be at time 0")
        times[-1] = 0.0
        if np.any(np.diff(times) >= 0):
            raise ValueError("event times must strictly decrease from the root to the present")
        object.__setattr__(self, "kinds", tuple(kinds))
        object.__setattr__(self, "event_times", tuple(times))
        object.__setattr__(self, "samples_per_event", tuple(sizes))

    @property
    def n(self) -> int:
        return self.code.n

    @classmethod
    def from_isochronous(cls, G: RankedGenealogy) -> "HeteroGenealogy":
        code = iso_hetero_code(G.code)
        return cls(code, tuple(G.times) + (0.0,) * G.n)

    def is_isochronous(self) -> bool:
        return self.kinds.count("s") == 1

    def fmatrix(self) -> np.ndarray:
        kinds, node_event = event_structure(self.code, self.samples_per_event)
        label_pos, label = {}, 1
        for pos, s in enumerate(self.code.sigma):
            if s:
                label += 1
                label_pos[label] = pos
        t = self.code.t
        births = [node_event[label_pos[t[p]]] for p in range(1, len(t))]
        ends = [node_event[p] for p in range(1, len(t))]
        return branch_fmatrix(births, ends, len(kinds))

    def segment_counts(self) -> list[int]:
        """Sampling events after each coalescent event (oldest first)."""
        counts: list[int] = []
        for kind in self.kinds:
            if kind == "c":
                counts.append(0)
            else:
                counts[-1] += 1
        return counts


@dataclass(frozen=True)
class AlignedTree:
    """A heterochronous tree on a shared event grid.

    ``kinds`` lists ``'c'``, ``'s'`` or ``'a'`` (artificial, zero samples) per
    event; ``real`` flags intervals opened by a non-artificial event. Rows and
    columns of artificial intervals carry no weight.
    """

    F: np.ndarray
    W: np.ndarray
    kinds: tuple[str, ...]
    event_times: tuple[float, ...]
    real: np.ndarray

    def product(self, weighted: bool = True) -> np.ndarray:
        mask = np.outer(self.real, self.real)
        base = self.F * self.W if weighted else self.F.astype(float)
        return np.where(mask, base, 0.0)

    def reduced(self) -> tuple[np.ndarray, np.ndarray]:
        """Drop artificial rows/columns, recovering the unaligned matrices."""
        keep = np.flatnonzero(self.real)
        return self.F[np.ix_(keep, keep)], self.W[np.ix_(keep, keep)]


def _event_weights(times: Sequence[float]) -> np.ndarray:
    e = np.asarray(times, dtype=float)
    k = e.size - 1
    return np.tril(e[None, :k] - e[1:, None])


def align_heterochronous(trees: Sequence[HeteroGenealogy]) -> list[AlignedTree]:
    """Place all trees on one event grid.

    Coalescent events share positions across trees. After each coalescent
    event every tree gets the largest sampling-event count seen among the
    trees in that segment; missing events are artificial, sit at the end of
    the segment and take the time of the next real event.
    """
    trees = list(trees)
    if not trees:
        return []
    n = trees[0].n
    if any(T.n != n for T in trees):
        raise DimensionError("all trees must have the same number of leaves")
    target = np.max([T.segment_counts() for T in trees], axis=0)

    aligned = []
    for T in trees:
        F0 = T.fmatrix()
        kinds: list[str] = []
        times: list[float] = []
        origin: list[int] = []  # original event index, -1 for artificial
        ev = 0
        for seg, want in enumerate(target):
            kinds.append("c")
            times.append(T.event_times[ev])
            origin.append(ev)
            ev += 1
            have = T.segment_counts()[seg]
            real_samples = list(range(ev, ev + have))
            ev += have
            last_segment = seg == len(target) - 1
            lead = real_samples[:-1] if last_segment else real_samples
            for idx in lead:
                kinds.append("s")
                times.append(T.event_times[idx])
                origin.append(idx)
            nxt = T.event_times[ev] if not last_segment else 0.0
            for _ in range(want - have):
                kinds.append("a")
                times.append(nxt)
                origin.append(-1)
            if last_segment:
                kinds.append("s")
                times.append(0.0)
                origin.append(real_samples[-1])
        size = len(kinds) - 1
        real = np.array([k != "a" for k in kinds[:-1]])
        F = np.zeros((size, size), dtype=np.int64)
        rows = np.flatnonzero(real)
        src = np.array([origin[r] for r in rows])
        F[np.ix_(rows, rows)] = F0[np.ix_(src, src)]
        # duplicate counts into artificial rows/columns so F stays a valid count matrix
        for r in range(size):
            if not real[r]:
                F[r, :] = F[r - 1, :]
                F[r, r] = F[r - 1, r - 1]
        for c in range(size):
            if not real[c]:
                F[c:, c] = F[c:, c - 1]
        F = np.tril(F)
        aligned.append(AlignedTree(F, _event_weights(times), tuple(kinds), tuple(times), real))
    return aligned


def d_hetero(
    G1: HeteroGenealogy,
    G2: HeteroGenealogy,
    p: int = 2,
    *,
    weighted: bool = True,
    context: Sequence[AlignedTree] | None = None,
    indices: tuple[int, int] | None = None,
) -> float:
    """Lp distance between aligned F∘W (or F) matrices.

    With ``context`` (the output of :func:`align_heterochronous` for a sample
    containing both trees) and ``indices`` locating them, the precomputed
    alignment is used instead of aligning the pair.
    """
    if G1.n != G2.n:
        raise DimensionError(f"leaf counts differ: {G1.n} vs {G2.n}")
    if context is not None:
        if indices is None:
            raise ValueError("indices are required with an alignment context")
        A, B = context[indices[0]], context[indices[1]]
    else:
        A, B = align_heterochronous([G1, G2])
    return _lp(A.product(weighted) - B.product(weighted), p)


# ---------------------------------------------------------------------------
# Pairwise matrices


def embed(sample: Sequence, *, weighted: bool = True) -> np.ndarray:
    """Stack each tree's comparison vector (one row per tree)."""
    sample = list(sample)
    if not sample:
        return np.zeros((0, 0))
    kind = type(sample[0])
    if any(type(x) is not kind for x in sample):
        raise TypeError("sample mixes tree types")
    if kind is FMatrix:
        if len({F.n for F in sample}) > 1:
            raise DimensionError("sample mixes leaf counts")
        return np.stack([F.flat.astype(float) for F in sample])
    if kind is RankedGenealogy:
        if len({G.n for G in sample}) > 1:
            raise DimensionError("sample mixes leaf counts")
        if not weighted:
            return np.stack([G.fmatrix.flat.astype(float) for G in sample])
        return np.stack([genealogy_product(G)[np.tril_indices(G.n - 1)] for G in sample])
    if kind is HeteroGenealogy:
        aligned = align_heterochronous(sample)
        idx = np.tril_indices(aligned[0].F.shape[0])
        return np.stack([A.product(weighted)[idx] for A in aligned])
    raise TypeError(f"unsupported tree type {kind.__name__}")


def pairwise_distance_matrix(
    sample: Sequence,
    p: int = 2,
    *,
    weighted: bool = True,
    parallel: bool = False,
    workers: int | None = None,
) -> np.ndarray:
    """Symmetric matrix of d_p distances.

    Rows are computed in blocks; with ``parallel`` the blocks run on a thread
    pool and are written back by index, so the result does not depend on
    scheduling.
    """
    X = embed(sample, weighted=weighted)
    m = X.shape[0]
    if m == 0:
        return np.zeros((0, 0))
    metric = {1: "cityblock", 2: "euclidean"}.get(p)
    if metric is None:
        raise ValueError("p must be 1 or 2")
    out = np.zeros((m, m))
    blocks = [range(s, min(s + 256, m)) for s in range(0, m, 256)]

    def work(rows: range):
        return rows, cdist(X[rows.start : rows.stop], X, metric=metric)

    if parallel and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, blocks))
    else:
        results = [work(b) for b in blocks]
    for rows, vals in results:
        out[rows.start : rows.stop] = vals
    out = np.maximum(out, out.T)
    np.fill_diagonal(out, 0.0)
    return out
