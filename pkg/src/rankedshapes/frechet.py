"""
Fréchet means and variances of ranked tree shapes and genealogies.

For the d2 metric the sum of squared distances to a sample depends on the
sample only through the entrywise average ``M`` of its F-matrices:

    sum_j d2(x, y_j)^2 = m * ||F_x - M||^2 + const(sample)

so exact search (small n) and simulated annealing (any n) both minimise
``E(T) = ||F_T - M||^2``. For d1 no such reduction exists and the raw sample
is kept.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import (
    DEFAULT_ENUMERATION_CAP,
    CapacityError,
    FMatrix,
    HeteroCode,
    caterpillar_code,
    code_to_fmatrix,
    enumerate_hetero_codes,
    enumerate_shapes,
    fmatrix_to_code,
    hetero_fmatrix,
    validate_code,
    InvalidShapeError,
)
from .metrics import (
    DimensionError,
    HeteroGenealogy,
    RankedGenealogy,
    genealogy_product,
    pairwise_distance_matrix,
    weight_matrix,
)

TIE_TOLERANCE = 1e-9


def as_fmatrix(x) -> FMatrix:
    if isinstance(x, FMatrix):
        return x
    if isinstance(x, RankedGenealogy):
        return x.fmatrix
    return code_to_fmatrix(tuple(x))


def _weighted_sample(sample=None, pmf=None) -> tuple[list[FMatrix], np.ndarray]:
    """Distinct shapes and their normalised weights, in first-seen order."""
    if (sample is None) == (pmf is None):
        raise ValueError("give exactly one of sample or pmf")
    weights: dict[FMatrix, float] = {}
    if pmf is not None:
        items = pmf.items() if isinstance(pmf, Mapping) else pmf
        for x, w in items:
            if w < 0:
                raise ValueError("pmf weights must be non-negative")
            F = as_fmatrix(x)
            weights[F] = weights.get(F, 0.0) + float(w)
    else:
        for x in sample:
            F = as_fmatrix(x)
            weights[F] = weights.get(F, 0.0) + 1.0
    if not weights:
        raise ValueError("empty sample")
    shapes = list(weights)
    if len({F.n for F in shapes}) > 1:
        raise DimensionError("sample mixes leaf counts")
    w = np.array([weights[F] for F in shapes])
    total = w.sum()
    if not total > 0:
        raise ValueError("pmf has zero total mass")
    return shapes, w / total


# ---------------------------------------------------------------------------
# Target matrix


@dataclass(frozen=True)
class TargetMatrix:
    """Entrywise average (or expectation) ``M`` of F-matrices, dense 0-based."""

    values: np.ndarray
    n: int
    weights: np.ndarray | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.weights is not None:
            w = np.array(self.weights, dtype=float)
            if w.shape != v.shape or np.any(w[np.tri(len(w), dtype=bool)] <= 0):
                raise ValueError("entry weights must be positive with the shape of M")
            w.setflags(write=False)
            object.__setattr__(self, "weights", w)

    @property
    def flat(self) -> np.ndarray:
        return self.values[np.tril_indices(self.values.shape[0])]

    @property
    def flat_weights(self) -> np.ndarray:
        if self.weights is None:
            return np.ones(len(self.flat))
        return self.weights[np.tril_indices(self.values.shape[0])]

    def energy(self, F) -> float:
        """``sum A (F - M)^2`` over the lower triangle (``A = 1`` by default)."""
        D = np.square(np.asarray(F.dense() if isinstance(F, FMatrix) else F, dtype=float) - self.values)
        if self.weights is not None:
            D = D * self.weights
        return float(np.tril(D).sum())


def target_matrix(sample=None, *, pmf=None) -> TargetMatrix:
    shapes, w = _weighted_sample(sample, pmf)
    M = np.tensordot(w, np.stack([F.dense() for F in shapes]).astype(float), axes=1)
    return TargetMatrix(M, shapes[0].n)


def hetero_target_matrix(sample: Sequence[HeteroGenealogy]) -> TargetMatrix:
    mats = [G.fmatrix() for G in sample]
    if not mats:
        raise ValueError("empty sample")
    if len({A.shape for A in mats}) > 1:
        raise DimensionError("heterochronous trees have different event grids; align them first")
    return TargetMatrix(np.mean(np.stack(mats).astype(float), axis=0), sample[0].n)


# ---------------------------------------------------------------------------
# Objectives and exact search


def frechet_objective(x, sample=None, *, pmf=None, p: int = 2) -> float:
    """Weighted mean of ``d_p(x, y)^2`` over the sample (or pmf)."""
    shapes, w = _weighted_sample(sample, pmf)
    F = as_fmatrix(x)
    if F.n != shapes[0].n:
        raise DimensionError("leaf counts differ")
    Y = np.stack([S.flat for S in shapes]).astype(float)
    diff = Y - F.flat
    d2 = np.abs(diff).sum(axis=1) ** 2 if p == 1 else np.square(diff).sum(axis=1)
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    return float(w @ d2)


@dataclass(frozen=True)
class ExactResult:
    """All minimisers (canonical enumeration order) and the minimal energy.

    For p=2 the energy is ``||F - M||^2``; for p=1 the weighted mean of
    ``d1(F, y)^2``.
    """

    means: tuple[FMatrix, ...]
    energy: float
    p: int

    @property
    def mean(self) -> FMatrix:
        return self.means[0]


def _argmin_all(values: np.ndarray) -> np.ndarray:
    best = values.min()
    return np.flatnonzero(values <= best + TIE_TOLERANCE * max(1.0, abs(best)))


def frechet_mean_exact(
    target: TargetMatrix | None = None,
    *,
    p: int = 2,
    sample=None,
    pmf=None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ExactResult:
    """Exhaustive search over all shapes with ``n`` leaves."""
    if p == 2:
        if target is None:
            target = target_matrix(sample, pmf=pmf)
        n = target.n
        if n > cap:
            raise CapacityError(f"n={n} exceeds the enumeration cap {cap}; use frechet_mean_sa")
        shapes = enumerate_shapes(n, cap=cap)
        X = np.stack([F.flat for F in shapes]).astype(float)
        m, a = target.flat, target.flat_weights
        obj = np.square(X) @ a - 2 * X @ (a * m)
        idx = _argmin_all(obj)
        energy = float(obj[idx[0]] + (a * m) @ m)
        return ExactResult(tuple(shapes[i] for i in idx), max(energy, 0.0), 2)
    if p == 1:
        ys, w = _weighted_sample(sample, pmf)
        n = ys[0].n
        if n > cap:
            raise CapacityError(f"n={n} exceeds the enumeration cap {cap}; use frechet_mean_sa")
        shapes = enumerate_shapes(n, cap=cap)
        X = np.stack([F.flat for F in shapes]).astype(float)
        Y = np.stack([F.flat for F in ys]).astype(float)
        obj = np.empty(len(shapes))
        for s in range(0, len(shapes), 4096):
            block = np.abs(X[s : s + 4096, None, :] - Y[None, :, :]).sum(axis=2)
            obj[s : s + 4096] = (block**2) @ w
        idx = _argmin_all(obj)
        return ExactResult(tuple(shapes[i] for i in idx), float(obj[idx[0]]), 1)
    raise ValueError("p must be 1 or 2")


def frechet_mean_exact_hetero(target: TargetMatrix, sigma: Sequence[int], group_sizes: Sequence[int], *, cap: int = DEFAULT_ENUMERATION_CAP):
    """Exhaustive search over heterochronous shapes with a fixed ``sigma``.

    Returns ``(codes, energy)``; codes with identical F-matrices are reported
    once (first in lexicographic order of ``t``).
    """
    seen: dict[bytes, HeteroCode] = {}
    energies: dict[bytes, float] = {}
    for code in enumerate_hetero_codes(sigma, cap=cap):
        F = hetero_fmatrix(code, group_sizes)
        key = F.tobytes()
        if key not in seen:
            seen[key] = code
            energies[key] = target.energy(F)
    keys = list(seen)
    vals = np.array([energies[k] for k in keys])
    idx = _argmin_all(vals)
    return tuple(seen[keys[i]] for i in idx), float(vals[idx[0]])


# ---------------------------------------------------------------------------
# Cooling schedules and proposals


@dataclass(frozen=True)
class CoolingSchedule:
    """``exponential``: R0 alpha^k; ``linear``: R0 / (1 + alpha k);
    ``logarithmic``: R0 / (1 + alpha log(1 + k))."""

    kind: str = "exponential"
    R0: float = 1000.0
    alpha: float = 0.9995

    def __post_init__(self):
        if self.kind not in ("exponential", "linear", "logarithmic"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if not (self.R0 > 0 and math.isfinite(self.R0)):
            raise ValueError("initial temperature must be positive")
        if self.kind == "exponential" and not 0 < self.alpha <= 1:
            raise ValueError("exponential decay parameter must lie in (0, 1]")
        if self.kind != "exponential" and not self.alpha > 0:
            raise ValueError("decay parameter must be positive")

    @classmethod
    def parse(cls, text: str) -> "CoolingSchedule":
        """``kind:R0:alpha`` with kind one of exp, lin, log (or full names)."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"schedule must look like exp:R0:alpha, got {text!r}")
        names = {"exp": "exponential", "lin": "linear", "log": "logarithmic"}
        kind = names.get(parts[0], parts[0])
        return cls(kind, float(parts[1]), float(parts[2]))

    def temperatures(self, iterations: int) -> np.ndarray:
        k = np.arange(iterations, dtype=float)
        if self.kind == "exponential":
            R = self.R0 * self.alpha**k
        elif self.kind == "linear":
            R = self.R0 / (1 + self.alpha * k)
        else:
            R = self.R0 / (1 + self.alpha * np.log1p(k))
        # keep strictly positive even after underflow
        return np.maximum(R, np.finfo(float).tiny)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def canonical_key(t: Sequence[int]) -> tuple[int, ...]:
    """Position of a shape in the canonical enumeration order (row-major F)."""
    return tuple(code_to_fmatrix(tuple(t)).flat.tolist())


def iso_choices(t: Sequence[int], pos: int) -> list[int]:
    """Allowed values at 1-based position ``pos`` given the rest of ``t``."""
    cur = t[pos - 1]
    out = []
    for v in range(2, pos + 1):
        c = sum(1 for k, x in enumerate(t) if x == v and k != pos - 1)
        if c < 2:
            out.append(v)
    assert cur in out
    return out


def propose_iso(t: Sequence[int], seed=None) -> tuple[int, ...]:
    """Resample one coordinate of the code uniformly among allowed values."""
    t = tuple(t)
    n = len(t) + 1
    if n <= 2:
        return t
    rng = _rng(seed)
    pos = int(rng.integers(2, n))
    choices = iso_choices(t, pos)
    v = choices[int(rng.integers(len(choices)))]
    return t[: pos - 1] + (v,) + t[pos:]


def _hetero_prefix_ok(t: Sequence[int], sigma: Sequence[int]) -> bool:
    internal = sigma[0]
    for k in range(1, len(t)):
        if not 2 <= t[k] <= 1 + internal:
            return False
        internal += sigma[k]
    return True


def propose_hetero(code: HeteroCode, seed=None) -> HeteroCode:
    """Swap two entries of ``t`` (positions 2..2n-1); invalid results are rejected."""
    rng = _rng(seed)
    L = len(code.t)
    if L < 3:
        return code
    i = int(rng.integers(1, L))
    j = int(rng.integers(1, L - 1))
    if j >= i:
        j += 1
    t = list(code.t)
    t[i], t[j] = t[j], t[i]
    if not _hetero_prefix_ok(t, code.sigma):
        return code
    return HeteroCode(tuple(t), code.sigma)


# ---------------------------------------------------------------------------
# Simulated annealing


@dataclass(frozen=True)
class SAResult:
    state: tuple[int, ...] | HeteroCode
    energy: float
    trace: np.ndarray = field(repr=False)
    best_trace: np.ndarray = field(repr=False)
    accepted: np.ndarray = field(repr=False)
    temperatures: np.ndarray = field(repr=False)
    seed: int | None = None
    chain: int = 0

    @property
    def accepted_moves(self) -> int:
        return int(self.accepted.sum())

    @property
    def fmatrix(self):
        if isinstance(self.state, HeteroCode):
            raise TypeError("heterochronous states have no isochronous F-matrix")
        return code_to_fmatrix(self.state)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "temperature", "energy", "accepted"])
        for k in range(len(self.trace)):
            w.writerow([k + 1, repr(float(self.temperatures[k])), repr(float(self.trace[k])), int(self.accepted[k])])
        return buf.getvalue()


class _IsoEnergy:
    """Energy of an isochronous state with rectangle updates of F."""

    def __init__(self, n: int, target: TargetMatrix | None, ys=None, w=None):
        self.n = n
        self.mask = np.tri(n - 1, dtype=bool)
        if target is not None:
            self.M = target.values
            self.A = target.weights
            self.Y = None
        else:
            self.M = None
            self.Y = np.stack([F.dense() for F in ys]).astype(float)
            self.w = w

    def full(self, F: np.ndarray) -> float:
        if self.M is not None:
            sq = np.square(F - self.M)
            if self.A is not None:
                sq = sq * self.A
            return float(sq[self.mask].sum())
        d1 = np.abs(self.Y - F).sum(axis=(1, 2))
        return float(self.w @ d1**2)


def _run_iso_chain(n, energy: _IsoEnergy, schedule, iterations, rng, initial):
    t = list(initial)
    F = code_to_fmatrix(t).dense().astype(float)
    counts = [0] * (n + 2)
    for v in t[1:]:
        counts[v] += 1
    E = energy.full(F)
    R = (F - energy.M) if energy.M is not None else None
    A = energy.A if energy.M is not None else None
    best_E, best_t, best_key = E, tuple(t), None
    temps = schedule.temperatures(iterations)
    trace = np.empty(iterations)
    best_trace = np.empty(iterations)
    acc = np.zeros(iterations, dtype=bool)
    u_pos = rng.random(iterations)
    u_val = rng.random(iterations)
    u_acc = rng.random(iterations)
    for k in range(iterations):
        if n > 2:
            pos = 2 + int(u_pos[k] * (n - 2))
            a = t[pos - 1]
            choices = [v for v in range(2, pos + 1) if counts[v] - (v == a) < 2]
            b = choices[int(u_val[k] * len(choices))]
        else:
            a = b = 1
        if a != b:
            if a < b:
                lo, hi, s = a - 2, b - 2, 1.0
            else:
                lo, hi, s = b - 2, a - 2, -1.0
            r0 = pos - 1
            if R is not None:
                block = R[r0:, lo:hi]
                if A is None:
                    dE = 2 * s * float(block.sum()) + block.size
                else:
                    Ab = A[r0:, lo:hi]
                    dE = float((Ab * (2 * s * block + 1)).sum())
            else:
                F[r0:, lo:hi] += s
                dE = energy.full(F) - E
                F[r0:, lo:hi] -= s
            if dE <= 0 or u_acc[k] < math.exp(-dE / temps[k]):
                if R is not None:
                    R[r0:, lo:hi] += s
                else:
                    F[r0:, lo:hi] += s
                t[pos - 1] = b
                counts[a] -= 1
                counts[b] += 1
                E += dE
                acc[k] = True
                if E < best_E - TIE_TOLERANCE:
                    best_E, best_t = E, tuple(t)
                    best_key = None
                elif E <= best_E + TIE_TOLERANCE:
                    # equal energy: keep the shape that comes first canonically
                    if best_key is None:
                        best_key = canonical_key(best_t)
                    key = canonical_key(t)
                    if key < best_key:
                        best_t, best_key = tuple(t), key
        trace[k] = E
        best_trace[k] = best_E
    # recompute to remove accumulated rounding
    best_E = energy.full(code_to_fmatrix(best_t).dense().astype(float))
    return best_t, best_E, trace, best_trace, acc, temps


def _run_hetero_chain(target: TargetMatrix, group_sizes, schedule, iterations, rng, initial: HeteroCode):
    sigma = initial.sigma
    t = list(initial.t)
    L = len(t)
    E = target.energy(hetero_fmatrix(initial, group_sizes))
    best_E, best_t = E, tuple(t)
    temps = schedule.temperatures(iterations)
    trace = np.empty(iterations)
    best_trace = np.empty(iterations)
    acc = np.zeros(iterations, dtype=bool)
    u_i = rng.random(iterations)
    u_j = rng.random(iterations)
    u_acc = rng.random(iterations)
    for k in range(iterations):
        i = 1 + int(u_i[k] * (L - 1))
        j = 1 + int(u_j[k] * (L - 2))
        if j >= i:
            j += 1
        if t[i] != t[j]:
            t[i], t[j] = t[j], t[i]
            if _hetero_prefix_ok(t, sigma):
                E_new = target.energy(hetero_fmatrix(HeteroCode(tuple(t), sigma), group_sizes))
                dE = E_new - E
                if dE <= 0 or u_acc[k] < math.exp(-dE / temps[k]):
                    E = E_new
                    acc[k] = True
                    if E < best_E - 1e-12:
                        best_E, best_t = E, tuple(t)
                else:
                    t[i], t[j] = t[j], t[i]
            else:
                t[i], t[j] = t[j], t[i]
        trace[k] = E
        best_trace[k] = best_E
    return HeteroCode(best_t, sigma), best_E, trace, best_trace, acc, temps


@dataclass(frozen=True)
class SAConfig:
    schedule: CoolingSchedule = CoolingSchedule()
    iterations: int = 50_000
    chains: int = 4
    workers: int | None = None


def frechet_mean_sa(
    target: TargetMatrix | None = None,
    *,
    p: int = 2,
    sample=None,
    pmf=None,
    schedule: CoolingSchedule = CoolingSchedule(),
    iterations: int = 50_000,
    seed: int = 0,
    chains: int = 1,
    initial: Sequence[int] | HeteroCode | None = None,
    hetero: tuple[Sequence[int], Sequence[int]] | None = None,
    workers: int | None = None,
) -> SAResult:
    """Simulated annealing for the Fréchet mean.

    Each chain draws from its own stream derived from ``seed``; the returned
    result is the lowest-energy chain. Energy ties, within a chain and across
    chains, go to the shape that comes first in the enumeration order, then to
    the lower chain index.
    For heterochronous shapes pass ``hetero=(sigma, group_sizes)`` with a
    target built by :func:`hetero_target_matrix`.
    """
    if iterations < 1:
        raise ValueError("iterations must be at least 1")
    if chains < 1:
        raise ValueError("chains must be at least 1")
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(chains)]

    if hetero is not None:
        if target is None or p != 2:
            raise ValueError("heterochronous annealing needs p=2 and a target matrix")
        sigma, groups = tuple(hetero[0]), tuple(hetero[1])
        if initial is None:
            initial = enumerate_first_hetero(sigma)
        if not isinstance(initial, HeteroCode) or initial.sigma != sigma:
            raise ValueError("initial state must be a HeteroCode with the given sigma")
        report = initial.validate()
        if not report:
            raise InvalidShapeError(report.message)

        def run(c):
            return _run_hetero_chain(target, groups, schedule, iterations, streams[c], initial)

    else:
        if p == 2:
            if target is None:
                target = target_matrix(sample, pmf=pmf)
            n = target.n
            energy = _IsoEnergy(n, target)
        elif p == 1:
            ys, w = _weighted_sample(sample, pmf)
            n = ys[0].n
            energy = _IsoEnergy(n, None, ys, w)
        else:
            raise ValueError("p must be 1 or 2")
        start = tuple(initial) if initial is not None else caterpillar_code(n)
        report = validate_code(start)
        if not report or len(start) != n - 1:
            raise InvalidShapeError(report.message or "initial state has the wrong length")

        def run(c):
            return _run_iso_chain(n, energy, schedule, iterations, streams[c], start)

    if workers and chains > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(run, range(chains)))
    else:
        outs = [run(c) for c in range(chains)]
    # lowest energy; near-ties resolved by canonical order, then chain index
    low = min(o[1] for o in outs)
    tied = [c for c in range(chains) if outs[c][1] <= low + TIE_TOLERANCE * max(1.0, abs(low))]
    if hetero is None:
        best = min(tied, key=lambda c: (canonical_key(outs[c][0]), c))
    else:
        best = tied[0]
    state, E, trace, best_trace, acc, temps = outs[best]
    return SAResult(state, float(E), trace, best_trace, acc, temps, seed, best)


def enumerate_first_hetero(sigma: Sequence[int]) -> HeteroCode:
    """A valid code for ``sigma`` built greedily (children attach to the oldest open node)."""
    sigma = tuple(sigma)
    n = (len(sigma) + 1) // 2
    counts = [0] * (n + 2)
    t = [1]
    internal = sigma[0]
    for k in range(1, len(sigma)):
        v = next(v for v in range(2, internal + 2) if counts[v] < 2)
        counts[v] += 1
        t.append(v)
        internal += sigma[k]
    code = HeteroCode(tuple(t), sigma)
    report = code.validate()
    if not report:
        raise InvalidShapeError(report.message)
    return code


# ---------------------------------------------------------------------------
# Genealogies


def _summarize(X: np.ndarray, how: str) -> np.ndarray:
    if how == "mean":
        return X.mean(axis=0)
    if how == "median":
        return np.median(X, axis=0)
    raise ValueError("times must be 'mean' or 'median'")


def frechet_mean_genealogy(
    sample: Sequence[RankedGenealogy | HeteroGenealogy],
    *,
    p: int = 2,
    times: str = "mean",
    method: str = "auto",
    config: SAConfig = SAConfig(),
    seed: int = 0,
    align: bool = False,
    cap: int = 9,
    topology: str = "shape",
):
    """Fréchet mean genealogy under d2, found as shape mean plus averaged times.

    The topology minimises ``||F - M||^2`` for the sample-average F-matrix
    (exact search when ``n <= cap`` or ``method == 'exact'``, else annealing);
    the branching times are the entrywise mean or median. With
    ``topology="joint"`` (isochronous only) the topology instead minimises the
    full d2 objective with the times held at their summary, i.e. the weighted
    target ``sum W^2 (F - P / W)^2`` where ``P`` is the mean of ``F_j o W_j``
    and ``W`` the weight matrix of the summarised times. Heterochronous
    samples must share ``sigma`` and sampling-group sizes; with ``align=True``
    the most common ``(sigma, groups)`` pair is kept and the rest dropped.
    """
    sample = list(sample)
    if not sample:
        raise ValueError("empty sample")
    if p != 2:
        raise ValueError("the separated genealogy mean is defined for p=2")
    if method not in ("auto", "exact", "sa"):
        raise ValueError("method must be auto, exact or sa")
    if all(isinstance(G, RankedGenealogy) for G in sample):
        n = sample[0].n
        if any(G.n != n for G in sample):
            raise DimensionError("sample mixes leaf counts")
        u = _summarize(np.array([G.times for G in sample], dtype=float), times)
        if topology == "shape":
            target = target_matrix([G.fmatrix for G in sample])
        elif topology == "joint":
            target = joint_target_matrix(sample, u)
        else:
            raise ValueError("topology must be 'shape' or 'joint'")
        if method == "exact" or (method == "auto" and n <= cap):
            shape = frechet_mean_exact(target, cap=max(cap, n)).mean
            code = fmatrix_to_code(shape)
        else:
            res = frechet_mean_sa(
                target, schedule=config.schedule, iterations=config.iterations, seed=seed, chains=config.chains, workers=config.workers
            )
            code = res.state
        return RankedGenealogy(code, tuple(u))
    if all(isinstance(G, HeteroGenealogy) for G in sample):
        if topology != "shape":
            raise ValueError("heterochronous means support topology='shape' only")
        keys = [(G.code.sigma, G.samples_per_event) for G in sample]
        if len(set(keys)) > 1:
            if not align:
                raise ValueError("heterochronous sample has inconsistent sigma; pass align=True")
            # modal (sigma, groups); ties go to the first seen
            tally: dict = {}
            for k in keys:
                tally[k] = tally.get(k, 0) + 1
            modal = max(tally, key=lambda k: (tally[k], -keys.index(k)))
            sample = [G for G, k in zip(sample, keys) if k == modal]
        sigma, groups = sample[0].code.sigma, sample[0].samples_per_event
        target = hetero_target_matrix(sample)
        n = sample[0].n
        if method == "exact" or (method == "auto" and n <= cap):
            codes, _ = frechet_mean_exact_hetero(target, sigma, groups, cap=max(cap, n))
            code = codes[0]
        else:
            code = frechet_mean_sa(
                target,
                schedule=config.schedule,
                iterations=config.iterations,
                seed=seed,
                chains=config.chains,
                hetero=(sigma, groups),
                workers=config.workers,
            ).state
        u = _summarize(np.array([G.node_times for G in sample], dtype=float), times)
        return HeteroGenealogy(code, tuple(u))
    raise TypeError("sample must contain only RankedGenealogy or only HeteroGenealogy")


def joint_target_matrix(sample: Sequence[RankedGenealogy], times: Sequence[float]) -> TargetMatrix:
    """Weighted target whose energy equals the mean of ``d2((F, times), H)^2``
    over the sample, up to a constant."""
    W = weight_matrix(times)
    P = np.mean([genealogy_product(G) for G in sample], axis=0)
    lower = np.tri(len(W), dtype=bool)
    if np.any(W[lower] <= 0):
        raise ValueError("summarised times must be strictly decreasing and positive")
    safe = np.where(lower, W, 1.0)
    return TargetMatrix(np.where(lower, P / safe, 0.0), sample[0].n, np.where(lower, W**2, 1.0))


def genealogy_objective(G: RankedGenealogy, sample: Sequence[RankedGenealogy]) -> float:
    """Mean of ``d2(G, H)^2`` over the sample."""
    P = genealogy_product(G)
    mask = np.tri(G.n - 1, dtype=bool)
    return float(np.mean([np.square((P - genealogy_product(H))[mask]).sum() for H in sample]))


# ---------------------------------------------------------------------------
# Variance and medoid


def frechet_variance(sample=None, mean=None, *, pmf=None, p: int = 2) -> float:
    """Mean squared distance to ``mean`` (computed exactly when omitted)."""
    if mean is None:
        mean = frechet_mean_exact(p=p, sample=sample, pmf=pmf).mean
    return max(frechet_objective(mean, sample, pmf=pmf, p=p), 0.0)


def medoid_index(sample: Sequence, p: int = 2, **kwargs) -> int:
    """Index of the in-sample minimiser of summed squared distances (lowest index on ties)."""
    sample = list(sample)
    if not sample:
        raise ValueError("empty sample")
    if not isinstance(sample[0], (FMatrix, RankedGenealogy, HeteroGenealogy)):
        sample = [as_fmatrix(x) for x in sample]
    D = pairwise_distance_matrix(sample, p, **kwargs)
    return int(np.argmin(np.square(D).sum(axis=1)))


def medoid(sample: Sequence, p: int = 2, **kwargs):
    sample = list(sample)
    return sample[medoid_index(sample, p, **kwargs)]
