"""
Probability models on ranked tree shapes and genealogies.

* Blum-François beta-splitting on ranked shapes (beta = 0 is Yule/Kingman),
  its pmf and a root-routing sampler.
* Coalescent branching times under a time-varying effective population size.
* Exact Kingman moments of F-matrix entries and a CLT standardisation of
  sample-average F-matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, optimize
from scipy.special import gammaln

from .core import FMatrix, cherry_count, validate_code, InvalidShapeError
from .metrics import RankedGenealogy

INF = math.inf


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    """Independent child streams for parallel work, stable for a given seed."""
    return np.random.SeedSequence(seed).spawn(count)


# ---------------------------------------------------------------------------
# Shape distributions


def _check_beta(beta: float) -> None:
    if math.isnan(beta) or beta < -1:
        raise ValueError("beta must be >= -1 (or +inf)")


def internal_subtree_sizes(t: Sequence[int]) -> list[tuple[int, int]]:
    """For each internal node (label 2..n) the internal-node counts of its two
    child subtrees, in child creation order (0 for a leaf child)."""
    report = validate_code(t)
    if not report:
        raise InvalidShapeError(report.message)
    n = len(t) + 1
    children: dict[int, list[int]] = {v: [] for v in range(2, n + 1)}
    for k in range(1, len(t)):
        children[t[k]].append(k + 2)
    size = {}
    for v in range(n, 1, -1):
        size[v] = 1 + sum(size[c] for c in children[v])
    out = []
    for v in range(2, n + 1):
        sides = [size[c] for c in children[v]] + [0] * (2 - len(children[v]))
        out.append((sides[0], sides[1]))
    return out


def _log_split_ratio(a: int, b: int, beta: float) -> float:
    """log of B(a + beta + 1, b + beta + 1) / B(beta + 1, beta + 1)."""
    if beta == -1:
        if a == 0 and b == 0:
            return 0.0
        if a == 0 or b == 0:
            return -math.log(2)
        return -INF
    if beta == INF:
        return -(a + b) * math.log(2)
    x = beta + 1
    return (gammaln(a + x) + gammaln(b + x) - gammaln(a + b + 2 * x)) - (2 * gammaln(x) - gammaln(2 * x))


def blum_francois_logpmf(t: Sequence[int], beta: float) -> float:
    _check_beta(beta)
    n = len(t) + 1
    c = cherry_count(t)
    total = (n - 1 - c) * math.log(2)
    for a, b in internal_subtree_sizes(t):
        total += _log_split_ratio(a, b, beta)
    return float(total)


def blum_francois_pmf(t: Sequence[int], beta: float) -> float:
    return math.exp(blum_francois_logpmf(t, beta))


def yule_pmf(t: Sequence[int]) -> float:
    """Kingman/Yule probability ``2^(n-c-1) / (n-1)!``."""
    report = validate_code(t)
    if not report:
        raise InvalidShapeError(report.message)
    n = len(t) + 1
    c = cherry_count(t)
    return math.exp((n - c - 1) * math.log(2) - math.lgamma(n))


def sample_blum_francois(n: int, beta: float, seed=None) -> tuple[int, ...]:
    """Draw a ranked shape by routing each new split down from the root.

    Every internal node carries a Beta(beta+1, beta+1) probability of sending
    a new split to its first child; the split lands on the first leaf reached.
    beta = -1 uses fair 0/1 coins and beta = +inf the constant 1/2.
    """
    _check_beta(beta)
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = _rng(seed)

    def coin() -> float:
        if beta == -1:
            return float(rng.integers(0, 2))
        if beta == INF:
            return 0.5
        return float(rng.beta(beta + 1, beta + 1))

    # child slots per internal node: None marks a leaf
    slots: dict[int, list[int | None]] = {2: [None, None]}
    probs = {2: coin()}
    code = [1]
    for label in range(3, n + 1):
        node = 2
        while True:
            side = 0 if rng.random() < probs[node] else 1
            nxt = slots[node][side]
            if nxt is None:
                slots[node][side] = label
                break
            node = nxt
        code.append(node)
        slots[label] = [None, None]
        probs[label] = coin()
    return tuple(code)


def sample_yule(n: int, seed=None) -> tuple[int, ...]:
    return sample_blum_francois(n, 0.0, seed)


# ---------------------------------------------------------------------------
# Effective population size and coalescent times


@dataclass(frozen=True)
class PopSize:
    """Positive effective population size ``N_e(t)``, ``t`` time before present.

    ``intensity(a, b)`` returns the integral of ``1 / N_e`` over ``[a, b]``.
    ``breakpoints`` / ``period`` help the quadrature for piecewise forms.
    """

    name: str
    func: Callable[[float], float]
    constant: float | None = None
    period: float | None = None
    breakpoints: tuple[float, ...] = ()

    def __call__(self, t: float) -> float:
        value = self.constant if self.constant is not None else float(self.func(t))
        if not value > 0:
            raise ValueError(f"population size must be positive, got {value} at t={t}")
        return value

    def _quad(self, a: float, b: float) -> float:
        pts = [a] + [p for p in self.breakpoints if a < p < b] + [b]
        total = 0.0
        for lo, hi in zip(pts[:-1], pts[1:]):
            val, _ = integrate.quad(lambda u: 1.0 / self(u), lo, hi, epsabs=1e-10, epsrel=1e-10, limit=200)
            total += val
        return total

    def intensity(self, a: float, b: float) -> float:
        if b < a:
            return -self.intensity(b, a)
        if self.constant is not None:
            return (b - a) / self.constant
        if self.period is None:
            return self._quad(a, b)
        P = self.period
        # whole periods contribute a fixed amount
        start = math.floor(a / P) * P
        whole = math.floor((b - start) / P)
        if whole >= 2:
            per = self._quad(0.0, P)
            mid_lo = start + P
            mid_hi = start + whole * P
            return (self._periodic(a, mid_lo) + (whole - 1) * per + self._periodic(mid_hi, b))
        return self._periodic(a, b)

    def _periodic(self, a: float, b: float) -> float:
        if b <= a:
            return 0.0
        P = self.period
        shift = math.floor(a / P) * P
        lo, hi = a - shift, b - shift
        total = 0.0
        while hi > P + 1e-15:
            total += self._quad(lo, P)
            lo, hi = 0.0, hi - P
        return total + self._quad(lo, hi)


def constant_popsize(N0: float = 10000.0) -> PopSize:
    if not N0 > 0:
        raise ValueError("N0 must be positive")
    return PopSize("constant", lambda t: N0, constant=float(N0))


def exponential_popsize(N0: float = 10000.0, rate: float = 0.01) -> PopSize:
    return PopSize("exponential", lambda t: N0 * math.exp(-rate * t))


def _logistic(t: float) -> float:
    s = t % 12
    if s <= 6:
        return 1000 + 9000 / (1 + math.exp(6 - 2 * s))
    return 1000 + 9000 / (1 + math.exp(-18 + 2 * s))


def logistic_popsize() -> PopSize:
    return PopSize("logistic", _logistic, period=12.0, breakpoints=(6.0,))


def custom_popsize(func: Callable[[float], float], name: str = "custom") -> PopSize:
    return PopSize(name, func)


def builtin_popsize(name: str) -> PopSize:
    """The three trajectories used for simulated coalescent genealogies."""
    table = {
        "constant": constant_popsize,
        "exponential": exponential_popsize,
        "logistic": logistic_popsize,
    }
    if name not in table:
        raise ValueError(f"unknown population size model {name!r}; choose from {sorted(table)}")
    return table[name]()


def _next_event(pop: PopSize, start: float, target: float) -> float:
    """Solve ``intensity(start, x) = target`` for ``x > start``."""
    if pop.constant is not None:
        return start + target * pop.constant
    step = max(target * pop(start), 1e-12)
    hi = start + step
    while pop.intensity(start, hi) < target:
        step *= 2
        hi = start + step
    return optimize.brentq(lambda x: pop.intensity(start, x) - target, start, hi, xtol=1e-12, rtol=1e-14)


def sample_coalescent_times(n: int, pop: PopSize, seed=None) -> tuple[float, ...]:
    """Branching times ``(u_1, ..., u_{n-1})``, oldest first.

    With ``i`` lineages the next coalescence comes after an exponential amount
    of rescaled time, rate ``C(i, 2)``; it is mapped back through the inverse
    of the cumulative intensity of ``1 / N_e``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = _rng(seed)
    u = 0.0
    out = []
    for i in range(n, 1, -1):
        rate = i * (i - 1) / 2
        target = rng.exponential() / rate
        u = _next_event(pop, u, target)
        out.append(u)
    return tuple(reversed(out))


def sample_coalescent_genealogy(n: int, pop: PopSize, seed=None) -> RankedGenealogy:
    rng = _rng(seed)
    code = sample_yule(n, rng)
    return RankedGenealogy(code, sample_coalescent_times(n, pop, rng))


# ---------------------------------------------------------------------------
# Kingman moments


def kingman_mean(n: int) -> np.ndarray:
    """Dense ``E[F_ij] = j (j + 1) / i`` (lower triangle)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    k = n - 1
    i = np.arange(1, k + 1)[:, None].astype(float)
    j = np.arange(1, k + 1)[None, :].astype(float)
    return np.tril(j * (j + 1) / i)


def _check_index(n: int, i: int, j: int) -> None:
    if not (1 <= j <= i <= n - 1):
        raise IndexError(f"({i}, {j}) is not a lower-triangular index for n={n}")


def _row_cov(i: int, a: int, b: int) -> float:
    if i < 2:
        return 0.0
    a, b = min(a, b), max(a, b)
    return a * (a + 1) * ((b + 1) * (b + 2) + (i + 1) * (i - 2 * b - 2)) / (i * i * (i - 1))


def kingman_var(n: int, i: int, j: int) -> float:
    _check_index(n, i, j)
    if i < 2:
        return 0.0
    return j**2 * (j + 1) ** 2 / (i**2 * (i - 1)) + j * (j + 1) * (i - 2 * j - 1) / (i * (i - 1))


def kingman_cov(n: int, i1: int, j1: int, i2: int, j2: int) -> float:
    """Covariance of two F-matrix entries under the Kingman coalescent.

    Entries of the same row follow the external-branch indicator argument;
    for rows ``i1 > i2`` only columns ``j1 < i2`` are correlated with row
    ``i2``, and then ``Cov = (i2 / i1) Cov[F_{i2 j1}, F_{i2 j2}]``.
    """
    _check_index(n, i1, j1)
    _check_index(n, i2, j2)
    if i1 < i2:
        i1, j1, i2, j2 = i2, j2, i1, j1
    if i1 == i2:
        if j1 == j2:
            return kingman_var(n, i1, j1)
        return _row_cov(i1, j1, j2)
    if j1 >= i2:
        return 0.0
    return i2 / i1 * _row_cov(i2, j1, j2)


def free_coordinates(n: int) -> list[tuple[int, int]]:
    """Entries that are not fixed by the shape constraints (i >= 3, j <= i - 2)."""
    return [(i, j) for i in range(3, n) for j in range(1, i - 1)]


def kingman_covariance(n: int, coords: Sequence[tuple[int, int]] | None = None) -> np.ndarray:
    coords = free_coordinates(n) if coords is None else list(coords)
    S = np.empty((len(coords), len(coords)))
    for a, (i1, j1) in enumerate(coords):
        for b in range(a, len(coords)):
            i2, j2 = coords[b]
            S[a, b] = S[b, a] = kingman_cov(n, i1, j1, i2, j2)
    return S


class DegenerateSampleError(ValueError):
    """The reference covariance has rank zero on the free coordinates."""


@dataclass(frozen=True)
class CLTResult:
    coords: tuple[tuple[int, int], ...]
    residual: np.ndarray
    statistic: float
    rank: int
    m: int


def _pinv_sqrt(S: np.ndarray, rtol: float = 1e-10) -> tuple[np.ndarray, int]:
    vals, vecs = np.linalg.eigh((S + S.T) / 2)
    top = vals.max(initial=0.0)
    keep = vals > rtol * max(top, 0.0) if top > 0 else np.zeros_like(vals, dtype=bool)
    rank = int(keep.sum())
    inv_sqrt = (vecs[:, keep] / np.sqrt(vals[keep])) @ vecs[:, keep].T
    return inv_sqrt, rank


def clt_standardize(
    sample: Sequence[FMatrix],
    *,
    mean: np.ndarray | None = None,
    covariance: str | np.ndarray = "kingman",
) -> CLTResult:
    """Standardised residual ``Sigma^{-1/2} sqrt(m) (Fbar - M)`` on the free
    coordinates and its squared norm (asymptotically chi-square with ``rank``
    degrees of freedom).

    ``mean`` defaults to the Kingman mean; ``covariance`` is ``"kingman"``,
    ``"empirical"`` or an explicit matrix over :func:`free_coordinates`.
    """
    sample = list(sample)
    m = len(sample)
    if m < 2:
        raise ValueError("need at least two trees")
    n = sample[0].n
    if any(F.n != n for F in sample):
        raise ValueError("sample mixes leaf counts")
    coords = free_coordinates(n)
    if not coords:
        raise DegenerateSampleError(f"no free coordinates for n={n}")
    rows = np.array([i for i, _ in coords]) - 1
    cols = np.array([j for _, j in coords]) - 1
    X = np.stack([F.dense()[rows, cols] for F in sample]).astype(float)
    M = kingman_mean(n) if mean is None else np.asarray(mean, dtype=float)
    mu = M[rows, cols]
    if isinstance(covariance, str):
        if covariance == "kingman":
            S = kingman_covariance(n, coords)
        elif covariance == "empirical":
            S = np.cov(X, rowvar=False, ddof=1)
            S = np.atleast_2d(S)
        else:
            raise ValueError("covariance must be 'kingman', 'empirical' or a matrix")
    else:
        S = np.asarray(covariance, dtype=float)
    inv_sqrt, rank = _pinv_sqrt(S)
    if rank == 0:
        raise DegenerateSampleError("covariance has rank zero (all trees identical?)")
    residual = inv_sqrt @ (math.sqrt(m) * (X.mean(axis=0) - mu))
    return CLTResult(tuple(coords), residual, float(residual @ residual), rank, m)
