"""
Encodings of ranked tree shapes.

A ranked tree shape with ``n`` leaves is held in three interchangeable forms:

* the functional code ``t`` (a tuple of ``n - 1`` integers, ``t[k-1]`` is the
  label of the parent of internal node ``k + 1``; the root is node 2 and
  ``t[0] == 1`` is a sentinel),
* the D-matrix, counting for every internal node how many of its two child
  branches are still unsplit at the end of each interval,
* the F-matrix, the column-wise partial sums of the D-matrix.

All public functions use the 1-based row/column convention of the F-matrix
literature at the boundary; storage is a flat row-major lower triangle.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

DEFAULT_ENUMERATION_CAP = 12


class CapacityError(ValueError):
    """Raised when an exhaustive operation is requested above the size cap."""


class InvalidShapeError(ValueError):
    """Raised when a code or matrix does not encode a ranked tree shape."""


@dataclass(frozen=True)
class Report:
    """Outcome of a validation; falsy when a constraint is violated."""

    ok: bool
    constraint: str | None = None
    index: tuple[int, ...] | None = None
    message: str = ""

    def __bool__(self) -> bool:
        return self.ok

    @classmethod
    def fail(cls, constraint: str, index: tuple[int, ...], message: str) -> "Report":
        return cls(False, constraint, index, message)


OK = Report(True)


def tri_size(n: int) -> int:
    """Number of stored entries for an F-matrix with ``n`` leaves."""
    return n * (n - 1) // 2


def _offset(i: int, j: int) -> int:
    # 1-based (i, j), j <= i
    return (i - 1) * i // 2 + (j - 1)


class FMatrix:
    """Immutable F-matrix of a ranked tree shape with ``n`` leaves.

    Entries are addressed with 1-based ``(i, j)``, ``1 <= j <= i <= n - 1``;
    indexing above the diagonal returns 0.
    """

    __slots__ = ("n", "_data", "_hash")

    def __init__(self, n: int, data: Iterable[int], *, _trusted: bool = False):
        arr = np.array(data, dtype=np.int64).ravel()
        if arr.size != tri_size(n):
            raise ValueError(f"expected {tri_size(n)} entries for n={n}, got {arr.size}")
        arr.setflags(write=False)
        self.n = n
        self._data = arr
        self._hash = None
        if not _trusted:
            report = validate_fmatrix(self.dense())
            if not report:
                raise InvalidShapeError(report.message)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]]) -> "FMatrix":
        for i, row in enumerate(rows, start=1):
            if len(row) != i:
                raise ValueError(f"row {i} must have {i} entries, got {len(row)}")
        flat = [x for row in rows for x in row]
        return cls(len(rows) + 1, flat)

    @classmethod
    def from_dense(cls, matrix) -> "FMatrix":
        m = np.asarray(matrix)
        k = m.shape[0]
        return cls(k + 1, m[np.tril_indices(k)])

    @property
    def flat(self) -> np.ndarray:
        """Read-only row-major lower triangle."""
        return self._data

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        if not (1 <= i <= self.n - 1 and 1 <= j <= self.n - 1):
            raise IndexError(f"index {ij} out of range for n={self.n}")
        if j > i:
            return 0
        return int(self._data[_offset(i, j)])

    def rows(self) -> list[list[int]]:
        out, pos = [], 0
        for i in range(1, self.n):
            out.append([int(x) for x in self._data[pos : pos + i]])
            pos += i
        return out

    def dense(self) -> np.ndarray:
        k = self.n - 1
        m = np.zeros((k, k), dtype=np.int64)
        m[np.tril_indices(k)] = self._data
        return m

    def column_vector(self) -> tuple[int, ...]:
        """Entries listed column by column, top to bottom (lexicographic key)."""
        d = self.dense()
        k = self.n - 1
        return tuple(int(d[i, j]) for j in range(k) for i in range(j, k))

    def __eq__(self, other) -> bool:
        if not isinstance(other, FMatrix):
            return NotImplemented
        return self.n == other.n and np.array_equal(self._data, other._data)

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.n, self._data.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        return f"FMatrix(n={self.n}, rows={self.rows()})"


# ---------------------------------------------------------------------------
# Validation


def validate_fmatrix(entries) -> Report:
    """Check a square lower-triangular integer matrix against the F-matrix
    constraints. Indices in the report are 1-based."""
    m = np.asarray(entries)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        return Report.fail("shape", (), "matrix must be square with size >= 1")
    if not np.all(np.equal(np.mod(m, 1), 0)):
        return Report.fail("integer", (), "entries must be integers")
    m = m.astype(np.int64)
    k = m.shape[0]
    upper = np.triu_indices(k, 1)
    if np.any(m[upper] != 0):
        bad = np.argwhere(np.triu(m, 1) != 0)[0]
        return Report.fail("lower-triangular", (int(bad[0]) + 1, int(bad[1]) + 1),
                           "entries above the diagonal must be zero")
    neg = np.argwhere(m < 0)
    if neg.size:
        return Report.fail("non-negative", (int(neg[0][0]) + 1, int(neg[0][1]) + 1),
                           "entries must be non-negative")

    def F(i, j):
        return int(m[i - 1, j - 1])

    for i in range(1, k + 1):
        if F(i, i) != i + 1:
            return Report.fail("constraint 1", (i, i), f"F[{i},{i}] must equal {i + 1}")
    for i in range(1, k):
        if F(i + 1, i) != i:
            return Report.fail("constraint 1", (i + 1, i), f"F[{i + 1},{i}] must equal {i}")
    for i in range(3, k + 1):
        lo, hi = max(0, F(i - 1, 1) - 1), F(i - 1, 1)
        if not lo <= F(i, 1) <= hi:
            return Report.fail("constraint 2", (i, 1), f"F[{i},1] must lie in [{lo}, {hi}]")
    for i in range(4, k + 1):
        for c in range(2, i - 1):
            x = F(i, c)
            step = F(i, c - 1) + F(i - 1, c) - F(i - 1, c - 1)
            if x < max(0, F(i, c - 1)):
                return Report.fail("constraint 3", (i, c), f"F[{i},{c}] below row predecessor")
            if not F(i - 1, c) - 1 <= x <= F(i - 1, c):
                return Report.fail("constraint 3", (i, c), f"F[{i},{c}] not within 1 of F[{i - 1},{c}]")
            if not step - 1 <= x <= step:
                return Report.fail("constraint 3", (i, c), f"F[{i},{c}] breaks the increment bound")
    return OK


def validate_code(t: Sequence[int]) -> Report:
    """Check a functional code (1-based positions in the report)."""
    if len(t) < 1:
        return Report.fail("length", (), "code must have at least one entry")
    if t[0] != 1:
        return Report.fail("property 1", (1,), "t[1] must be 1")
    seen: dict[int, int] = {}
    for pos, v in enumerate(t[1:], start=2):
        if not isinstance(v, (int, np.integer)) or not 2 <= v <= pos:
            return Report.fail("property 2", (pos,), f"t[{pos}]={v} must lie in [2, {pos}]")
        seen[v] = seen.get(v, 0) + 1
        if seen[v] > 2:
            return Report.fail("property 3", (pos,), f"value {v} appears more than twice")
    return OK


def _require(report: Report) -> None:
    if not report:
        raise InvalidShapeError(f"{report.constraint} at {report.index}: {report.message}")


# ---------------------------------------------------------------------------
# Conversions


def code_to_dmatrix(t: Sequence[int]) -> np.ndarray:
    """Dense 0-based D-matrix: D[i, j] is the number of child branches of
    internal node j + 2 not yet split at the end of interval i + 1."""
    _require(validate_code(t))
    k = len(t)
    D = np.zeros((k, k), dtype=np.int64)
    for i in range(k):
        if i > 0:
            D[i, :i] = D[i - 1, :i]
            # node i + 2 splits a child branch of its parent t[i]
            D[i, t[i] - 2] -= 1
        D[i, i] = 2
    return D


def code_to_fmatrix(t: Sequence[int]) -> FMatrix:
    D = code_to_dmatrix(t)
    F = np.cumsum(D, axis=1)
    k = len(t)
    return FMatrix(k + 1, F[np.tril_indices(k)], _trusted=True)


def fmatrix_to_code(F: FMatrix) -> tuple[int, ...]:
    if not isinstance(F, FMatrix):
        F = FMatrix.from_dense(F)
    dense = F.dense()
    D = np.diff(dense, axis=1, prepend=0)
    t = [1]
    for i in range(1, F.n - 1):
        drop = np.flatnonzero(D[i - 1, :i] - D[i, :i] == 1)
        if drop.size != 1:
            raise InvalidShapeError(f"row {i + 1} does not split exactly one branch")
        t.append(int(drop[0]) + 2)
    return tuple(t)


def cherry_count(t: Sequence[int]) -> int:
    """Internal nodes whose two children are both leaves."""
    n = len(t) + 1
    return len(set(range(2, n + 1)) - set(t[1:]))


def unbalanced_fmatrix(n: int) -> FMatrix:
    if n < 2:
        raise ValueError("n must be at least 2")
    rows = [[j if j < i else i + 1 for j in range(1, i + 1)] for i in range(1, n)]
    return FMatrix.from_rows(rows)


def balanced_fmatrix(n: int) -> FMatrix:
    if n < 2:
        raise ValueError("n must be at least 2")
    rows = [[max(0, 2 * j - i + 1) for j in range(1, i + 1)] for i in range(1, n)]
    return FMatrix.from_rows(rows)


def caterpillar_code(n: int) -> tuple[int, ...]:
    return tuple([1] + list(range(2, n)))


# ---------------------------------------------------------------------------
# Enumeration


@functools.lru_cache(maxsize=None)
def zigzag(k: int) -> int:
    """Euler zigzag number A000111(k), via the boustrophedon (Seidel) triangle."""
    if k < 0:
        raise ValueError("k must be non-negative")
    row = [1]
    for m in range(1, k + 1):
        new = [0]
        for x in reversed(row):
            new.append(new[-1] + x)
        row = new
    return row[-1]


def _fmatrix_rows(n: int) -> Iterator[list[list[int]]]:
    """Depth-first generation of F-matrix rows under the F-matrix constraints."""
    k = n - 1
    rows: list[list[int]] = [[2]]
    if k == 1:
        yield [list(r) for r in rows]
        return

    def extend(i: int):
        # build row i (1-based) from row i - 1
        if i > k:
            yield [list(r) for r in rows]
            return
        prev = rows[-1]
        if i == 2:
            rows.append([1, 3])
            yield from extend(i + 1)
            rows.pop()
            return
        row = [0] * i
        row[i - 2] = i - 1
        row[i - 1] = i + 1

        def fill(c: int):
            # c is the 0-based column being filled, free columns are 0..i-3
            if c > i - 3:
                rows.append(list(row))
                yield from extend(i + 1)
                rows.pop()
                return
            if c == 0:
                lo, hi = max(0, prev[0] - 1), prev[0]
            else:
                step = row[c - 1] + prev[c] - prev[c - 1]
                lo = max(0, row[c - 1], prev[c] - 1, step - 1)
                hi = min(prev[c], step)
            for v in range(lo, hi + 1):
                row[c] = v
                yield from fill(c + 1)

        yield from fill(0)

    yield from extend(2)


def enumerate_shapes(n: int, *, cap: int = DEFAULT_ENUMERATION_CAP) -> list[FMatrix]:
    """All F-matrices with ``n`` leaves in constraint-DFS order."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if n > cap:
        raise CapacityError(f"n={n} exceeds the enumeration cap {cap} ({zigzag(n - 1)} shapes)")
    return [FMatrix.from_rows(rows) for rows in _fmatrix_rows(n)]


def enumerate_codes(n: int, *, cap: int = DEFAULT_ENUMERATION_CAP) -> list[tuple[int, ...]]:
    """All functional codes with ``n`` leaves, generated directly on codes."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if n > cap:
        raise CapacityError(f"n={n} exceeds the enumeration cap {cap}")
    out: list[tuple[int, ...]] = []
    counts = [0] * (n + 1)
    code = [1]

    def rec(pos: int):
        if pos == n:
            out.append(tuple(code))
            return
        for v in range(2, pos + 1):
            if counts[v] < 2:
                counts[v] += 1
                code.append(v)
                rec(pos + 1)
                code.pop()
                counts[v] -= 1

    rec(2)
    return out


# ---------------------------------------------------------------------------
# Heterochronous codes


@dataclass(frozen=True)
class HeteroCode:
    """Pair ``(t, sigma)`` over all ``2n - 1`` nodes in order of creation
    (root first); ``sigma[k] == 1`` marks an internal node, 0 a leaf."""

    t: tuple[int, ...]
    sigma: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "t", tuple(int(x) for x in self.t))
        object.__setattr__(self, "sigma", tuple(int(x) for x in self.sigma))

    @property
    def n(self) -> int:
        return (len(self.t) + 1) // 2

    def iso_subcode(self) -> tuple[int, ...]:
        return tuple(v for v, s in zip(self.t, self.sigma) if s == 1)

    def validate(self) -> Report:
        return validate_hetero_code(self.t, self.sigma)


def validate_hetero_code(t: Sequence[int], sigma: Sequence[int]) -> Report:
    if len(t) != len(sigma):
        return Report.fail("length", (), "t and sigma must have equal length")
    if len(t) < 3 or len(t) % 2 == 0:
        return Report.fail("length", (), "length must be 2n - 1 with n >= 2")
    n = (len(t) + 1) // 2
    if any(s not in (0, 1) for s in sigma):
        return Report.fail("sigma", (), "sigma must be a 0/1 string")
    if t[0] != 1 or sigma[0] != 1:
        return Report.fail("property 1", (1,), "t[1] and sigma[1] must be 1")
    ones = sum(sigma)
    if ones != n - 1:
        return Report.fail("property 2", (), f"sigma has {ones} ones, expected {n - 1}")
    if len(sigma) - ones != n:
        return Report.fail("property 3", (), f"sigma has {len(sigma) - ones} zeros, expected {n}")
    counts: dict[int, int] = {}
    for v in t[1:]:
        counts[v] = counts.get(v, 0) + 1
    for label in range(2, n + 1):
        if counts.get(label, 0) != 2:
            return Report.fail("property 4", (label,), f"label {label} occurs {counts.get(label, 0)} times")
    extra = set(counts) - set(range(2, n + 1))
    if extra:
        return Report.fail("property 4", (min(extra),), f"label {min(extra)} is not an internal node")
    internal = sigma[0]
    for pos in range(2, len(t) + 1):
        if not 2 <= t[pos - 1] <= 1 + internal:
            return Report.fail("property 5", (pos,), f"t[{pos}]={t[pos - 1]} must lie in [2, {1 + internal}]")
        internal += sigma[pos - 1]
    return OK


def iso_hetero_code(t: Sequence[int]) -> HeteroCode:
    """Heterochronous encoding of an isochronous shape: all leaves sampled last."""
    _require(validate_code(t))
    n = len(t) + 1
    leaves = []
    for label in range(2, n + 1):
        leaves.extend([label] * (2 - list(t[1:]).count(label)))
    return HeteroCode(tuple(t) + tuple(sorted(leaves)), (1,) * (n - 1) + (0,) * n)


def leaf_runs(sigma: Sequence[int]) -> list[int]:
    """Sizes of maximal runs of consecutive leaves (default sampling events)."""
    runs, cur = [], 0
    for s in sigma:
        if s == 0:
            cur += 1
        elif cur:
            runs.append(cur)
            cur = 0
    if cur:
        runs.append(cur)
    return runs


def event_structure(code: HeteroCode, group_sizes: Sequence[int] | None = None) -> tuple[list[str], list[int]]:
    """Collapse the node sequence into events.

    Returns ``(kinds, node_event)``: ``kinds`` lists ``'c'`` (coalescent) or
    ``'s'`` (sampling) per event, oldest first; ``node_event[p]`` is the
    0-based event index of node position ``p``. Consecutive leaves are grouped
    into sampling events of sizes ``group_sizes`` (default: maximal runs).
    """
    if group_sizes is None:
        group_sizes = leaf_runs(code.sigma)
    groups = list(group_sizes)
    if sum(groups) != code.n or any(g < 1 for g in groups):
        raise ValueError("sampling group sizes must be positive and sum to n")
    kinds: list[str] = []
    node_event: list[int] = []
    remaining = 0
    gi = 0
    for s in code.sigma:
        if s == 1:
            if remaining:
                raise ValueError("sampling group straddles a coalescent event")
            kinds.append("c")
            node_event.append(len(kinds) - 1)
        else:
            if remaining == 0:
                remaining = groups[gi]
                gi += 1
                kinds.append("s")
            node_event.append(len(kinds) - 1)
            remaining -= 1
    if kinds[-1] != "s":
        raise ValueError("the most recent event must be a sampling event")
    return kinds, node_event


def branch_fmatrix(births: Sequence[int], ends: Sequence[int], n_events: int) -> np.ndarray:
    """Dense F over ``n_events - 1`` intervals from branch birth/end events.

    Interval ``r`` (0-based) lies between events ``r`` and ``r + 1``; entry
    ``[r, c]`` counts branches alive in interval ``c`` and still alive in
    interval ``r``, i.e. born at event ``<= c`` and ending at event ``> r``.
    """
    k = n_events - 1
    A = np.zeros((n_events, n_events), dtype=np.int64)
    np.add.at(A, (np.asarray(births), np.asarray(ends)), 1)
    # S[b, e] = #branches with birth <= b and end >= e
    S = np.cumsum(A, axis=0)
    S = np.cumsum(S[:, ::-1], axis=1)[:, ::-1]
    F = np.zeros((k, k), dtype=np.int64)
    for r in range(k):
        F[r, : r + 1] = S[: r + 1, r + 1]
    return F


def hetero_fmatrix(code: HeteroCode, group_sizes: Sequence[int] | None = None) -> np.ndarray:
    """Extended (dense, 0-based) F-matrix of a heterochronous ranked shape."""
    _require(code.validate())
    kinds, node_event = event_structure(code, group_sizes)
    # internal node label -> position of its creation
    label_pos = {}
    label = 1
    for pos, s in enumerate(code.sigma):
        if s == 1:
            label += 1
            label_pos[label] = pos
    births = [node_event[label_pos[code.t[p]]] for p in range(1, len(code.t))]
    ends = [node_event[p] for p in range(1, len(code.t))]
    return branch_fmatrix(births, ends, len(kinds))


def enumerate_hetero_codes(sigma: Sequence[int], *, cap: int = DEFAULT_ENUMERATION_CAP) -> list[HeteroCode]:
    """All valid ``t`` for a fixed ``sigma``, in lexicographic order of ``t``."""
    sigma = tuple(int(s) for s in sigma)
    n = (len(sigma) + 1) // 2
    if n > cap:
        raise CapacityError(f"n={n} exceeds the enumeration cap {cap}")
    probe = validate_hetero_code((1,) + (2,) * (len(sigma) - 1), sigma)
    if not probe and probe.constraint in ("length", "sigma", "property 1", "property 2", "property 3"):
        raise InvalidShapeError(probe.message)
    out: list[HeteroCode] = []
    t = [1]
    counts = [0] * (n + 2)

    def rec(pos: int, internal: int):
        if pos == len(sigma):
            out.append(HeteroCode(tuple(t), sigma))
            return
        for v in range(2, internal + 2):
            if counts[v] < 2:
                counts[v] += 1
                t.append(v)
                rec(pos + 1, internal + sigma[pos])
                t.pop()
                counts[v] -= 1

    rec(1, sigma[0])
    return out
