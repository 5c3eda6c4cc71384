"""
Plain-text formats.

F-matrix text::

    n 5
    2
    1 3
    0 2 4
    0 1 3 5

Tree corpus, one tree per line (``#`` starts a comment)::

    1 2 2 3                                  ranked shape (functional code)
    1 2 2 3 | 4 3 2 1                        isochronous genealogy
    t=1 2 2 3 3 ; sigma=1 1 0 1 0 0 0 | ...  heterochronous genealogy (node times)
"""

from __future__ import annotations

import csv
import io
from typing import Iterable, Sequence

import numpy as np

from .core import FMatrix, HeteroCode, code_to_fmatrix, fmatrix_to_code, validate_fmatrix
from .metrics import HeteroGenealogy, RankedGenealogy


class FormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


def fmt_number(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


# ---------------------------------------------------------------------------
# F-matrix text


def format_fmatrix(F) -> str:
    """Lower triangle, one row per line, under an ``n`` header."""
    if isinstance(F, FMatrix):
        rows = F.rows()
        n = F.n
    else:
        A = np.asarray(F)
        n = A.shape[0] + 1
        integral = np.issubdtype(A.dtype, np.integer)
        rows = [[int(v) if integral else float(v) for v in A[i, : i + 1]] for i in range(n - 1)]
    lines = [f"n {n}"] + [" ".join(fmt_number(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def parse_fmatrix(text: str) -> FMatrix:
    lines = [(k + 1, ln.strip()) for k, ln in enumerate(text.splitlines()) if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise FormatError("empty F-matrix file")
    lineno, head = lines[0]
    parts = head.split()
    if len(parts) != 2 or parts[0] != "n" or not parts[1].isdigit():
        raise FormatError("expected a header 'n <leaves>'", lineno)
    n = int(parts[1])
    body = lines[1:]
    if len(body) != n - 1:
        raise FormatError(f"expected {n - 1} rows, found {len(body)}", lineno)
    rows = []
    for i, (lineno, ln) in enumerate(body):
        try:
            row = [int(v) for v in ln.split()]
        except ValueError:
            raise FormatError("entries must be integers", lineno) from None
        if len(row) != i + 1:
            raise FormatError(f"row {i + 1} must have {i + 1} entries", lineno)
        rows.append(row)
    dense = np.zeros((n - 1, n - 1), dtype=np.int64)
    for i, row in enumerate(rows):
        dense[i, : i + 1] = row
    report = validate_fmatrix(dense)
    if not report:
        raise FormatError(f"not an F-matrix: {report.message}")
    return FMatrix.from_dense(dense)


# ---------------------------------------------------------------------------
# Corpus lines


def _ints(text: str, lineno: int | None) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split())
    except ValueError:
        raise FormatError(f"expected integers, got {text.strip()!r}", lineno) from None


def _floats(text: str, lineno: int | None) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split())
    except ValueError:
        raise FormatError(f"expected numbers, got {text.strip()!r}", lineno) from None


def format_code(code: Sequence[int]) -> str:
    return " ".join(str(int(v)) for v in code)


def format_tree(obj) -> str:
    if isinstance(obj, RankedGenealogy):
        return f"{format_code(obj.code)} | {' '.join(fmt_number(u) for u in obj.times)}"
    if isinstance(obj, HeteroGenealogy):
        c = obj.code
        times = " ".join(fmt_number(u) for u in obj.node_times)
        return f"t={format_code(c.t)} ; sigma={format_code(c.sigma)} | {times}"
    if isinstance(obj, FMatrix):
        return format_code(fmatrix_to_code(obj))
    return format_code(obj)


def parse_tree(line: str, lineno: int | None = None):
    """Parse one corpus line into an FMatrix, RankedGenealogy or HeteroGenealogy."""
    head, sep, tail = line.partition("|")
    try:
        if head.strip().startswith("t="):
            left, semi, right = head.partition(";")
            if not semi or not right.strip().startswith("sigma="):
                raise FormatError("expected 't=... ; sigma=...'", lineno)
            t = _ints(left.strip()[2:], lineno)
            sigma = _ints(right.strip()[6:], lineno)
            if not sep:
                raise FormatError("heterochronous lines need node times after '|'", lineno)
            return HeteroGenealogy(HeteroCode(t, sigma), _floats(tail, lineno))
        code = _ints(head, lineno)
        if not code:
            raise FormatError("empty code", lineno)
        if sep:
            return RankedGenealogy(code, _floats(tail, lineno))
        return code_to_fmatrix(code)
    except FormatError:
        raise
    except ValueError as e:
        raise FormatError(str(e), lineno) from None


def parse_corpus(text: str) -> list:
    out = []
    for k, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(parse_tree(line, k))
    return out


def format_corpus(objs: Iterable) -> str:
    return "".join(format_tree(x) + "\n" for x in objs)


# ---------------------------------------------------------------------------
# CSV


def matrix_csv(D: np.ndarray, header: Sequence[str] | None = None) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    if header is not None:
        w.writerow(header)
    for row in np.atleast_2d(D):
        w.writerow([fmt_number(v) for v in row])
    return buf.getvalue()


def read_labelled_matrix_csv(text: str) -> tuple[list[str] | None, np.ndarray]:
    """Matrix and its optional (non-numeric) header row."""
    rows, header = [], None
    for k, row in enumerate(csv.reader(io.StringIO(text)), start=1):
        if not row:
            continue
        try:
            rows.append([float(v) for v in row])
        except ValueError:
            if k == 1:
                header = row
                continue
            raise FormatError("non-numeric matrix entry", k) from None
    if not rows or len({len(r) for r in rows}) > 1:
        raise FormatError("matrix rows must be non-empty and of equal length")
    if header is not None and len(header) != len(rows[0]):
        raise FormatError("header length does not match the matrix", 1)
    return header, np.array(rows)


def read_matrix_csv(text: str) -> np.ndarray:
    return read_labelled_matrix_csv(text)[1]


def coordinates_csv(ids: Sequence[str], X: np.ndarray) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["id"] + [f"dim{c + 1}" for c in range(X.shape[1])])
    for name, row in zip(ids, X):
        w.writerow([name] + [fmt_number(v) for v in row])
    return buf.getvalue()
