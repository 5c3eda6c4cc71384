"""
Newick reading and writing, and conversion to ranked genealogies.

Only rooted binary trees are accepted. Tip labels may carry a sampling date
as a suffix (``name|2020-03-01`` by default). Node times are measured back
from the most recent tip using the branch lengths.
"""

from __future__ import annotations

import datetime as _dt
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .core import HeteroCode
from .metrics import HeteroGenealogy, RankedGenealogy

DEFAULT_DATE_DELIMITER = "|"
DEFAULT_RELATIVE_TOLERANCE = 1e-6
_SPECIAL = set("(),:;[]'")


class NewickError(ValueError):
    """Malformed Newick input; ``offset`` is a 0-based byte offset."""

    def __init__(self, message: str, offset: int, expected: str | None = None):
        self.reason = message
        self.offset = offset
        self.expected = expected
        detail = f" (expected {expected})" if expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class AmbiguousTimesError(ValueError):
    """Two events share a time after tolerance merging, so the ranking is undefined."""


@dataclass
class Node:
    label: str = ""
    length: float | None = None
    children: list["Node"] = field(default_factory=list)
    date: _dt.date | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["Node"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))


@dataclass
class LabelledTree:
    root: Node

    def leaves(self) -> list[Node]:
        return [v for v in self.root.walk() if v.is_leaf]

    @property
    def n(self) -> int:
        return len(self.leaves())

    def has_lengths(self) -> bool:
        return all(v.length is not None for v in self.root.walk() if v is not self.root)

    def node_times(self) -> dict[int, float]:
        """Time before the most recent tip for every node (keyed by ``id``)."""
        if not self.has_lengths():
            raise ValueError("every non-root branch needs a length to compute node times")
        depth = {id(self.root): 0.0}
        for v in self.root.walk():
            for c in v.children:
                depth[id(c)] = depth[id(v)] + c.length
        top = max(depth.values())
        return {k: top - d for k, d in depth.items()}


# ---------------------------------------------------------------------------
# Parsing


class _Parser:
    def __init__(self, text: str, date_delimiter: str | None):
        self.s = text
        self.i = 0
        self.delim = date_delimiter

    def skip(self):
        s = self.s
        while self.i < len(s):
            ch = s[self.i]
            if ch.isspace():
                self.i += 1
            elif ch == "[":
                end = s.find("]", self.i)
                if end < 0:
                    raise NewickError("unterminated comment", self.i, "']'")
                self.i = end + 1
            else:
                break

    def peek(self) -> str:
        self.skip()
        return self.s[self.i] if self.i < len(self.s) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            found = repr(self.peek()) if self.peek() else "end of input"
            raise NewickError(f"unexpected {found}", self.i, repr(ch))
        self.i += 1

    def label(self) -> str:
        self.skip()
        s = self.s
        if self.i < len(s) and s[self.i] == "'":
            start = self.i
            self.i += 1
            out = []
            while True:
                if self.i >= len(s):
                    raise NewickError("unterminated quoted label", start, "closing quote")
                if s[self.i] == "'":
                    if self.i + 1 < len(s) and s[self.i + 1] == "'":
                        out.append("'")
                        self.i += 2
                        continue
                    self.i += 1
                    return "".join(out)
                out.append(s[self.i])
                self.i += 1
        start = self.i
        while self.i < len(s) and s[self.i] not in _SPECIAL and not s[self.i].isspace():
            self.i += 1
        return s[start : self.i]

    def length(self) -> float | None:
        if self.peek() != ":":
            return None
        self.i += 1
        self.skip()
        start = self.i
        s = self.s
        while self.i < len(s) and (s[self.i] not in _SPECIAL and not s[self.i].isspace()):
            self.i += 1
        token = s[start : self.i]
        try:
            value = float(token)
        except ValueError:
            raise NewickError(f"malformed branch length {token!r}", start, "a number") from None
        if not np.isfinite(value) or value < 0:
            raise NewickError(f"branch length {token!r} must be finite and non-negative", start, "a non-negative number")
        return value

    def node(self, depth: int = 0) -> Node:
        if depth > 100_000:
            raise NewickError("tree is nested too deeply", self.i)
        if self.peek() == "(":
            self.i += 1
            children = [self.node(depth + 1)]
            while self.peek() == ",":
                if len(children) == 2:
                    raise NewickError("node has more than two children, only binary trees are supported", self.i, "')'")
                self.i += 1
                children.append(self.node(depth + 1))
            if self.peek() != ")":
                if self.peek() == "":
                    raise NewickError("unbalanced parentheses", self.i, "')'")
                raise NewickError(f"unexpected {self.peek()!r}", self.i, "',' or ')'")
            if len(children) != 2:
                raise NewickError("node has one child, only binary trees are supported", self.i, "','")
            self.i += 1
            v = Node(self.label(), None, children)
        else:
            at = self.i
            name = self.label()
            v = Node(name)
            v.date = self._date(name, at)
            if v.date is not None:
                v.label = name.rsplit(self.delim, 1)[0]
        v.length = self.length()
        return v

    def _date(self, name: str, at: int) -> _dt.date | None:
        if not self.delim or self.delim not in name:
            return None
        suffix = name.rsplit(self.delim, 1)[1]
        try:
            return _dt.date.fromisoformat(suffix)
        except ValueError:
            raise NewickError(f"malformed tip date {suffix!r}", at, "YYYY-MM-DD") from None

    def tree(self) -> LabelledTree:
        root = self.node()
        self.expect(";")
        if self.peek():
            raise NewickError("trailing characters after ';'", self.i, "end of input")
        return LabelledTree(root)


def parse_newick(text: str, *, date_delimiter: str | None = DEFAULT_DATE_DELIMITER) -> LabelledTree:
    """Parse one rooted binary Newick tree terminated by ``;``."""
    try:
        return _Parser(text, date_delimiter).tree()
    except RecursionError:
        raise NewickError("tree is nested too deeply", 0) from None
    except NewickError as e:
        # report byte offsets, not character offsets
        raise NewickError(e.reason, len(text[: e.offset].encode("utf-8")), e.expected) from None


def split_newick(text: str) -> list[str]:
    """Split a multi-tree string into single-tree strings (quotes and comments aware)."""
    out, start, i, quoted, comment = [], 0, 0, False, False
    while i < len(text):
        ch = text[i]
        if comment:
            comment = ch != "]"
        elif ch == "'":
            quoted = not quoted
        elif not quoted and ch == "[":
            comment = True
        elif not quoted and ch == ";":
            out.append(text[start : i + 1].strip())
            start = i + 1
        i += 1
    if text[start:].strip():
        out.append(text[start:].strip())
    return out


# ---------------------------------------------------------------------------
# Writing


def _fmt(x: float) -> str:
    x = float(x)
    return str(int(x)) if x.is_integer() and abs(x) < 1e15 else repr(x)


def _quote(label: str) -> str:
    if not label:
        return ""
    if any(c in _SPECIAL or c.isspace() for c in label):
        return "'" + label.replace("'", "''") + "'"
    return label


def emit_newick(tree: LabelledTree, *, date_delimiter: str = DEFAULT_DATE_DELIMITER) -> str:
    def rec(v: Node) -> str:
        label = v.label
        if v.date is not None:
            label = f"{label}{date_delimiter}{v.date.isoformat()}"
        head = "(" + ",".join(rec(c) for c in v.children) + ")" if v.children else ""
        tail = f":{_fmt(v.length)}" if v.length is not None else ""
        return head + _quote(label) + tail

    return rec(tree.root) + ";"


def _tree_from_parents(parents: list[int | None], times: list[float]) -> LabelledTree:
    nodes = [Node() for _ in parents]
    for k, par in enumerate(parents):
        if par is not None:
            nodes[k].length = times[par] - times[k]
            nodes[par].children.append(nodes[k])
    return LabelledTree(nodes[parents.index(None)])


def genealogy_to_tree(G) -> LabelledTree:
    """Unlabelled tree with the genealogy's times (leaves at their sampling times)."""
    if isinstance(G, HeteroGenealogy):
        code, times = G.code, list(G.node_times)
    elif isinstance(G, RankedGenealogy):
        code = HeteroGenealogy.from_isochronous(G).code
        times = list(G.times) + [0.0] * G.n
    else:
        raise TypeError("expected a RankedGenealogy or HeteroGenealogy")
    # position of each internal label
    label_pos, label = {}, 1
    for pos, s in enumerate(code.sigma):
        if s:
            label += 1
            label_pos[label] = pos
    parents = [None] + [label_pos[code.t[p]] for p in range(1, len(code.t))]
    return _tree_from_parents(parents, times)


def shape_to_tree(code) -> LabelledTree:
    """Unlabelled tree for a ranked shape with unit-spaced times."""
    n = len(code) + 1
    return genealogy_to_tree(RankedGenealogy(tuple(code), tuple(float(n - 1 - k) for k in range(n - 1))))


def to_newick(obj) -> str:
    if isinstance(obj, (RankedGenealogy, HeteroGenealogy)):
        return emit_newick(genealogy_to_tree(obj))
    return emit_newick(shape_to_tree(tuple(obj)))


# ---------------------------------------------------------------------------
# Ranking


def to_ranked(tree: LabelledTree, *, rel_tol: float = DEFAULT_RELATIVE_TOLERANCE):
    """Discard labels and rank internal nodes by decreasing time.

    Tips within ``rel_tol * height`` of one another form one sampling event;
    a single event gives a :class:`RankedGenealogy`, several give a
    :class:`HeteroGenealogy`. Internal nodes (or an internal node and a
    sampling event) closer than the tolerance raise
    :class:`AmbiguousTimesError`.
    """
    times = tree.node_times()
    nodes = list(tree.root.walk())
    if len(nodes) < 3:
        raise ValueError("need at least two tips")
    height = times[id(tree.root)]
    tol = rel_tol * height
    if height <= 0:
        raise AmbiguousTimesError("tree has zero height")

    leaves = [v for v in nodes if v.is_leaf]
    internal = [v for v in nodes if not v.is_leaf]
    # merge tip times into sampling events, most recent first
    order = sorted(leaves, key=lambda v: times[id(v)])
    groups: list[list[Node]] = []
    for v in order:
        if groups and times[id(v)] - times[id(groups[-1][0])] <= tol:
            groups[-1].append(v)
        else:
            groups.append([v])
    event_time = {}
    for g_idx, g in enumerate(groups):
        t = 0.0 if g_idx == 0 else float(np.mean([times[id(v)] for v in g]))
        for v in g:
            event_time[id(v)] = t

    internal.sort(key=lambda v: -times[id(v)])
    itimes = [times[id(v)] for v in internal]
    for a, b in zip(itimes, itimes[1:]):
        if a - b <= tol:
            raise AmbiguousTimesError(f"internal nodes at times {a!r} and {b!r} cannot be ranked")
    leaf_times = sorted({event_time[id(v)] for v in leaves})
    for a in itimes:
        for b in leaf_times:
            if abs(a - b) <= tol:
                raise AmbiguousTimesError(f"internal node at time {a!r} coincides with a sampling event")

    label = {id(v): k + 2 for k, v in enumerate(internal)}
    parent = {}
    for v in nodes:
        for c in v.children:
            parent[id(c)] = v

    if len(groups) == 1:
        code = [1] + [label[id(parent[id(v)])] for v in internal[1:]]
        return RankedGenealogy(tuple(code), tuple(itimes))

    events = [(times[id(v)], 1, label[id(v)], v) for v in internal]
    events += [(event_time[id(v)], 0, 0, v) for v in leaves]

    def key(e):
        t, is_int, lab, v = e
        par = label[id(parent[id(v)])] if id(v) in parent else 1
        # internal nodes by rank; tips of one event by parent label
        return (-t, 0 if is_int else 1, lab if is_int else par)

    events.sort(key=key)
    t_code, sigma, node_times = [], [], []
    for t, is_int, lab, v in events:
        t_code.append(label[id(parent[id(v)])] if id(v) in parent else 1)
        sigma.append(is_int)
        node_times.append(t)
    return HeteroGenealogy(HeteroCode(tuple(t_code), tuple(sigma)), tuple(node_times))


def read_newick_trees(text: str, **kwargs) -> list[LabelledTree]:
    return [parse_newick(chunk, **kwargs) for chunk in split_newick(text)]
