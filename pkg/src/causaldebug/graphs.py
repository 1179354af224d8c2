"""Mixed graphs: partial ancestral graphs (PAGs) and ADMGs, plus export.

A PAG stores endpoint marks in a square matrix ``marks`` where
``marks[i, j]`` is the mark at ``j`` on the edge between ``i`` and ``j``
(0 when the nodes are not adjacent).  ``i -> j`` is therefore
``marks[i, j] == ARROW`` and ``marks[j, i] == TAIL``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data_model import TIER, Schema, VariableKind


class EndpointMark(enum.IntEnum):
    CIRCLE = 1
    ARROW = 2
    TAIL = 3


NO_EDGE = 0
CIRCLE, ARROW, TAIL = EndpointMark.CIRCLE, EndpointMark.ARROW, EndpointMark.TAIL

_MARK_NAMES = {CIRCLE: "circle", ARROW: "arrow", TAIL: "tail"}
_MARK_FROM_NAME = {v: k for k, v in _MARK_NAMES.items()}
_DOT_SHAPES = {CIRCLE: "odot", ARROW: "normal", TAIL: "none"}


@dataclass(frozen=True)
class MixedEdge:
    a: int
    b: int
    mark_at_a: EndpointMark
    mark_at_b: EndpointMark

    def __post_init__(self):
        if self.a == self.b:
            raise ValueError("self-loops are not allowed")

    def symbol(self) -> str:
        left = {CIRCLE: "o", ARROW: "<", TAIL: "-"}[self.mark_at_a]
        right = {CIRCLE: "o", ARROW: ">", TAIL: "-"}[self.mark_at_b]
        return f"{left}-{right}"


def _pair(i: int, j: int) -> frozenset:
    return frozenset((int(i), int(j)))


class Pag:
    """Partial ancestral graph over the variables of a schema."""

    def __init__(self, names: Sequence[str], kinds: Sequence[VariableKind], marks=None, sepsets=None):
        self.names = tuple(names)
        self.kinds = tuple(kinds)
        p = len(self.names)
        self.marks = np.zeros((p, p), dtype=np.int8) if marks is None else np.array(marks, dtype=np.int8)
        if self.marks.shape != (p, p) or np.any(np.diag(self.marks) != 0):
            raise ValueError("mark matrix must be square with an empty diagonal")
        self.sepsets: dict[frozenset, frozenset] = dict(sepsets or {})
        self.tests: dict = {}
        self.log: list[str] = []

    @classmethod
    def from_schema(cls, schema: Schema) -> "Pag":
        return cls(schema.names, [v.kind for v in schema])

    @property
    def n_nodes(self) -> int:
        return len(self.names)

    @property
    def tiers(self) -> list[int]:
        return [TIER[k] for k in self.kinds]

    def copy(self) -> "Pag":
        g = Pag(self.names, self.kinds, self.marks.copy(), self.sepsets)
        g.tests = dict(self.tests)
        g.log = list(self.log)
        return g

    def index(self, node) -> int:
        return self.names.index(node) if isinstance(node, str) else int(node)

    def is_adjacent(self, i: int, j: int) -> bool:
        return self.marks[i, j] != NO_EDGE

    def neighbors(self, i: int) -> list[int]:
        return np.flatnonzero(self.marks[i] != NO_EDGE).tolist()

    def mark(self, at: int, other: int) -> int:
        """Mark at node ``at`` on the edge ``other *-* at``."""
        return int(self.marks[other, at])

    def add_edge(self, i: int, j: int, mark_i=CIRCLE, mark_j=CIRCLE) -> None:
        self.marks[j, i] = mark_i
        self.marks[i, j] = mark_j

    def remove_edge(self, i: int, j: int) -> None:
        self.marks[i, j] = NO_EDGE
        self.marks[j, i] = NO_EDGE

    def sepset(self, i: int, j: int) -> frozenset | None:
        return self.sepsets.get(_pair(i, j))

    def set_sepset(self, i: int, j: int, s: Iterable[int]) -> None:
        self.sepsets[_pair(i, j)] = frozenset(int(k) for k in s)

    def edges(self) -> list[MixedEdge]:
        out = []
        p = self.n_nodes
        for i in range(p):
            for j in range(i + 1, p):
                if self.marks[i, j] != NO_EDGE:
                    out.append(MixedEdge(i, j, EndpointMark(self.marks[j, i]), EndpointMark(self.marks[i, j])))
        return out

    def n_edges(self) -> int:
        return int(np.count_nonzero(self.marks)) // 2

    def circle_edges(self) -> list[MixedEdge]:
        return [e for e in self.edges() if CIRCLE in (e.mark_at_a, e.mark_at_b)]

    def to_json(self) -> dict:
        return _graph_json(self.names, self.edges())

    def to_dot(self) -> str:
        return _graph_dot(self.names, self.edges())

    @classmethod
    def from_json(cls, obj, kinds: Sequence[VariableKind] | None = None) -> "Pag":
        names = obj["nodes"]
        if kinds is None:
            kinds = [VariableKind(k) for k in obj.get("kinds", [VariableKind.SYSTEM_EVENT.value] * len(names))]
        g = cls(names, kinds)
        for e in obj["edges"]:
            g.add_edge(names.index(e["a"]), names.index(e["b"]), _MARK_FROM_NAME[e["mark_a"]], _MARK_FROM_NAME[e["mark_b"]])
        return g

    def __repr__(self):
        body = ", ".join(f"{self.names[e.a]} {e.symbol()} {self.names[e.b]}" for e in self.edges())
        return f"Pag({body})"


class Admg:
    """Acyclic directed mixed graph: directed plus bidirected edges."""

    def __init__(self, names: Sequence[str], kinds: Sequence[VariableKind], directed=(), bidirected=()):
        self.names = tuple(names)
        self.kinds = tuple(kinds)
        p = len(self.names)
        self.directed = frozenset((int(i), int(j)) for i, j in directed)
        self.bidirected = frozenset(tuple(sorted((int(i), int(j)))) for i, j in bidirected)
        for i, j in self.directed | self.bidirected:
            if i == j or not (0 <= i < p and 0 <= j < p):
                raise ValueError(f"invalid edge ({i}, {j})")
        overlap = {tuple(sorted(e)) for e in self.directed} & self.bidirected
        if overlap or any((j, i) in self.directed for i, j in self.directed):
            raise ValueError("at most one edge per pair")
        self._parents = [tuple(sorted(i for i, j in self.directed if j == v)) for v in range(p)]
        self._children = [tuple(sorted(j for i, j in self.directed if i == v)) for v in range(p)]
        self._order = self._topological_order()
        if self._order is None:
            raise ValueError("directed part of an ADMG must be acyclic")
        self.log: list[str] = []

    @property
    def n_nodes(self) -> int:
        return len(self.names)

    @property
    def tiers(self) -> list[int]:
        return [TIER[k] for k in self.kinds]

    def index(self, node) -> int:
        return self.names.index(node) if isinstance(node, str) else int(node)

    def parents(self, v: int) -> tuple[int, ...]:
        return self._parents[v]

    def children(self, v: int) -> tuple[int, ...]:
        return self._children[v]

    def spouses(self, v: int) -> tuple[int, ...]:
        return tuple(sorted({j for e in self.bidirected if v in e for j in e if j != v}))

    def topological_order(self) -> list[int]:
        return list(self._order)

    def _topological_order(self):
        indeg = [len(ps) for ps in self._parents]
        ready = sorted(v for v in range(self.n_nodes) if indeg[v] == 0)
        order = []
        while ready:
            v = ready.pop(0)
            order.append(v)
            for c in self._children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
            ready.sort()
        return order if len(order) == self.n_nodes else None

    def ancestors(self, targets: Iterable[int], cut: Iterable[int] = ()) -> set[int]:
        """Ancestors of ``targets`` (inclusive); edges into ``cut`` nodes are ignored."""
        cut = set(cut)
        seen = set()
        stack = list(targets)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            if v not in cut:
                stack.extend(self._parents[v])
        return seen

    def descendants(self, sources: Iterable[int]) -> set[int]:
        seen = set()
        stack = list(sources)
        while stack:
            v = stack.pop()
            if v in seen:
                continue
            seen.add(v)
            stack.extend(self._children[v])
        return seen

    def districts(self) -> list[tuple[int, ...]]:
        """Bidirected-connected components with at least two nodes."""
        parent = list(range(self.n_nodes))

        def find(a):
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for i, j in sorted(self.bidirected):
            parent[find(i)] = find(j)
        groups: dict[int, list[int]] = {}
        for v in range(self.n_nodes):
            groups.setdefault(find(v), []).append(v)
        return sorted(tuple(g) for g in groups.values() if len(g) > 1)

    def edges(self) -> list[MixedEdge]:
        out = []
        for i, j in self.directed:
            out.append(MixedEdge(i, j, TAIL, ARROW) if i < j else MixedEdge(j, i, ARROW, TAIL))
        for i, j in self.bidirected:
            out.append(MixedEdge(i, j, ARROW, ARROW))
        return sorted(out, key=lambda e: (e.a, e.b))

    def to_pag(self) -> Pag:
        g = Pag(self.names, self.kinds)
        for e in self.edges():
            g.add_edge(e.a, e.b, e.mark_at_a, e.mark_at_b)
        return g

    @classmethod
    def from_pag(cls, pag: Pag) -> "Admg":
        directed, bidirected = [], []
        for e in pag.edges():
            marks = (e.mark_at_a, e.mark_at_b)
            if marks == (TAIL, ARROW):
                directed.append((e.a, e.b))
            elif marks == (ARROW, TAIL):
                directed.append((e.b, e.a))
            elif marks == (ARROW, ARROW):
                bidirected.append((e.a, e.b))
            else:
                raise ValueError(f"edge {pag.names[e.a]} {e.symbol()} {pag.names[e.b]} is not an ADMG edge")
        return cls(pag.names, pag.kinds, directed, bidirected)

    def to_json(self) -> dict:
        return _graph_json(self.names, self.edges())

    def to_dot(self) -> str:
        return _graph_dot(self.names, self.edges())

    def __eq__(self, other):
        return (
            isinstance(other, Admg)
            and self.names == other.names
            and self.directed == other.directed
            and self.bidirected == other.bidirected
        )

    def __hash__(self):
        return hash((self.names, self.directed, self.bidirected))

    def __repr__(self):
        parts = [f"{self.names[i]} -> {self.names[j]}" for i, j in sorted(self.directed)]
        parts += [f"{self.names[i]} <-> {self.names[j]}" for i, j in sorted(self.bidirected)]
        return f"Admg({', '.join(parts)})"


def _graph_json(names, edges) -> dict:
    return {
        "nodes": list(names),
        "edges": [
            {
                "a": names[e.a],
                "b": names[e.b],
                "mark_a": _MARK_NAMES[EndpointMark(e.mark_at_a)],
                "mark_b": _MARK_NAMES[EndpointMark(e.mark_at_b)],
            }
            for e in edges
        ],
    }


def _graph_dot(names, edges) -> str:
    lines = ["digraph G {"]
    for name in names:
        lines.append(f"  {json.dumps(name)};")
    for e in edges:
        lines.append(
            f"  {json.dumps(names[e.a])} -> {json.dumps(names[e.b])} "
            f"[dir=both, arrowtail={_DOT_SHAPES[EndpointMark(e.mark_at_a)]}, "
            f"arrowhead={_DOT_SHAPES[EndpointMark(e.mark_at_b)]}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_from_json(obj, kinds=None):
    """Load a graph export; returns an :class:`Admg` when it has no circle marks."""
    pag = Pag.from_json(obj, kinds)
    if pag.circle_edges():
        return pag
    return Admg.from_pag(pag)
