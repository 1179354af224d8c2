"""FCI structure learning: skeleton, colliders and orientation rules R1-R4.

The skeleton search is the order-independent ("stable") PC adjacency search:
adjacency sets are frozen at the start of every level, so the result does not
depend on the order in which edges are visited.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from .ci_tests import CiConfig, CITestResult, independence_test, is_independent
from .data_model import DiscreteTable, Schema, VariableKind, TIER
from .errors import TooFewVariables
from .graphs import ARROW, CIRCLE, NO_EDGE, TAIL, Pag

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TierKnowledge:
    """Causal order of variable kinds: options, then events, then NFPs.

    Configuration options are set externally, so an edge touching an option
    and a later-tier node gets a tail at the option.
    """

    tiers: tuple[int, ...]
    exogenous: tuple[bool, ...]

    @classmethod
    def from_kinds(cls, kinds: Sequence[VariableKind]) -> "TierKnowledge":
        return cls(tuple(TIER[k] for k in kinds), tuple(k is VariableKind.CONFIG_OPTION for k in kinds))

    @classmethod
    def from_schema(cls, schema: Schema) -> "TierKnowledge":
        return cls.from_kinds([v.kind for v in schema])


def build_complete_graph(schema: Schema) -> Pag:
    if len(schema) < 2:
        raise TooFewVariables("structure learning needs at least two variables")
    g = Pag.from_schema(schema)
    p = len(schema)
    for i in range(p):
        for j in range(i + 1, p):
            g.add_edge(i, j, CIRCLE, CIRCLE)
    return g


def learn_skeleton(
    table: DiscreteTable,
    cfg: CiConfig | None = None,
    max_cond_size: int = 3,
    possible_dsep: bool = False,
) -> Pag:
    """Remove edges between conditionally independent pairs, recording sepsets.

    ``pag.tests`` maps each removed pair to the test result that removed it.
    """
    cfg = cfg or CiConfig()
    g = build_complete_graph(table.schema)
    p = g.n_nodes
    for level in range(max_cond_size + 1):
        adj = [set(g.neighbors(i)) for i in range(p)]
        if all(len(a) - 1 < level for a in adj):
            break
        for i in range(p):
            for j in sorted(adj[i]):
                if j <= i or not g.is_adjacent(i, j):
                    continue
                _test_edge(g, table, cfg, i, j, adj, level)
    if possible_dsep:
        _possible_dsep_phase(g, table, cfg, max_cond_size)
    return g


def _test_edge(g: Pag, table, cfg, i, j, adj, level) -> bool:
    tried = set()
    for a, b in ((i, j), (j, i)):
        pool = sorted(adj[a] - {b})
        if len(pool) < level:
            continue
        for subset in combinations(pool, level):
            if subset in tried:
                continue
            tried.add(subset)
            result = independence_test(table, i, j, subset, cfg)
            if is_independent(result, cfg):
                g.remove_edge(i, j)
                g.set_sepset(i, j, subset)
                g.tests[frozenset((i, j))] = result
                return True
    return False


def _possible_dsep(g: Pag, a: int) -> set[int]:
    """Nodes reachable from ``a`` along paths whose inner triples are colliders or triangles."""
    reach = set()
    frontier = [(a, b) for b in g.neighbors(a)]
    seen = set(frontier)
    while frontier:
        prev, cur = frontier.pop()
        reach.add(cur)
        for nxt in g.neighbors(cur):
            if nxt in (prev, a) or (cur, nxt) in seen:
                continue
            collider = g.marks[prev, cur] == ARROW and g.marks[nxt, cur] == ARROW
            if collider or g.is_adjacent(prev, nxt):
                seen.add((cur, nxt))
                frontier.append((cur, nxt))
    reach.discard(a)
    return reach


def _possible_dsep_phase(g: Pag, table, cfg, max_cond_size) -> None:
    oriented = orient_v_structures(g)
    pds = [_possible_dsep(oriented, a) for a in range(g.n_nodes)]
    for i in range(g.n_nodes):
        for j in g.neighbors(i):
            if j <= i:
                continue
            for a, b in ((i, j), (j, i)):
                pool = sorted(pds[a] - {a, b})
                done = False
                for level in range(1, min(max_cond_size, len(pool)) + 1):
                    for subset in combinations(pool, level):
                        result = independence_test(table, i, j, subset, cfg)
                        if is_independent(result, cfg):
                            g.remove_edge(i, j)
                            g.set_sepset(i, j, subset)
                            g.tests[frozenset((i, j))] = result
                            done = True
                            break
                    if done:
                        break
                if done:
                    break


def orient_v_structures(pag: Pag) -> Pag:
    """Put arrowheads at ``z`` for every unshielded ``x *-* z *-* y`` with ``z`` outside sepset(x, y)."""
    g = pag.copy()
    for z in range(g.n_nodes):
        nbrs = pag.neighbors(z)
        for x, y in combinations(nbrs, 2):
            if pag.is_adjacent(x, y):
                continue
            sep = pag.sepset(x, y)
            if sep is not None and z not in sep:
                g.marks[x, z] = ARROW
                g.marks[y, z] = ARROW
    return g


class _Orienter:
    def __init__(self, g: Pag, knowledge: TierKnowledge | None):
        self.g = g
        self.knowledge = knowledge
        p = g.n_nodes
        self.no_arrow = np.zeros((p, p), dtype=bool)
        self.changed = False

    def conflict(self, msg: str) -> None:
        self.g.log.append(msg)
        log.info("ConflictingOrientation: %s", msg)

    def set_mark(self, other: int, at: int, mark: int, rule: str) -> None:
        """Set the mark at ``at`` on edge ``other *-* at``; existing non-circle marks win."""
        g = self.g
        cur = g.marks[other, at]
        if cur == mark:
            return
        if mark == ARROW and self.no_arrow[other, at]:
            self.conflict(f"{rule}: arrowhead at {g.names[at]} on {g.names[other]} edge blocked by tiers")
            return
        if cur != CIRCLE:
            self.conflict(f"{rule}: mark at {g.names[at]} on {g.names[other]} edge kept")
            return
        g.marks[other, at] = mark
        self.changed = True

    def tiers(self) -> None:
        k = self.knowledge
        if k is None:
            return
        g = self.g
        for i in range(g.n_nodes):
            for j in g.neighbors(i):
                if k.tiers[i] >= k.tiers[j]:
                    continue
                # i precedes j: j cannot be an ancestor of i
                if g.marks[i, j] != ARROW:
                    if g.marks[i, j] == TAIL:
                        self.conflict(f"tier: {g.names[j]} cannot cause {g.names[i]}")
                    g.marks[i, j] = ARROW
                if k.exogenous[i]:
                    if g.marks[j, i] != TAIL:
                        if g.marks[j, i] == ARROW:
                            self.conflict(f"tier: arrowhead into option {g.names[i]} removed")
                        g.marks[j, i] = TAIL
                elif g.marks[j, i] == ARROW:
                    self.conflict(f"tier: arrowhead into {g.names[i]} from {g.names[j]} removed")
                    g.marks[j, i] = CIRCLE
                self.no_arrow[j, i] = True

    def r1(self) -> None:
        g = self.g
        for b in range(g.n_nodes):
            for a in g.neighbors(b):
                if g.marks[a, b] != ARROW:
                    continue
                for c in g.neighbors(b):
                    if c == a or g.is_adjacent(a, c) or g.marks[c, b] != CIRCLE:
                        continue
                    self.set_mark(c, b, TAIL, "R1")
                    self.set_mark(b, c, ARROW, "R1")

    def r2(self) -> None:
        g = self.g
        for a in range(g.n_nodes):
            for c in g.neighbors(a):
                if g.marks[a, c] != CIRCLE:
                    continue
                for b in g.neighbors(a):
                    if b == c or not g.is_adjacent(b, c):
                        continue
                    first = g.marks[a, b] == ARROW and g.marks[b, a] == TAIL and g.marks[b, c] == ARROW
                    second = g.marks[a, b] == ARROW and g.marks[b, c] == ARROW and g.marks[c, b] == TAIL
                    if first or second:
                        self.set_mark(a, c, ARROW, "R2")
                        break

    def r3(self) -> None:
        g = self.g
        for b in range(g.n_nodes):
            for t in g.neighbors(b):
                if g.marks[t, b] != CIRCLE:
                    continue
                cands = [a for a in g.neighbors(b) if a != t and g.is_adjacent(a, t)
                         and g.marks[a, b] == ARROW and g.marks[a, t] == CIRCLE]
                hit = any(not g.is_adjacent(a, c) for a, c in combinations(cands, 2))
                if hit:
                    self.set_mark(t, b, ARROW, "R3")

    def r4(self) -> None:
        g = self.g
        for b in range(g.n_nodes):
            for c in g.neighbors(b):
                if g.marks[c, b] != CIRCLE:
                    continue
                theta, a = self._discriminating(b, c)
                if theta is None:
                    continue
                sep = g.sepset(theta, c) or frozenset()
                if b in sep:
                    self.set_mark(c, b, TAIL, "R4")
                    self.set_mark(b, c, ARROW, "R4")
                else:
                    self.set_mark(a, b, ARROW, "R4")
                    self.set_mark(b, a, ARROW, "R4")
                    self.set_mark(c, b, ARROW, "R4")
                    self.set_mark(b, c, ARROW, "R4")

    def _is_parent(self, v: int, c: int) -> bool:
        g = self.g
        return g.marks[v, c] == ARROW and g.marks[c, v] == TAIL

    def _discriminating(self, b: int, c: int):
        g = self.g
        for a in g.neighbors(b):
            if a == c or not g.is_adjacent(a, c):
                continue
            if g.marks[b, a] != ARROW or not self._is_parent(a, c):
                continue
            # breadth-first search back from a over colliders that are parents of c
            queue = [(a, (b, a))]
            visited = {a}
            while queue:
                v, path = queue.pop(0)
                for w in g.neighbors(v):
                    if w in path or w == c or g.marks[w, v] != ARROW:
                        continue
                    if not g.is_adjacent(w, c):
                        return w, a
                    if w not in visited and self._is_parent(w, c) and g.marks[v, w] == ARROW:
                        visited.add(w)
                        queue.append((w, path + (w,)))
        return None, None


def apply_fci_rules(pag: Pag, knowledge: TierKnowledge | None = None, max_rounds: int = 100) -> Pag:
    """Apply tier knowledge, then R1-R4 until nothing changes."""
    g = pag.copy()
    o = _Orienter(g, knowledge)
    o.tiers()
    for _ in range(max_rounds):
        o.changed = False
        o.r1()
        o.r2()
        o.r3()
        o.r4()
        if not o.changed:
            break
    return g


def learn_pag(
    table: DiscreteTable,
    cfg: CiConfig | None = None,
    max_cond_size: int = 3,
    knowledge: TierKnowledge | None | str = "schema",
    possible_dsep: bool = False,
) -> Pag:
    """Skeleton, colliders and orientation rules in one call."""
    if knowledge == "schema":
        knowledge = TierKnowledge.from_schema(table.schema)
    skeleton = learn_skeleton(table, cfg, max_cond_size, possible_dsep)
    return apply_fci_rules(orient_v_structures(skeleton), knowledge)


def skeleton_pairs(g) -> set[frozenset]:
    """Adjacent pairs of a :class:`Pag` or :class:`Admg`."""
    if isinstance(g, Pag):
        return {frozenset((e.a, e.b)) for e in g.edges()}
    return {frozenset(e) for e in g.directed} | {frozenset(e) for e in g.bidirected}


__all__ = [
    "TierKnowledge",
    "build_complete_graph",
    "learn_skeleton",
    "orient_v_structures",
    "apply_fci_rules",
    "learn_pag",
    "skeleton_pairs",
    "CITestResult",
    "NO_EDGE",
]
