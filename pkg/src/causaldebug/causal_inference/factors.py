"""Discrete factors and sum-product variable elimination."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import TooLarge


@dataclass
class Factor:
    """A table over integer-labelled variables; ``table.shape`` follows ``vars``."""

    vars: tuple
    table: np.ndarray

    def __post_init__(self):
        self.vars = tuple(self.vars)
        if self.table.ndim != len(self.vars):
            raise ValueError("factor table rank must match its variables")
        if len(set(self.vars)) != len(self.vars):
            raise ValueError("duplicate factor variable")

    def card(self, v) -> int:
        return self.table.shape[self.vars.index(v)]

    def reduce(self, evidence: dict) -> "Factor":
        """Fix variables to given levels and drop their axes."""
        idx = []
        keep = []
        for v in self.vars:
            if v in evidence:
                idx.append(int(evidence[v]))
            else:
                idx.append(slice(None))
                keep.append(v)
        return Factor(tuple(keep), self.table[tuple(idx)])


def _multiply_sum(factors: list[Factor], out_vars: tuple) -> Factor:
    labels = {}
    for f in factors:
        for v in f.vars:
            labels.setdefault(v, len(labels))
    for v in out_vars:
        labels.setdefault(v, len(labels))
    operands = []
    for f in factors:
        operands.append(f.table)
        operands.append([labels[v] for v in f.vars])
    if not factors:
        return Factor((), np.array(1.0))
    table = np.einsum(*operands, [labels[v] for v in out_vars])
    return Factor(tuple(out_vars), np.asarray(table, dtype=float))


def elimination_cost(factors: list[Factor], keep) -> tuple[list, int]:
    """Greedy min-size elimination order and the largest factor it creates."""
    keep = set(keep)
    cards = {}
    for f in factors:
        for v, c in zip(f.vars, f.table.shape):
            cards[v] = c
    scopes = [set(f.vars) for f in factors]
    remaining = sorted(set(cards) - keep, key=repr)
    order = []
    largest = max([int(np.prod([cards[v] for v in s])) for s in scopes] + [1])
    while remaining:
        best = None
        for v in remaining:
            merged = set().union(*[s for s in scopes if v in s])
            size = int(np.prod([cards[u] for u in merged])) if merged else 1
            if best is None or size < best[0]:
                best = (size, v, merged)
        size, v, merged = best
        largest = max(largest, size)
        scopes = [s for s in scopes if v not in s] + [merged - {v}]
        remaining.remove(v)
        order.append(v)
    return order, largest


def eliminate(factors: list[Factor], keep, max_size: int | None = None) -> Factor:
    """Multiply ``factors`` and sum out every variable outside ``keep``.

    Raises :class:`TooLarge` when an intermediate factor would exceed ``max_size`` entries.
    """
    keep = tuple(keep)
    order, largest = elimination_cost(factors, keep)
    if max_size is not None and largest > max_size:
        raise TooLarge(f"elimination needs a factor with {largest} entries")
    pool = list(factors)
    for v in order:
        touching = [f for f in pool if v in f.vars]
        rest = [f for f in pool if v not in f.vars]
        scope = []
        for f in touching:
            scope.extend(u for u in f.vars if u != v and u not in scope)
        pool = rest + [_multiply_sum(touching, tuple(scope))]
    return _multiply_sum(pool, keep)
