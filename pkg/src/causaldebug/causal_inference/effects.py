"""Interventional queries, average causal effects and causal paths."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..data_model import VariableKind
from ..graphs import Admg
from .factors import eliminate
from .model import FittedModel


def _do_codes(model: FittedModel, do: Mapping) -> dict[int, int]:
    out = {}
    for var, level in do.items():
        out[model.index(var)] = int(level)
    return out


def interventional_distribution(model: FittedModel, targets, do: Mapping | None = None) -> np.ndarray:
    """Joint ``P(targets | do(...))`` by truncated factorisation.

    ``do`` maps variables to level indices.  Only ancestors of the targets in
    the mutilated graph enter the elimination; other nodes sum to one.
    """
    targets = [model.index(t) for t in ([targets] if isinstance(targets, (str, int)) else targets)]
    do = _do_codes(model, do or {})
    if set(targets) & set(do):
        raise ValueError("a target cannot also be intervened on")
    relevant = model.admg.ancestors(targets, cut=do)
    factors = []
    districts = set()
    for v in sorted(relevant):
        if v in do:
            continue
        factors.append(model.cpt_factor(v).reduce(do))
        d = model.latent_of(v)
        if d is not None:
            districts.add(d)
    factors.extend(model.latent_factor(d) for d in sorted(districts))
    result = eliminate(factors, tuple(targets))
    return result.table / result.table.sum()


def interventional_expectation(model: FittedModel, target, do: Mapping | None = None) -> float:
    """``E[target | do(...)]`` over the numeric value of each level."""
    t = model.index(target)
    dist = interventional_distribution(model, [t], do)
    return float(np.dot(dist, model.values(t)))


def ace(model: FittedModel, z, x) -> float:
    """Average absolute change of ``E[z | do(x)]`` between consecutive levels of ``x``.

    Levels of ``x`` that never occurred in the fitting data are skipped.
    """
    zi, xi = model.index(z), model.index(x)
    if zi == xi:
        raise ValueError("ace needs two distinct variables")
    levels = observed_levels(model, xi)
    if len(levels) < 2:
        return 0.0
    ex = [interventional_expectation(model, zi, {xi: lv}) for lv in levels]
    return float(np.mean(np.abs(np.diff(ex))))


def observed_levels(model: FittedModel, v: int) -> list[int]:
    if model.observed is None:
        return list(range(model.card(v)))
    return list(model.observed[v])


@dataclass(frozen=True)
class PathConfig:
    k_paths: int = 3

    def __post_init__(self):
        if self.k_paths < 1:
            raise ValueError("k_paths must be at least 1")


@dataclass(frozen=True)
class CausalPath:
    nodes: tuple[str, ...]
    path_ace: float = 0.0

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise ValueError("a causal path has at least two nodes")

    def to_json(self) -> dict:
        return {"nodes": list(self.nodes), "path_ace": self.path_ace}


def extract_paths(admg: Admg, nfp) -> list[CausalPath]:
    """All directed paths from a parentless node to ``nfp``, in lexicographic index order."""
    t = admg.index(nfp)
    if admg.kinds[t] is not VariableKind.NFP:
        raise ValueError(f"{admg.names[t]} is not a non-functional property")
    found = []

    def walk(v, suffix):
        parents = admg.parents(v)
        if not parents:
            if len(suffix) > 1:
                found.append(tuple(suffix))
            return
        for p in parents:
            walk(p, [p] + suffix)

    walk(t, [t])
    found.sort()
    return [CausalPath(tuple(admg.names[i] for i in path)) for path in found]


def path_ace(model: FittedModel, path: CausalPath) -> float:
    pairs = list(zip(path.nodes[:-1], path.nodes[1:]))
    return float(np.mean([ace(model, b, a) for a, b in pairs]))


def score_paths(model: FittedModel, paths) -> list[CausalPath]:
    cache = {}

    def edge(a, b):
        if (a, b) not in cache:
            cache[(a, b)] = ace(model, b, a)
        return cache[(a, b)]

    out = []
    for path in paths:
        pairs = list(zip(path.nodes[:-1], path.nodes[1:]))
        out.append(CausalPath(path.nodes, float(np.mean([edge(a, b) for a, b in pairs]))))
    return out


def rank_paths(paths, cfg: PathConfig | None = None, admg: Admg | None = None) -> list[CausalPath]:
    """Top-K paths by score; ties go to the lexicographically smaller node sequence."""
    cfg = cfg or PathConfig()

    def key(p):
        seq = tuple(admg.index(n) for n in p.nodes) if admg is not None else p.nodes
        return (-p.path_ace, seq)

    return sorted(paths, key=key)[: cfg.k_paths]
