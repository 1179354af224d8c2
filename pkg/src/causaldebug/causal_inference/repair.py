"""Repair candidates, counterfactual ITE scoring and the diagnosis report."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..data_model import Direction, FaultSpec, LevelInfo, Schema, VariableKind, level_info
from ..errors import NoIntervenableOption
from .counterfactual import twin_distribution
from .effects import CausalPath
from .model import FittedModel

REPAIR_CAP = 10_000


@dataclass
class RepairSet:
    """Candidate assignments; ``fallback`` is set when the full product exceeded the cap."""

    assignments: list
    options: tuple[str, ...]
    fallback: bool = False

    def __iter__(self):
        return iter(self.assignments)

    def __len__(self):
        return len(self.assignments)

    def __getitem__(self, i):
        return self.assignments[i]


def option_domain(schema: Schema, name: str, bins: int | None = None, levels: LevelInfo | None = None) -> list:
    """Values an option may take: its discrete domain, or bin midpoints when continuous."""
    var = schema[name]
    if levels is not None and var.is_continuous:
        return [float(x) for x in levels.values]
    if var.is_continuous:
        return [float(x) for x in level_info(var, bins or 10).values]
    return list(var.domain)


def generate_repair_set(
    paths: Sequence[CausalPath],
    schema: Schema,
    cap: int = REPAIR_CAP,
    option_scores: Mapping[str, float] | None = None,
    domains: Mapping[str, list] | None = None,
) -> RepairSet:
    """Cross-product over the intervenable options that lie on ``paths``.

    Above ``cap`` assignments the set shrinks to every single-option change
    plus every joint change of the two highest-scoring options.
    """
    options = []
    for path in paths:
        for name in path.nodes:
            var = schema[name]
            if var.kind is VariableKind.CONFIG_OPTION and var.intervenable and name not in options:
                options.append(name)
    if not options:
        raise NoIntervenableOption("no intervenable configuration option lies on the selected paths")
    doms = {o: list((domains or {}).get(o) or option_domain(schema, o)) for o in options}
    size = int(np.prod([len(doms[o]) for o in options], dtype=float))
    if size <= cap:
        combos = itertools.product(*(doms[o] for o in options))
        return RepairSet([dict(zip(options, c)) for c in combos], tuple(options))
    scores = option_scores or {}
    ranked = sorted(options, key=lambda o: (-scores.get(o, 0.0), options.index(o)))
    out = [{o: v} for o in options for v in doms[o]]
    if len(ranked) >= 2:
        a, b = ranked[:2]
        out.extend({a: va, b: vb} for va in doms[a] for vb in doms[b])
    return RepairSet(out, tuple(options), fallback=True)


def outcome_masks(model: FittedModel, targets, thresholds: Mapping[str, float], directions: Mapping) -> tuple:
    """Boolean arrays over the joint target levels: (fixed, still faulty).

    A binned level counts as better than the threshold only when its whole
    bin is; point levels compare strictly.
    """
    good_axes, bad_axes = [], []
    for t in targets:
        info = model.levels[model.index(t)]
        thr = thresholds[t]
        lower_better = directions[t] is Direction.LOWER_IS_BETTER
        if info.point:
            good = info.values < thr if lower_better else info.values > thr
            bad = info.values > thr if lower_better else info.values < thr
        elif lower_better:
            bad = info.upper > thr
            good = ~bad
        else:
            bad = info.lower < thr
            good = ~bad
        good_axes.append(good)
        bad_axes.append(bad)
    good = np.ones([len(a) for a in good_axes], dtype=bool)
    bad = np.zeros_like(good)
    for axis, (g, b) in enumerate(zip(good_axes, bad_axes)):
        shape = [1] * len(good_axes)
        shape[axis] = len(g)
        good = good & g.reshape(shape)
        bad = bad | b.reshape(shape)
    return good, bad


@dataclass(frozen=True)
class Repair:
    assignment: dict
    ite: float
    components: dict = field(default_factory=dict)
    changes: int = 0
    non_improving: bool = False
    monte_carlo: bool = False

    def to_json(self) -> dict:
        return {
            "assignment": dict(self.assignment),
            "ite": self.ite,
            "components": dict(self.components),
            "changes": self.changes,
            "non_improving": self.non_improving,
        }


def _encode_assignment(model: FittedModel, assignment: Mapping) -> dict:
    return {model.index(k): model.levels[model.index(k)].encode(_numeric(v, model, k)) for k, v in assignment.items()}


def _numeric(value, model: FittedModel, name):
    if model.schema is None:
        return float(value)
    var = model.schema[name]
    if var.is_continuous or var.numeric_domain:
        return float(value)
    return float(list(var.domain).index(value))


def ite(
    model: FittedModel,
    repair: Mapping,
    factual,
    fault: FaultSpec,
    thresholds: Mapping[str, float],
    directions: Mapping | None = None,
) -> Repair:
    """``P(fixed) - P(still faulty)`` in the twin world after applying ``repair``.

    ``factual`` holds a level index per model node.  Fixed means every target
    is better than its threshold; faulty means at least one is worse.
    """
    targets = list(fault.targets)
    if directions is None:
        directions = {t: model.schema[t].direction if model.schema is not None else Direction.LOWER_IS_BETTER
                      for t in targets}
    do = _encode_assignment(model, repair)
    joint, mc = twin_distribution(model, factual, do, targets)
    good, bad = outcome_masks(model, targets, thresholds, directions)
    value = float(np.sum(joint[good]) - np.sum(joint[bad]))
    components = {}
    for axis, t in enumerate(targets):
        other = tuple(a for a in range(len(targets)) if a != axis)
        marginal = joint.sum(axis=other) if other else joint
        g, b = outcome_masks(model, [t], thresholds, directions)
        components[t] = float(np.sum(marginal[g]) - np.sum(marginal[b]))
    fact = factual if isinstance(factual, Mapping) else dict(enumerate(factual))
    fact = {model.index(k): v for k, v in fact.items()}
    changes = sum(1 for v, c in do.items() if fact.get(v) != c)
    return Repair(dict(repair), float(np.clip(value, -1.0, 1.0)), components, changes, monte_carlo=mc)


def _sortable(value):
    return (0, float(value), "") if isinstance(value, (int, float)) else (1, 0.0, str(value))


def repair_order_key(r: Repair):
    return (-r.ite, r.changes, tuple((k, _sortable(v)) for k, v in sorted(r.assignment.items())))


def best_repair(repairs: Sequence[Repair]) -> Repair:
    """Largest ITE; ties go to fewer changed options, then the smaller assignment."""
    if not repairs:
        raise ValueError("best_repair needs at least one candidate")
    best = min(repairs, key=repair_order_key)
    if best.ite <= 0:
        return Repair(best.assignment, best.ite, best.components, best.changes, True, best.monte_carlo)
    return best


@dataclass
class DiagnosisReport:
    fault: dict
    thresholds: dict
    factual_row: int | None
    paths: list
    root_causes: list
    repairs: list
    best_repair: Repair | None
    flags: list = field(default_factory=list)
    graph: dict | None = None

    def to_json(self) -> dict:
        return {
            "fault": self.fault,
            "thresholds": self.thresholds,
            "factual_row": self.factual_row,
            "paths": [p.to_json() for p in self.paths],
            "root_causes": list(self.root_causes),
            "repairs": [{"assignment": dict(r.assignment), "ite": r.ite} for r in self.repairs],
            "best_repair": self.best_repair.to_json() if self.best_repair is not None else None,
            "flags": list(self.flags),
            "graph": self.graph,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"
