"""Synthetic configurable systems with known causal structure.

Every node ``v`` follows ``v = clip(offset + sum_p effect_p[pa_p] + e, 0, k-1)``
where ``e`` is drawn from a small sorted set of integer shifts.  Because the
mechanism is monotone in ``e``, the inverse-CDF reading of the induced tables
reproduces the same counterfactuals, which lets the exact twin computation be
checked against brute-force enumeration.  Roots (options, latents) are pure
noise.  A continuous non-functional property reports
``scale * growth ** (level - k + 1)`` with a small multiplicative jitter.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .causal_inference.model import DistrictLatent, FittedModel, model_from_cpts
from .data_model import (
    DType,
    Direction,
    LevelInfo,
    ObservationTable,
    Schema,
    VariableKind,
    VariableMeta,
    bin_index,
    level_info,
)
from .errors import EmptyRequest, IncompleteAssignment, TooLarge, UnreachableNfp
from .graphs import Admg

MAX_ENUMERATION = 10**6
ROOT_CAUSE_EPS = 0.01


@dataclass(frozen=True)
class ScmSpec:
    n_options: int = 4
    n_events: int = 4
    n_nfps: int = 1
    n_latents: int = 0
    edge_density: float = 0.4
    max_parents: int = 3
    option_levels: tuple[int, int] = (2, 3)
    event_levels: tuple[int, int] = (2, 3)
    nfp_levels: tuple[int, int] = (3, 4)
    noise_entropy: tuple[float, float] = (0.1, 0.8)
    nfp_continuous: bool = True
    growth: tuple[float, float] = (1.8, 2.2)
    jitter: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.n_options < 1 or self.n_nfps < 1:
            raise ValueError("a system needs at least one option and one non-functional property")
        if self.n_events < 0 or self.n_latents < 0:
            raise ValueError("counts must be non-negative")
        if not 0.0 <= self.edge_density <= 1.0:
            raise ValueError("edge_density must lie in [0, 1]")
        lo, hi = self.noise_entropy
        if not 0.0 <= lo <= hi:
            raise ValueError("noise_entropy must be an ordered non-negative range")

    def to_json(self) -> dict:
        out = dict(self.__dict__)
        return {k: list(v) if isinstance(v, tuple) else v for k, v in out.items()}


@dataclass(frozen=True)
class Node:
    name: str
    kind: str  # "option", "event", "nfp" or "latent"
    card: int
    parents: tuple[int, ...] = ()
    effects: tuple[tuple[int, ...], ...] = ()
    offset: int = 0
    noise_values: tuple[int, ...] = (0,)
    noise_probs: tuple[float, ...] = (1.0,)

    def base(self, parent_values: Sequence) -> np.ndarray:
        total = np.full(np.shape(parent_values[0]) if parent_values else (), self.offset, dtype=np.int64)
        for eff, val in zip(self.effects, parent_values):
            total = total + np.asarray(eff, dtype=np.int64)[val]
        return total

    def apply(self, base, noise) -> np.ndarray:
        return np.clip(base + noise, 0, self.card - 1)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "kind": self.kind,
            "card": self.card,
            "parents": list(self.parents),
            "effects": [list(e) for e in self.effects],
            "offset": self.offset,
            "noise_values": list(self.noise_values),
            "noise_probs": list(self.noise_probs),
        }

    @classmethod
    def from_json(cls, obj) -> "Node":
        return cls(
            obj["name"], obj["kind"], int(obj["card"]), tuple(obj["parents"]),
            tuple(tuple(e) for e in obj["effects"]), int(obj["offset"]),
            tuple(obj["noise_values"]), tuple(float(p) for p in obj["noise_probs"]),
        )


@dataclass
class GroundTruthScm:
    """Visible nodes come first, in schema order; latents follow."""

    schema: Schema
    nodes: tuple[Node, ...]
    nfp_scale: dict = field(default_factory=dict)
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        self.n_visible = len(self.schema)
        self._order = _topological(self.nodes)

    @property
    def names(self) -> list[str]:
        return [n.name for n in self.nodes]

    @property
    def latents(self) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if n.kind == "latent"]

    def index(self, name) -> int:
        return self.names.index(name) if isinstance(name, str) else int(name)

    def topological_order(self) -> list[int]:
        return list(self._order)

    def children(self, v: int) -> list[int]:
        return [i for i, n in enumerate(self.nodes) if v in n.parents]

    def level_value(self, v: int, levels) -> np.ndarray:
        """Numeric value of a level, without jitter."""
        node = self.nodes[v]
        levels = np.asarray(levels)
        if node.kind == "nfp" and node.name in self.nfp_scale:
            scale, growth = self.nfp_scale[node.name]
            return scale * growth ** (levels - (node.card - 1.0))
        if v < self.n_visible:
            return self.schema[node.name].numeric(levels)
        return levels.astype(float)

    def admg(self) -> Admg:
        """Projection onto the visible nodes: latents become bidirected edges."""
        p = self.n_visible
        directed = [(u, v) for v in range(p) for u in self.nodes[v].parents if u < p]
        bidirected = set()
        for lat in self.latents:
            kids = sorted(c for c in self.children(lat) if c < p)
            bidirected.update(itertools.combinations(kids, 2))
        kinds = [var.kind for var in self.schema]
        return Admg(self.schema.names, kinds, directed, sorted(bidirected))

    def to_json(self) -> dict:
        return {
            "schema": self.schema.to_json(),
            "nodes": [n.to_json() for n in self.nodes],
            "nfp_scale": {k: list(v) for k, v in sorted(self.nfp_scale.items())},
            "jitter": self.jitter,
            "seed": self.seed,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, obj) -> "GroundTruthScm":
        return cls(
            Schema.from_json(obj["schema"]),
            tuple(Node.from_json(n) for n in obj["nodes"]),
            {k: tuple(v) for k, v in obj.get("nfp_scale", {}).items()},
            float(obj.get("jitter", 0.0)),
            int(obj.get("seed", 0)),
        )

    @classmethod
    def loads(cls, text: str) -> "GroundTruthScm":
        return cls.from_json(json.loads(text))


def _topological(nodes) -> list[int]:
    order, placed = [], set()
    while len(order) < len(nodes):
        ready = [i for i, n in enumerate(nodes) if i not in placed and all(p in placed for p in n.parents)]
        if not ready:
            raise ValueError("mechanism graph has a cycle")
        order.extend(ready)
        placed.update(ready)
    return order


# -- generation -------------------------------------------------------------


def _entropy_bits(p) -> float:
    p = np.asarray(p, dtype=float)
    p = p[p > 0]
    return float(-np.sum(p * np.log2(p)))


def _noise(rng, lo: float, hi: float) -> tuple[tuple[int, ...], tuple[float, ...]]:
    """Three-point shift noise {-1, 0, +1} whose entropy is drawn from [lo, hi]."""
    target = rng.uniform(lo, hi)
    split = rng.uniform(0.2, 0.8)

    def probs(eps):
        return np.array([eps * split, 1.0 - eps, eps * (1.0 - split)])

    a, b = 0.0, 2.0 / 3.0
    for _ in range(100):
        mid = (a + b) / 2
        if _entropy_bits(probs(mid)) < target:
            a = mid
        else:
            b = mid
    p = probs((a + b) / 2)
    return (-1, 0, 1), tuple(float(x) for x in p)


def _split_total(rng, total: int, parts: int) -> list[int]:
    if parts == 0:
        return []
    out = [1] * parts
    for _ in range(max(total - parts, 0)):
        out[rng.integers(parts)] += 1
    return out


def _effects(rng, parent_cards, card, top_heavy: bool) -> tuple[tuple, int]:
    mags = _split_total(rng, card - 1, len(parent_cards))
    effects = []
    for kp, m in zip(parent_cards, mags):
        eff = [int(round(m * c / (kp - 1))) if kp > 1 else 0 for c in range(kp)]
        if rng.random() < 0.5:
            eff = eff[::-1]
        effects.append(tuple(eff))
    span = sum(max(e) for e in effects)
    if top_heavy:
        offset = (card - 1) - span
    else:
        offset = int(np.floor((card - 1) / 2 - sum(np.mean(e) for e in effects) + 0.5))
    return tuple(effects), offset


def generate_scm(spec: ScmSpec, max_attempts: int = 100) -> GroundTruthScm:
    """Random tier-respecting system; every NFP is reachable from some option."""
    for attempt in range(max_attempts):
        rng = np.random.default_rng(np.random.SeedSequence([int(spec.seed), attempt]))
        scm = _generate_once(spec, rng)
        admg = scm.admg()
        options = [i for i, v in enumerate(scm.schema) if v.kind is VariableKind.CONFIG_OPTION]
        reach = admg.descendants(options)
        if all(i in reach for i, v in enumerate(scm.schema) if v.kind is VariableKind.NFP):
            return scm
    raise UnreachableNfp(f"no NFP-reachable system after {max_attempts} attempts")


def _generate_once(spec: ScmSpec, rng) -> GroundTruthScm:
    no, ne, nn = spec.n_options, spec.n_events, spec.n_nfps
    cards = (
        [int(rng.integers(spec.option_levels[0], spec.option_levels[1] + 1)) for _ in range(no)]
        + [int(rng.integers(spec.event_levels[0], spec.event_levels[1] + 1)) for _ in range(ne)]
        + [int(rng.integers(spec.nfp_levels[0], spec.nfp_levels[1] + 1)) for _ in range(nn)]
    )
    p = no + ne + nn
    parents: list[list[int]] = [[] for _ in range(p)]
    for v in range(no, p):
        pool = list(range(min(v, no + ne)))
        chosen = [u for u in pool if rng.random() < spec.edge_density]
        if not chosen:
            chosen = [int(rng.choice(pool))]
        if len(chosen) > spec.max_parents:
            chosen = sorted(rng.choice(chosen, size=spec.max_parents, replace=False).tolist())
        parents[v] = sorted(chosen)
    # latents feed two non-adjacent, non-option nodes
    latent_kids = []
    candidates = [(a, b) for a in range(no, p) for b in range(a + 1, p)
                  if a not in parents[b] and b not in parents[a]]
    used = set()
    for _ in range(spec.n_latents):
        free = [c for c in candidates if c not in used]
        if not free:
            break
        pair = free[int(rng.integers(len(free)))]
        used.add(pair)
        latent_kids.append(pair)
    nodes = []
    variables = []
    nfp_scale = {}
    for v in range(p):
        k = cards[v]
        if v < no:
            name = f"opt{v}"
            variables.append(VariableMeta(name, VariableKind.CONFIG_OPTION, DType.ORDINAL, tuple(float(i) for i in range(k))))
            nodes.append(Node(name, "option", k, (), (), 0, tuple(range(k)), tuple([1.0 / k] * k)))
            continue
        is_nfp = v >= no + ne
        name = f"nfp{v - no - ne}" if is_nfp else f"event{v - no}"
        lat_parents = [p + i for i, pair in enumerate(latent_kids) if v in pair]
        pa = parents[v] + lat_parents
        pa_cards = [cards[u] for u in parents[v]] + [2] * len(lat_parents)
        effects, offset = _effects(rng, pa_cards, k, top_heavy=is_nfp)
        values, probs = _noise(rng, *spec.noise_entropy)
        nodes.append(Node(name, "nfp" if is_nfp else "event", k, tuple(pa), effects, offset, values, probs))
        if is_nfp and spec.nfp_continuous:
            growth = float(rng.uniform(*spec.growth))
            nfp_scale[name] = (1.0, growth)
            variables.append(VariableMeta(name, VariableKind.NFP, DType.CONTINUOUS, (0.0, 1.0 + 2 * spec.jitter)))
        else:
            kind = VariableKind.NFP if is_nfp else VariableKind.SYSTEM_EVENT
            variables.append(VariableMeta(name, kind, DType.ORDINAL, tuple(float(i) for i in range(k))))
    for i in range(len(latent_kids)):
        probs = rng.dirichlet([4.0, 4.0])
        nodes.append(Node(f"latent{i}", "latent", 2, (), (), 0, (0, 1), tuple(float(x) for x in probs)))
    return GroundTruthScm(Schema(tuple(variables)), tuple(nodes), nfp_scale, spec.jitter if spec.nfp_continuous else 0.0, spec.seed)


# -- sampling ---------------------------------------------------------------


def _simulate_levels(scm: GroundTruthScm, n: int, rng, do: Mapping[int, int] | None = None) -> np.ndarray:
    do = do or {}
    levels = np.zeros((n, len(scm.nodes)), dtype=np.int64)
    for v in scm.topological_order():
        node = scm.nodes[v]
        if v in do:
            levels[:, v] = do[v]
            continue
        base = node.base([levels[:, u] for u in node.parents]) if node.parents else np.full(n, node.offset)
        noise = rng.choice(np.asarray(node.noise_values), size=n, p=np.asarray(node.noise_probs))
        levels[:, v] = node.apply(base, noise)
    return levels


def _to_values(scm: GroundTruthScm, levels: np.ndarray, rng) -> np.ndarray:
    """Stored table values (domain indices, or raw numbers for continuous columns)."""
    out = np.empty((levels.shape[0], scm.n_visible))
    for j, var in enumerate(scm.schema):
        if var.is_continuous:
            vals = scm.level_value(j, levels[:, j])
            if scm.jitter:
                vals = vals * (1.0 + scm.jitter * rng.uniform(-1.0, 1.0, size=len(vals)))
            out[:, j] = np.clip(vals, *var.domain)
        else:
            out[:, j] = levels[:, j]
    return out


def sample_observational(scm: GroundTruthScm, n: int, seed: int = 0) -> ObservationTable:
    if n < 1:
        raise EmptyRequest("n must be at least 1")
    rng = np.random.default_rng(seed)
    levels = _simulate_levels(scm, n, rng)
    return ObservationTable(scm.schema, _to_values(scm, levels, rng))


def _option_levels(scm: GroundTruthScm, assignment: Mapping) -> dict[int, int]:
    out = {}
    for j, var in enumerate(scm.schema):
        if var.kind is not VariableKind.CONFIG_OPTION:
            continue
        if var.name not in assignment:
            raise IncompleteAssignment(f"assignment lacks option {var.name!r}")
        out[j] = int(var.encode(assignment[var.name]))
    return out


def measure(scm: GroundTruthScm, assignment: Mapping, rng) -> dict:
    """One interventional draw: ``{"events": {...}, "nfps": {...}}`` in domain values."""
    do = _option_levels(scm, assignment)
    levels = _simulate_levels(scm, 1, rng, do)
    values = _to_values(scm, levels, rng)[0]
    out = {"events": {}, "nfps": {}}
    for j, var in enumerate(scm.schema):
        if var.kind is VariableKind.CONFIG_OPTION:
            continue
        value = float(values[j]) if var.is_continuous else var.decode(values[j])
        out["events" if var.kind is VariableKind.SYSTEM_EVENT else "nfps"][var.name] = value
    return out


def evaluate(scm: GroundTruthScm, assignment: Mapping, repeats: int = 5, seed: int = 0) -> dict:
    """Average of ``repeats`` interventional draws of every event and NFP."""
    if repeats < 1:
        raise ValueError("repeats must be positive")
    rng = np.random.default_rng(seed)
    draws = [measure(scm, assignment, rng) for _ in range(repeats)]
    return {
        group: {name: float(np.mean([float(d[group][name]) for d in draws])) for name in draws[0][group]}
        for group in ("events", "nfps")
    }


class SimulatorEvaluator:
    """SystemEvaluator backed by a ground-truth system.

    Each ``(assignment, repeat)`` pair has its own random stream, so results
    do not depend on the order of calls.
    """

    def __init__(self, scm: GroundTruthScm, seed: int = 0):
        self.scm = scm
        self.seed = int(seed)
        self.calls = 0

    def measure(self, assignment: Mapping, repeat: int = 0) -> dict:
        self.calls += 1
        codes = sorted(_option_levels(self.scm, assignment).items())
        entropy = [self.seed, int(repeat)] + [c for _, c in codes]
        rng = np.random.default_rng(np.random.SeedSequence(entropy))
        return measure(self.scm, assignment, rng)


# -- exact distributions ----------------------------------------------------


def _propagate(scm: GroundTruthScm, keep: Sequence[int], do: Mapping[int, int] | None = None, limit=MAX_ENUMERATION):
    """Exact joint of ``keep`` by forward enumeration with state merging."""
    do = dict(do or {})
    need = set(keep)
    stack = list(keep)
    while stack:
        v = stack.pop()
        if v in do:
            continue
        for u in scm.nodes[v].parents:
            if u not in need:
                need.add(u)
                stack.append(u)
    order = [v for v in scm.topological_order() if v in need]
    cols: list[int] = []
    states = np.zeros((1, 0), dtype=np.int64)
    probs = np.ones(1)
    for v in order:
        node = scm.nodes[v]
        if v in do:
            new = np.full((len(states), 1), do[v], dtype=np.int64)
            states = np.hstack([states, new])
            cols.append(v)
            continue
        pa = [states[:, cols.index(u)] for u in node.parents]
        base = node.base(pa) if node.parents else np.full(len(states), node.offset)
        blocks, weights = [], []
        for e, pe in zip(node.noise_values, node.noise_probs):
            if pe == 0:
                continue
            blocks.append(np.hstack([states, node.apply(base, e).reshape(-1, 1)]))
            weights.append(probs * pe)
        states = np.vstack(blocks)
        probs = np.concatenate(weights)
        cols.append(v)
        # drop columns nobody needs any more, then merge identical rows
        later = [w for w in order[order.index(v) + 1:]]
        needed = [c for c in cols if c in keep or any(c in scm.nodes[w].parents for w in later if w not in do)]
        idx = [cols.index(c) for c in needed]
        states = states[:, idx]
        cols = needed
        states, inverse = np.unique(states, axis=0, return_inverse=True)
        probs = np.bincount(inverse.reshape(-1), weights=probs, minlength=len(states))
        if len(states) > limit:
            raise TooLarge(f"more than {limit} joint states")
    out = np.zeros([scm.nodes[k].card for k in keep])
    np.add.at(out, tuple(states[:, cols.index(k)] for k in keep), probs)
    return out


def interventional_mean(scm: GroundTruthScm, target, do: Mapping | None = None) -> float:
    t = scm.index(target)
    do = {scm.index(k): int(v) for k, v in (do or {}).items()}
    dist = _propagate(scm, [t], do)
    return float(np.dot(dist, scm.level_value(t, np.arange(scm.nodes[t].card))))


def oracle_ace(scm: GroundTruthScm, z, x) -> float:
    """True average absolute change of ``E[z | do(x)]`` over consecutive levels of ``x``."""
    xi = scm.index(x)
    means = [interventional_mean(scm, z, {xi: a}) for a in range(scm.nodes[xi].card)]
    return float(np.mean(np.abs(np.diff(means)))) if len(means) > 1 else 0.0


def true_root_causes(scm: GroundTruthScm, targets: Sequence[str], eps: float = ROOT_CAUSE_EPS) -> list[str]:
    out = []
    for var in scm.schema:
        if var.kind is VariableKind.CONFIG_OPTION and any(oracle_ace(scm, t, var.name) >= eps for t in targets):
            out.append(var.name)
    return out


def oracle_ite(
    scm: GroundTruthScm,
    factual: Mapping,
    repair: Mapping,
    thresholds: Mapping[str, float],
    limit: int = MAX_ENUMERATION,
) -> float:
    """``P(fixed) - P(still faulty)`` by enumerating every joint noise configuration.

    ``factual`` and ``repair`` hold level indices.  NFP outcomes are compared
    through their level values, without jitter.
    """
    supports = [len(n.noise_values) for n in scm.nodes]
    total = int(np.prod(supports, dtype=float))
    if total > limit:
        raise TooLarge(f"{total} noise configurations exceed {limit}")
    grids = np.stack(np.meshgrid(*[np.arange(s) for s in supports], indexing="ij"), -1).reshape(-1, len(supports))
    weight = np.ones(len(grids))
    noise = np.zeros_like(grids)
    for v, node in enumerate(scm.nodes):
        weight *= np.asarray(node.noise_probs)[grids[:, v]]
        noise[:, v] = np.asarray(node.noise_values)[grids[:, v]]
    fact = {scm.index(k): int(c) for k, c in factual.items()}
    do = {scm.index(k): int(c) for k, c in repair.items()}

    def run(intervene):
        vals = np.zeros_like(grids)
        for v in scm.topological_order():
            node = scm.nodes[v]
            if v in intervene:
                vals[:, v] = intervene[v]
                continue
            base = node.base([vals[:, u] for u in node.parents]) if node.parents else np.full(len(grids), node.offset)
            vals[:, v] = node.apply(base, noise[:, v])
        return vals

    world = run({})
    consistent = np.ones(len(grids), dtype=bool)
    for v, c in fact.items():
        consistent &= world[:, v] == c
    mass = weight[consistent].sum()
    if mass <= 0:
        raise ValueError("factual row has zero probability under the system")
    twin = run(do)[consistent]
    w = weight[consistent] / mass
    good = np.ones(len(twin), dtype=bool)
    bad = np.zeros(len(twin), dtype=bool)
    for name, thr in thresholds.items():
        t = scm.index(name)
        value = scm.level_value(t, twin[:, t])
        if scm.schema[name].direction is Direction.LOWER_IS_BETTER:
            good &= value < thr
            bad |= value > thr
        else:
            good &= value > thr
            bad |= value < thr
    return float(w[good].sum() - w[bad].sum())


def exact_model(scm: GroundTruthScm, bins: int = 10) -> FittedModel:
    """Model whose tables are the true mechanisms; district latents are products of true latents.

    A continuous NFP level maps to the bin holding its jitter-free value.
    """
    admg = scm.admg()
    p = scm.n_visible
    levels = tuple(level_info(var, bins) for var in scm.schema)
    districts = admg.districts()
    district_of = {v: d for d, members in enumerate(districts) for v in members}
    district_latents = []
    for members in districts:
        lats = sorted({u for v in members for u in scm.nodes[v].parents if u >= p})
        district_latents.append(lats)
    latents = []
    for d, lats in enumerate(district_latents):
        prior = np.ones(1)
        for u in lats:
            prior = np.multiply.outer(prior, np.asarray(scm.nodes[u].noise_probs)).ravel()
        latents.append(DistrictLatent(tuple(districts[d]), len(prior), prior))
    cpts = []
    for v in range(p):
        node = scm.nodes[v]
        vis = list(admg.parents(v))
        d = district_of.get(v)
        lats = district_latents[d] if d is not None else []
        lat_cards = [scm.nodes[u].card for u in lats]
        shape = [scm.nodes[u].card for u in vis] + ([int(np.prod(lat_cards))] if d is not None else [])
        level_to_code = _level_codes(scm, v, levels[v])
        table = np.zeros(shape + [levels[v].card])
        for combo in itertools.product(*[range(s) for s in shape]):
            assign = dict(zip(vis, combo[: len(vis)]))
            if d is not None:
                for u, lv in zip(lats, np.unravel_index(combo[-1], lat_cards)):
                    assign[u] = int(lv)
            base = node.base([np.asarray(assign[u]) for u in node.parents]) if node.parents else node.offset
            for e, pe in zip(node.noise_values, node.noise_probs):
                table[combo + (level_to_code[int(node.apply(base, e))],)] += pe
        cpts.append(table)
    return model_from_cpts(admg, levels, cpts, latents, scm.schema)


def _level_codes(scm: GroundTruthScm, v: int, info: LevelInfo) -> list[int]:
    node = scm.nodes[v]
    values = scm.level_value(v, np.arange(node.card))
    if info.edges is not None:
        return [int(c) for c in bin_index(values, info.edges)]
    return [info.encode(x) for x in values]


def level_row(scm: GroundTruthScm, values: Sequence[float], bins: int = 10) -> dict[str, int]:
    """Level codes of one stored table row, as the discretiser would assign them."""
    out = {}
    for var, x in zip(scm.schema, values):
        info = level_info(var, bins)
        out[var.name] = info.encode(x)
    return out


# -- scoring ----------------------------------------------------------------


def diagnosis_metrics(predicted: Sequence[str], truth: Sequence[str]) -> dict[str, float]:
    """Precision, recall and Jaccard accuracy of a predicted root-cause set."""
    pred, true = set(predicted), set(truth)
    inter = len(pred & true)
    union = len(pred | true)
    return {
        "accuracy": inter / union if union else 1.0,
        "precision": inter / len(pred) if pred else 0.0,
        "recall": inter / len(true) if true else 0.0,
    }


def score_diagnosis(report, scm: GroundTruthScm, eps: float = ROOT_CAUSE_EPS) -> dict[str, float]:
    """Compare ``report.root_causes`` with options whose true ACE on a fault target is at least ``eps``."""
    fault = report.fault if isinstance(report.fault, Mapping) else report.fault.to_json()
    truth = true_root_causes(scm, fault["targets"], eps)
    return diagnosis_metrics(report.root_causes, truth)


__all__ = [
    "ScmSpec",
    "Node",
    "GroundTruthScm",
    "generate_scm",
    "sample_observational",
    "measure",
    "evaluate",
    "SimulatorEvaluator",
    "interventional_mean",
    "oracle_ace",
    "oracle_ite",
    "true_root_causes",
    "exact_model",
    "level_row",
    "diagnosis_metrics",
    "score_diagnosis",
]
