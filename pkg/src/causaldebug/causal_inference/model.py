"""Discrete structural model fitted on an ADMG.

Every node gets a conditional probability table given its directed parents.
Nodes joined by bidirected edges share a latent selector per district, so
the table of such a node is ``P(v | parents, latent)``.  The latent is fitted
by EM with the same additive smoothing used for the tables (a MAP fit).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data_model import DiscreteTable, LevelInfo, Schema
from ..errors import MissingColumn
from ..graphs import Admg
from .factors import Factor


@dataclass(frozen=True)
class DistrictLatent:
    members: tuple[int, ...]
    card: int
    prior: np.ndarray


@dataclass
class FittedModel:
    """CPTs ``cpts[v]`` with axes ``(*parents[v], [latent], v)``."""

    admg: Admg
    levels: tuple[LevelInfo, ...]
    cpts: tuple[np.ndarray, ...]
    latents: tuple[DistrictLatent, ...] = ()
    smoothing: float = 1.0
    loglik_trace: dict = field(default_factory=dict, repr=False)
    observed: dict | None = None
    schema: Schema | None = None

    def __post_init__(self):
        self._latent_of = {}
        for d, lat in enumerate(self.latents):
            for v in lat.members:
                self._latent_of[v] = d
        for v, cpt in enumerate(self.cpts):
            if not np.allclose(cpt.sum(axis=-1), 1.0, atol=1e-9):
                raise ValueError(f"CPT of {self.names[v]} does not normalise")

    @property
    def names(self) -> tuple[str, ...]:
        return self.admg.names

    @property
    def n_nodes(self) -> int:
        return len(self.names)

    def index(self, node) -> int:
        return self.admg.index(node)

    def card(self, v: int) -> int:
        return self.levels[v].card

    def parents(self, v: int) -> tuple[int, ...]:
        return self.admg.parents(v)

    def latent_of(self, v: int) -> int | None:
        return self._latent_of.get(v)

    def values(self, v: int) -> np.ndarray:
        return self.levels[v].values

    def latent_var(self, d: int):
        return ("latent", d)

    def scope(self, v: int) -> tuple:
        d = self.latent_of(v)
        extra = (self.latent_var(d),) if d is not None else ()
        return tuple(self.parents(v)) + extra + (v,)

    def cpt_factor(self, v: int) -> Factor:
        return Factor(self.scope(v), self.cpts[v])

    def latent_factor(self, d: int) -> Factor:
        return Factor((self.latent_var(d),), self.latents[d].prior)


def _joint_index(codes: np.ndarray, cols, cards) -> np.ndarray:
    idx = np.zeros(codes.shape[0], dtype=np.int64)
    for c in cols:
        idx = idx * cards[c] + codes[:, c]
    return idx


def _counts_cpt(codes, v, parents, cards, smoothing) -> np.ndarray:
    shape = [int(cards[p]) for p in parents] + [int(cards[v])]
    idx = _joint_index(codes, list(parents) + [v], cards)
    counts = np.bincount(idx, minlength=int(np.prod(shape))).astype(float).reshape(shape)
    counts += smoothing
    total = counts.sum(axis=-1, keepdims=True)
    return counts / np.where(total > 0, total, 1.0)


def _fit_district(codes, admg, members, cards, smoothing, iters, rng):
    """EM for one district latent; returns (prior, {v: cpt}, penalised log-likelihood trace)."""
    k = int(max(cards[v] for v in members))
    n = codes.shape[0]
    base = {v: _counts_cpt(codes, v, admg.parents(v), cards, smoothing) for v in members}
    cpts = {}
    for v in members:
        noise = rng.dirichlet(np.ones(int(cards[v])), size=base[v].shape[:-1] + (k,))
        cpts[v] = 0.5 * base[v][..., None, :] + 0.5 * noise
    prior = np.full(k, 1.0 / k)
    flat_idx = {}
    for v in members:
        pa = list(admg.parents(v))
        flat_idx[v] = (_joint_index(codes, pa, cards), codes[:, v])
    trace = []

    def row_terms():
        # log P(l) + sum_v log P(v | pa, l) per row, shape (n, k)
        out = np.tile(np.log(prior), (n, 1))
        for v in members:
            pa_i, val = flat_idx[v]
            table = cpts[v].reshape(-1, k, int(cards[v]))
            out += np.log(table[pa_i, :, val])
        return out

    def penalty():
        total = smoothing * np.sum(np.log(prior))
        for v in members:
            total += smoothing * np.sum(np.log(cpts[v]))
        return total

    for _ in range(iters):
        terms = row_terms()
        top = terms.max(axis=1, keepdims=True)
        resp = np.exp(terms - top)
        norm = resp.sum(axis=1, keepdims=True)
        trace.append(float(np.sum(np.log(norm) + top)) + penalty())
        resp /= norm
        prior = resp.sum(axis=0) + smoothing
        prior /= prior.sum()
        for v in members:
            pa_i, val = flat_idx[v]
            n_pa = int(np.prod([cards[p] for p in admg.parents(v)]))
            cv = int(cards[v])
            acc = np.zeros((n_pa, k, cv))
            for l in range(k):
                np.add.at(acc[:, l, :], (pa_i, val), resp[:, l])
            acc += smoothing
            acc /= acc.sum(axis=-1, keepdims=True)
            cpts[v] = acc.reshape(cpts[v].shape)
    terms = row_terms()
    top = terms.max(axis=1, keepdims=True)
    trace.append(float(np.sum(np.log(np.exp(terms - top).sum(axis=1)) + top.ravel())) + penalty())
    return prior, cpts, trace


def fit_cpts(
    admg: Admg,
    table: DiscreteTable,
    smoothing: float = 1.0,
    em_iters: int = 50,
    seed: int = 0,
    latent_mixture: bool = True,
) -> FittedModel:
    """Smoothed maximum-likelihood tables; districts get an EM-fitted latent.

    With ``latent_mixture=False`` bidirected edges are ignored and every node
    is conditioned on its observed parents only.
    """
    names = table.schema.names
    for name in admg.names:
        if name not in names:
            raise MissingColumn(name)
    cols = [names.index(name) for name in admg.names]
    codes = table.codes[:, cols]
    levels = tuple(table.levels[c] for c in cols)
    cards = np.array([info.card for info in levels], dtype=np.int64)
    cpts: list = [None] * admg.n_nodes
    latents = []
    trace = {}
    districts = admg.districts() if latent_mixture else []
    in_district = {v for d in districts for v in d}
    for v in range(admg.n_nodes):
        if v not in in_district:
            cpts[v] = _counts_cpt(codes, v, admg.parents(v), cards, smoothing)
    for d_index, members in enumerate(districts):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), d_index]))
        prior, fitted, tr = _fit_district(codes, admg, members, cards, smoothing, em_iters, rng)
        latents.append(DistrictLatent(tuple(members), len(prior), prior))
        for v in members:
            cpts[v] = fitted[v]
        trace[tuple(admg.names[v] for v in members)] = tr
    observed = {v: tuple(np.unique(codes[:, v]).tolist()) for v in range(admg.n_nodes)}
    return FittedModel(admg, levels, tuple(cpts), tuple(latents), smoothing, trace, observed, table.schema)


def model_from_cpts(admg: Admg, levels, cpts, latents=(), schema: Schema | None = None) -> FittedModel:
    """Build a model from known tables, e.g. the true mechanisms of a simulator."""
    cpts = tuple(np.asarray(c, dtype=float) for c in cpts)
    return FittedModel(admg, tuple(levels), cpts, tuple(latents), 0.0, {}, None, schema)
