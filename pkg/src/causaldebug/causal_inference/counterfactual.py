"""Twin-network counterfactuals over a fitted discrete model.

Each node is read as ``v = F^-1(u | parents, latent)`` with ``u`` uniform on
[0, 1), the inverse CDF of its table.  Observing the factual row pins ``u``
to the interval ``[F(v-1), F(v))``; the twin copy reuses that ``u`` under the
new parent values.  District latents are updated from the factual row.
"""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from ..errors import TooLarge
from .factors import Factor, eliminate
from .model import FittedModel

MAX_FACTOR = 10**6
MC_SAMPLES = 10**4


def _cdf(cpt: np.ndarray) -> np.ndarray:
    upper = np.cumsum(cpt, axis=-1)
    upper[..., -1] = 1.0
    return upper


def _twin_kernel(model: FittedModel, v: int, factual: Mapping[int, int]) -> np.ndarray:
    """``T[pa', latent, v'] = P(v' | pa', latent, factual v, factual pa)`` as an array over the node scope."""
    cpt = model.cpts[v]
    upper = _cdf(cpt)
    lower = upper - cpt
    parents = model.parents(v)
    idx = tuple(factual[p] for p in parents)
    f_lo = lower[idx][..., factual[v]]
    f_hi = upper[idx][..., factual[v]]
    width = f_hi - f_lo
    has_latent = model.latent_of(v) is not None
    # broadcast factual interval (latent axis or scalar) against the twin's intervals
    n_pa = len(parents)
    shape = (1,) * n_pa + ((cpt.shape[n_pa],) if has_latent else ()) + (1,)
    f_lo = np.reshape(f_lo, shape)
    f_hi = np.reshape(f_hi, shape)
    width = np.reshape(width, shape)
    overlap = np.clip(np.minimum(upper, f_hi) - np.maximum(lower, f_lo), 0.0, None)
    safe = np.where(width > 0, width, 1.0)
    kernel = overlap / safe
    # a zero-probability factual value carries no information: fall back to the prior
    return np.where(width > 0, kernel, cpt)


def latent_posteriors(model: FittedModel, factual: Mapping[int, int]) -> dict[int, np.ndarray]:
    out = {}
    for d, lat in enumerate(model.latents):
        logp = np.log(np.maximum(lat.prior, 1e-300))
        for v in lat.members:
            idx = tuple(factual[p] for p in model.parents(v))
            logp = logp + np.log(np.maximum(model.cpts[v][idx][:, factual[v]], 1e-300))
        w = np.exp(logp - logp.max())
        out[d] = w / w.sum()
    return out


def _factual_codes(model: FittedModel, factual) -> dict[int, int]:
    if isinstance(factual, Mapping):
        return {model.index(k): int(v) for k, v in factual.items()}
    return {v: int(c) for v, c in enumerate(factual)}


def twin_distribution(
    model: FittedModel,
    factual,
    intervention: Mapping,
    targets,
    rng_seed: int = 0,
    max_factor: int = MAX_FACTOR,
) -> tuple[np.ndarray, bool]:
    """Counterfactual joint of ``targets`` after ``intervention``; second item flags Monte Carlo."""
    fact = _factual_codes(model, factual)
    missing = [model.names[v] for v in range(model.n_nodes) if v not in fact]
    if missing:
        raise ValueError(f"factual row lacks {missing}")
    do = {model.index(k): int(v) for k, v in intervention.items()}
    targets = [model.index(t) for t in targets]
    changed = model.admg.descendants(do)
    post = latent_posteriors(model, fact)
    # nodes outside the intervention's descendants keep their factual value
    fixed = {v: fact[v] for v in range(model.n_nodes) if v not in changed}
    fixed.update(do)
    free_targets = [t for t in targets if t not in fixed]
    relevant = model.admg.ancestors(free_targets, cut=fixed) - set(fixed)
    factors = []
    districts = set()
    for v in sorted(relevant):
        factors.append(Factor(model.scope(v), _twin_kernel(model, v, fact)).reduce(fixed))
        d = model.latent_of(v)
        if d is not None:
            districts.add(d)
    factors.extend(Factor((model.latent_var(d),), post[d]) for d in sorted(districts))
    try:
        joint = eliminate(factors, tuple(free_targets), max_size=max_factor).table if free_targets else np.array(1.0)
        mc = False
    except TooLarge:
        joint = _monte_carlo(model, fact, do, fixed, free_targets, post, rng_seed)
        mc = True
    joint = joint / joint.sum()
    return _embed(model, joint, targets, free_targets, fixed), mc


def _embed(model, joint, targets, free_targets, fixed) -> np.ndarray:
    shape = [model.card(t) for t in targets]
    out = np.zeros(shape)
    idx = []
    src_axes = []
    for t in targets:
        if t in fixed:
            idx.append(fixed[t])
        else:
            idx.append(slice(None))
            src_axes.append(free_targets.index(t))
    out[tuple(idx)] = np.transpose(joint, src_axes) if src_axes else joint
    return out


def _monte_carlo(model, fact, do, fixed, free_targets, post, seed) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = MC_SAMPLES
    latent = {d: rng.choice(len(p), size=n, p=p) for d, p in post.items()}
    values = {v: np.full(n, c, dtype=np.int64) for v, c in fixed.items()}
    for v in model.admg.topological_order():
        if v in values:
            continue
        cpt = model.cpts[v]
        upper = _cdf(cpt)
        d = model.latent_of(v)
        f_idx = tuple(fact[p] for p in model.parents(v))
        lat = latent[d] if d is not None else None
        row = (upper[f_idx] if d is None else upper[f_idx][lat])
        f_hi = row[..., fact[v]] if d is None else row[np.arange(n), fact[v]]
        f_lo = f_hi - (cpt[f_idx][..., fact[v]] if d is None else cpt[f_idx][lat, fact[v]])
        u = f_lo + rng.random(n) * (f_hi - f_lo)
        t_idx = tuple(values[p] for p in model.parents(v)) + ((lat,) if d is not None else ())
        twin_upper = upper[t_idx]
        values[v] = np.minimum((twin_upper <= u[:, None]).sum(axis=1), cpt.shape[-1] - 1)
    shape = [model.card(t) for t in free_targets]
    flat = np.ravel_multi_index(tuple(values[t] for t in free_targets), shape)
    return np.bincount(flat, minlength=int(np.prod(shape))).reshape(shape).astype(float)


def counterfactual_outcome_probability(
    model: FittedModel,
    factual,
    intervention: Mapping,
    outcome_event: Callable | np.ndarray,
    targets=None,
) -> float:
    """Probability that ``outcome_event`` holds in the twin world after ``intervention``.

    ``outcome_event`` is a boolean array over the joint levels of ``targets``
    (default: every NFP), or a predicate taking one level index per target.
    """
    if targets is None:
        targets = [v for v in range(model.n_nodes) if model.admg.tiers[v] == 2]
    targets = [model.index(t) for t in targets]
    joint, _ = twin_distribution(model, factual, intervention, targets)
    if callable(outcome_event):
        mask = np.zeros(joint.shape, dtype=bool)
        for idx in np.ndindex(*joint.shape):
            mask[idx] = bool(outcome_event(*idx))
    else:
        mask = np.asarray(outcome_event, dtype=bool)
    return float(np.clip(np.sum(joint[mask]), 0.0, 1.0))
