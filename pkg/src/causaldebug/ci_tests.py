"""Conditional independence tests on discretized data."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.stats import chi2

from .data_model import DiscreteTable


@dataclass(frozen=True)
class CiConfig:
    alpha: float = 0.05
    min_samples_per_dof: float = 5.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.min_samples_per_dof <= 0:
            raise ValueError("min_samples_per_dof must be positive")


@dataclass(frozen=True)
class CITestResult:
    statistic: float
    p_value: float
    dof: int
    effective: bool
    method: str = "g2"


def _resolve(table: DiscreteTable, var) -> int:
    return table.schema.index_of(var) if isinstance(var, str) else int(var)


def _compact(col: np.ndarray) -> tuple[np.ndarray, int]:
    levels, inverse = np.unique(col, return_inverse=True)
    return inverse.reshape(-1), len(levels)


def g_square_test(table: DiscreteTable, x, y, cond: Iterable = (), cfg: CiConfig | None = None) -> CITestResult:
    """Likelihood-ratio chi-square test of ``x _||_ y | cond``, pooled over strata.

    Level counts are the levels actually observed, so
    ``dof = (|X|-1)(|Y|-1) * prod |S_i|``.  A test with fewer than
    ``min_samples_per_dof * dof`` rows is not effective and reports p = 1.
    """
    cfg = cfg or CiConfig()
    xi, yi = _resolve(table, x), _resolve(table, y)
    ci = [_resolve(table, c) for c in cond]
    if xi == yi or xi in ci or yi in ci:
        raise ValueError("x and y must differ and lie outside the conditioning set")
    n = table.n_rows
    xc, kx = _compact(table.codes[:, xi])
    yc, ky = _compact(table.codes[:, yi])
    if kx < 2 or ky < 2:
        return CITestResult(0.0, 1.0, 0, False)

    strata = np.zeros(n, dtype=np.int64)
    prod_levels = 1
    for c in ci:
        cc, kc = _compact(table.codes[:, c])
        strata = strata * kc + cc
        prod_levels *= kc
    strata, n_strata = _compact(strata)

    dof = (kx - 1) * (ky - 1) * prod_levels
    counts = np.bincount((strata * kx + xc) * ky + yc, minlength=n_strata * kx * ky)
    counts = counts.reshape(n_strata, kx, ky).astype(float)
    row = counts.sum(axis=2, keepdims=True)
    col = counts.sum(axis=1, keepdims=True)
    tot = counts.sum(axis=(1, 2), keepdims=True)
    expected = row * col / tot
    mask = counts > 0
    g2 = 2.0 * float(np.sum(counts[mask] * np.log(counts[mask] / expected[mask])))
    g2 = max(g2, 0.0)
    if n < cfg.min_samples_per_dof * dof:
        return CITestResult(g2, 1.0, dof, False)
    p = float(chi2.sf(g2, dof))
    return CITestResult(g2, min(max(p, 0.0), 1.0), dof, True)


def _log_comb(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def fisher_exact_2x2(counts) -> float:
    """Two-sided Fisher exact p-value by enumerating tables with fixed margins."""
    (a, b), (c, d) = np.asarray(counts, dtype=np.int64).tolist()
    if min(a, b, c, d) < 0:
        raise ValueError("counts must be non-negative")
    if a + b + c + d == 0:
        raise ValueError("table must have at least one nonzero cell")
    r1, r2, c1 = a + b, c + d, a + c
    n = r1 + r2
    lo, hi = max(0, c1 - r2), min(r1, c1)
    log_den = _log_comb(n, c1)

    def logp(k):
        return _log_comb(r1, k) + _log_comb(r2, c1 - k) - log_den

    observed = logp(a)
    cutoff = observed + 1e-7
    total = 0.0
    for k in range(lo, hi + 1):
        lp = logp(k)
        if lp <= cutoff:
            total += math.exp(lp)
    return min(total, 1.0)


def independence_test(table: DiscreteTable, x, y, cond: Iterable = (), cfg: CiConfig | None = None) -> CITestResult:
    """Fisher's exact test for unconditional 2x2 tables, G-square otherwise."""
    cond = tuple(cond)
    if not cond:
        xi, yi = _resolve(table, x), _resolve(table, y)
        xc, kx = _compact(table.codes[:, xi])
        yc, ky = _compact(table.codes[:, yi])
        if kx == 2 and ky == 2:
            counts = np.bincount(xc * 2 + yc, minlength=4).reshape(2, 2)
            p = fisher_exact_2x2(counts)
            a, b, c, d = counts.ravel().tolist()
            odds = (a * d) / (b * c) if b * c else math.inf
            return CITestResult(float(odds), p, 1, True, "fisher")
    return g_square_test(table, x, y, cond, cfg)


def is_independent(result: CITestResult, cfg: CiConfig | None = None) -> bool:
    cfg = cfg or CiConfig()
    return (not result.effective) or result.p_value > cfg.alpha
