"""Entropy-based resolution of circle marks left by FCI.

Each ambiguous edge is tested in two steps.  A search for a low-entropy latent
``Z`` that makes the pair conditionally independent decides whether the pair
is confounded.  Otherwise the direction with the smaller exogenous-noise
entropy wins, the noise entropy being estimated by a greedy minimum-entropy
coupling of the conditionals.  All entropies are in bits.
"""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .data_model import DiscreteTable, TIER
from .graphs import ARROW, CIRCLE, TAIL, Admg, Pag

log = logging.getLogger(__name__)

_EPS = 1e-300


@dataclass(frozen=True)
class JointDistribution:
    """Joint of two discrete variables; ``n`` is the sample size it was estimated from, if any."""

    p: np.ndarray
    support_x: tuple = ()
    support_y: tuple = ()
    n: int | None = None

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2 or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise ValueError("joint must be a non-negative matrix summing to one")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        if not self.support_x:
            object.__setattr__(self, "support_x", tuple(range(p.shape[0])))
        if not self.support_y:
            object.__setattr__(self, "support_y", tuple(range(p.shape[1])))

    @property
    def px(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def py(self) -> np.ndarray:
        return self.p.sum(axis=0)

    def transpose(self) -> "JointDistribution":
        return JointDistribution(self.p.T, self.support_y, self.support_x, self.n)


@dataclass(frozen=True)
class EntropicConfig:
    """Settings for latent search and edge orientation.

    ``betas`` is the continuation schedule of the entropy weight; a latent
    counts only when its residual conditional mutual information is at most
    ``cmi_tol`` bits.
    """

    theta_factor: float = 0.8
    latent_cardinality: int | None = None
    max_iters: int = 500
    tol: float = 1e-6
    restarts: int = 5
    seed: int = 0
    betas: tuple[float, ...] = (0.0, 0.05, 0.1, 0.2, 0.3, 0.5)
    cmi_tol: float = 0.01
    cmi_alpha: float | None = None
    smoothing: bool = True

    def __post_init__(self):
        if not 0.0 < self.theta_factor < 1.0:
            raise ValueError("theta_factor must lie in (0, 1)")
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")


@dataclass
class LatentSearchResult:
    q_z_given_xy: np.ndarray
    h_z: float
    cmi: float
    iterations_used: int
    converged: bool
    loss_trace: list = field(default_factory=list, repr=False)


class DirectionVerdictKind(enum.Enum):
    X_CAUSES_Y = "x_causes_y"
    Y_CAUSES_X = "y_causes_x"
    CONFOUNDED = "confounded"


@dataclass(frozen=True)
class DirectionVerdict:
    verdict: DirectionVerdictKind
    h_e_forward: float
    h_e_backward: float
    h_z: float


class DescentMonitor:
    """Counts latent-search iterations whose accepted loss went up."""

    def __init__(self):
        self.iterations = 0
        self.violations = 0

    def record(self, previous: float, current: float) -> None:
        self.iterations += 1
        if current > previous + 1e-12 * max(1.0, abs(previous)):
            self.violations += 1
            log.error("latent search loss increased: %r -> %r", previous, current)


descent_monitor = DescentMonitor()


def shannon_entropy(dist) -> float:
    d = np.asarray(dist, dtype=float).ravel()
    d = d[d > 0]
    return float(-np.sum(d * np.log2(d))) if d.size else 0.0


def _observed(table: DiscreteTable, var) -> tuple[int, np.ndarray, np.ndarray]:
    j = table.schema.index_of(var) if isinstance(var, str) else int(var)
    levels, codes = np.unique(table.codes[:, j], return_inverse=True)
    return j, levels, codes.reshape(-1)


def empirical_joint(table: DiscreteTable, x, y, smoothing: bool = True) -> JointDistribution:
    """Relative frequencies over observed levels, plus ``1/(kx*ky)`` per cell when smoothing."""
    _, lx, cx = _observed(table, x)
    _, ly, cy = _observed(table, y)
    kx, ky = len(lx), len(ly)
    counts = np.bincount(cx * ky + cy, minlength=kx * ky).reshape(kx, ky).astype(float)
    if smoothing:
        counts += 1.0 / (kx * ky)
    return JointDistribution(counts / counts.sum(), tuple(lx.tolist()), tuple(ly.tolist()), int(len(cx)))


# -- latent search ----------------------------------------------------------


def _stats(p: np.ndarray, q: np.ndarray):
    # q has shape (restarts, kx, ky, kz)
    r = p[None, :, :, None] * q
    return r.sum(axis=(1, 2)), r.sum(axis=2), r.sum(axis=1)


def _log2(a):
    return np.log2(np.maximum(a, 1e-300))


def _measure(p: np.ndarray, q: np.ndarray, stats=None) -> tuple[np.ndarray, np.ndarray]:
    """Per-restart ``I(X;Y|Z)`` and ``H(Z)`` in bits.

    Uses ``I = H(X,Z) + H(Y,Z) - H(Z) - H(X,Y) - sum p(x,y) H(Z | x, y)``.
    """
    qz, qxz, qyz = stats if stats is not None else _stats(p, q)
    h_xy = -np.sum(p * _log2(p))
    h_z_given_xy = -np.einsum("xy,rxyz->r", p, q * _log2(q))
    h_xz = -np.einsum("rxz,rxz->r", qxz, _log2(qxz))
    h_yz = -np.einsum("ryz,ryz->r", qyz, _log2(qyz))
    hz = -np.einsum("rz,rz->r", qz, _log2(qz))
    cmi = h_xz + h_yz - hz - h_xy - h_z_given_xy
    return np.maximum(cmi, 0.0), np.maximum(hz, 0.0)


def _cmi_and_hz(p: np.ndarray, q: np.ndarray):
    return _measure(p, q)


def _loss(p, q, beta, stats=None) -> np.ndarray:
    cmi, hz = _measure(p, q, stats)
    return cmi + beta * hz


def _update(p: np.ndarray, q: np.ndarray, beta: float, stats=None) -> np.ndarray:
    """``q(z|x,y) ~ q(z|x) q(z|y) / q(z)^(1-beta)``; ``beta = 0`` is the plain EM step."""
    qz, qxz, qyz = stats if stats is not None else _stats(p, q)
    px = p.sum(axis=1)
    py = p.sum(axis=0)
    qz_x = qxz / np.maximum(px[None, :, None], _EPS)
    qz_y = qyz / np.maximum(py[None, :, None], _EPS)
    qz_x /= np.maximum(qz, _EPS)[:, None, :] ** (1.0 - beta)
    new = qz_x[:, :, None, :] * qz_y[:, None, :, :]
    norm = new.sum(axis=3, keepdims=True)
    if np.all(norm > 0):
        return new / norm
    uniform = np.full_like(new, 1.0 / new.shape[3])
    return np.where(norm > 0, new / np.where(norm > 0, norm, 1.0), uniform)


def _descend(p, q, beta, cfg: EntropicConfig, traces: list):
    """Iterate the update at one entropy weight for every restart, never accepting a loss increase.

    A rejected full step is halved towards the current iterate; when no step
    helps the restart is treated as converged.
    """
    stats = _stats(p, q)
    loss = _loss(p, q, beta, stats)
    active = np.ones(len(q), dtype=bool)
    its = np.zeros(len(q), dtype=int)
    for _ in range(cfg.max_iters):
        idx = np.flatnonzero(active)
        if not idx.size:
            break
        cur = q[idx]
        cur_stats = tuple(a[idx] for a in stats)
        full = _update(p, cur, beta, cur_stats)
        cand = full.copy()
        cand_stats = _stats(p, cand)
        cand_loss = _loss(p, cand, beta, cand_stats)
        worse = np.flatnonzero(cand_loss > loss[idx])
        for j in worse:
            step = 1.0
            while cand_loss[j] > loss[idx[j]] and step > 1e-6:
                step /= 2
                cand[j] = (1 - step) * cur[j] + step * full[j]
                cand_loss[j] = _loss(p, cand[j:j + 1], beta)[0]
        if worse.size:
            cand_stats = _stats(p, cand)
        ok = cand_loss <= loss[idx]
        change = np.max(np.abs(cand - cur), axis=(1, 2, 3))
        for j in np.flatnonzero(ok):
            r = idx[j]
            descent_monitor.record(loss[r], cand_loss[j])
            traces[r].append(float(cand_loss[j]))
        acc = idx[ok]
        q[acc] = cand[ok]
        loss[acc] = cand_loss[ok]
        for a, c in zip(stats, cand_stats):
            a[acc] = c[ok]
        its[acc] += 1
        active[idx[~ok]] = False
        active[idx[ok & (change < cfg.tol)]] = False
    return q, its, ~active


def _tolerance(p: JointDistribution, q: np.ndarray, cfg: EntropicConfig) -> float:
    """Residual CMI allowed for a latent: fixed, or the sampling-noise level when ``n`` is known."""
    if cfg.cmi_alpha is None or not p.n:
        return cfg.cmi_tol
    qz = np.einsum("xy,xyz->z", p.p, q)
    states = max(int(np.sum(qz * p.n >= 1.0)), 1)
    kx, ky = p.p.shape
    dof = (kx - 1) * (ky - 1) * states
    return float(chi2.ppf(1.0 - cfg.cmi_alpha, dof)) / (2.0 * p.n * np.log(2.0))


def latent_search(p: JointDistribution, cfg: EntropicConfig | None = None, seed=None) -> LatentSearchResult:
    """Search for a low-entropy ``Z`` with ``X _||_ Y | Z`` under ``p``.

    For every restart the entropy weight follows ``cfg.betas``, each stage
    starting from the previous optimum and minimising ``I(X;Y|Z) + beta*H(Z)``.
    Among all stage optima whose ``I(X;Y|Z) <= cfg.cmi_tol`` the one with the
    smallest ``H(Z)`` is returned; if none qualifies, the one with the
    smallest residual ``I(X;Y|Z)``.
    """
    cfg = cfg or EntropicConfig()
    joint = p.p
    kx, ky = joint.shape
    kz = cfg.latent_cardinality or kx * ky
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    q = rng.dirichlet(np.ones(kz), size=(cfg.restarts, kx, ky))
    traces: list = [[] for _ in range(cfg.restarts)]
    best = None
    best_key = None
    total_its = 0
    for beta in cfg.betas:
        q, its, converged = _descend(joint, q, beta, cfg, traces)
        total_its += int(its.sum())
        cmi, hz = _cmi_and_hz(joint, q)
        for r in range(cfg.restarts):
            feasible = cmi[r] <= _tolerance(p, q[r], cfg)
            key = (0, hz[r], cmi[r]) if feasible else (1, cmi[r], hz[r])
            if best_key is None or key < best_key:
                best_key = key
                best = (q[r].copy(), float(hz[r]), float(cmi[r]), bool(converged[r]), list(traces[r]))
    qr, hzr, cmir, conv, trace = best
    return LatentSearchResult(qr, hzr, cmir, total_its, conv, trace)


def confounder_below_threshold(h_z: float, h_x: float, h_y: float, cfg: EntropicConfig | None = None) -> bool:
    cfg = cfg or EntropicConfig()
    return h_z < cfg.theta_factor * min(h_x, h_y)


# -- exogenous noise --------------------------------------------------------


def greedy_coupling_entropy(conditionals: np.ndarray) -> float:
    """Entropy of the greedy minimum-entropy coupling of the rows of ``conditionals``."""
    resid = np.array(conditionals, dtype=float, copy=True)
    if resid.ndim != 2 or resid.shape[0] == 0:
        return 0.0
    resid = resid / resid.sum(axis=1, keepdims=True)
    masses = []
    rows = np.arange(resid.shape[0])
    while resid.sum(axis=1).max() >= 1e-9:
        top = resid.argmax(axis=1)
        m = float(resid[rows, top].min())
        if m <= 0:
            break
        masses.append(m)
        resid[rows, top] -= m
        resid[resid < 1e-15] = 0.0
    return shannon_entropy(np.asarray(masses) / np.sum(masses))


def _conditionals(joint: np.ndarray) -> np.ndarray:
    rows = joint[joint.sum(axis=1) > 0]
    return rows / rows.sum(axis=1, keepdims=True)


def min_entropy_exogenous(table: DiscreteTable, cause, effect) -> float:
    """``H(E)`` for ``effect = f(cause, E)`` estimated from the empirical conditionals."""
    joint = empirical_joint(table, cause, effect, smoothing=False).p
    return greedy_coupling_entropy(_conditionals(joint))


def orient_edge(table: DiscreteTable, x, y, cfg: EntropicConfig | None = None, seed=None) -> DirectionVerdict:
    cfg = cfg or EntropicConfig()
    raw = empirical_joint(table, x, y, smoothing=False)
    if raw.p.shape[0] < 2 or raw.p.shape[1] < 2:
        return DirectionVerdict(DirectionVerdictKind.CONFOUNDED, 0.0, 0.0, 0.0)
    joint = empirical_joint(table, x, y, smoothing=cfg.smoothing)
    found = latent_search(joint, cfg, seed)
    h_x, h_y = shannon_entropy(raw.px), shannon_entropy(raw.py)
    h_fwd = greedy_coupling_entropy(_conditionals(raw.p))
    h_bwd = greedy_coupling_entropy(_conditionals(raw.p.T))
    if confounder_below_threshold(found.h_z, h_x, h_y, cfg):
        kind = DirectionVerdictKind.CONFOUNDED
    elif abs(h_fwd - h_bwd) < 1e-9:
        kind = DirectionVerdictKind.CONFOUNDED
    elif h_fwd < h_bwd:
        kind = DirectionVerdictKind.X_CAUSES_Y
    else:
        kind = DirectionVerdictKind.Y_CAUSES_X
    return DirectionVerdict(kind, h_fwd, h_bwd, found.h_z)


# -- PAG resolution ---------------------------------------------------------

_CANDIDATES = {
    DirectionVerdictKind.X_CAUSES_Y: (TAIL, ARROW),
    DirectionVerdictKind.Y_CAUSES_X: (ARROW, TAIL),
    DirectionVerdictKind.CONFOUNDED: (ARROW, ARROW),
}


def edge_seed(seed: int, a: int, b: int) -> int:
    return int(np.random.SeedSequence([int(seed), int(a), int(b)]).generate_state(1)[0])


def _creates_cycle(children: list[set], src: int, dst: int) -> bool:
    stack, seen = [dst], set()
    while stack:
        v = stack.pop()
        if v == src:
            return True
        if v in seen:
            continue
        seen.add(v)
        stack.extend(children[v])
    return False


def resolve_pag(pag: Pag, table: DiscreteTable, cfg: EntropicConfig | None = None, verdicts: dict | None = None) -> Admg:
    """Replace every circle mark and return an ADMG.

    Non-circle marks set by FCI or tier knowledge are kept.  A verdict that
    would point from a later tier into an earlier one is replaced by the tier
    order; a verdict incompatible with a fixed mark falls back to the
    compatible reading (bidirected when possible).  Directed edges that would
    close a cycle become bidirected.  Decisions are appended to ``log``.
    ``verdicts``, when given, receives the per-edge :class:`DirectionVerdict`.
    """
    cfg = cfg or EntropicConfig()
    tiers = [TIER[k] for k in pag.kinds]
    notes: list[str] = []
    p = pag.n_nodes
    children: list[set] = [set() for _ in range(p)]
    directed, bidirected = [], []

    def add(a, b, marks):
        if marks == (ARROW, ARROW):
            bidirected.append((a, b))
            return
        src, dst = (a, b) if marks == (TAIL, ARROW) else (b, a)
        if _creates_cycle(children, src, dst):
            notes.append(f"CycleIntroduced: {pag.names[src]} -> {pag.names[dst]} made bidirected")
            bidirected.append((a, b))
            return
        children[src].add(dst)
        directed.append((src, dst))

    edges = pag.edges()
    fixed = [e for e in edges if CIRCLE not in (e.mark_at_a, e.mark_at_b)]
    open_ = [e for e in edges if CIRCLE in (e.mark_at_a, e.mark_at_b)]
    for e in fixed:
        marks = (e.mark_at_a, e.mark_at_b)
        if marks == (TAIL, TAIL):
            notes.append(f"undirected {pag.names[e.a]} - {pag.names[e.b]} read as bidirected")
            marks = (ARROW, ARROW)
        add(e.a, e.b, marks)
    for e in open_:
        a, b = e.a, e.b
        verdict = orient_edge(table, a, b, cfg, seed=edge_seed(cfg.seed, a, b))
        if verdicts is not None:
            verdicts[(pag.names[a], pag.names[b])] = verdict
        kind = verdict.verdict
        if kind is DirectionVerdictKind.Y_CAUSES_X and tiers[b] > tiers[a]:
            notes.append(f"tier override: {pag.names[b]} -> {pag.names[a]} flipped")
            kind = DirectionVerdictKind.X_CAUSES_Y
        elif kind is DirectionVerdictKind.X_CAUSES_Y and tiers[a] > tiers[b]:
            notes.append(f"tier override: {pag.names[a]} -> {pag.names[b]} flipped")
            kind = DirectionVerdictKind.Y_CAUSES_X
        fixed_a = None if e.mark_at_a == CIRCLE else e.mark_at_a
        fixed_b = None if e.mark_at_b == CIRCLE else e.mark_at_b

        def compatible(m):
            return (fixed_a is None or m[0] == fixed_a) and (fixed_b is None or m[1] == fixed_b)

        marks = _CANDIDATES[kind]
        if not compatible(marks):
            options = [m for m in ((ARROW, ARROW), (TAIL, ARROW), (ARROW, TAIL)) if compatible(m)]
            marks = options[0] if options else (ARROW, ARROW)
            notes.append(
                f"{pag.names[a]} {e.symbol()} {pag.names[b]}: verdict {kind.value} incompatible with fixed marks"
            )
        add(a, b, marks)
    for note in notes:
        log.info(note)
    admg = Admg(pag.names, pag.kinds, directed, bidirected)
    admg.log = list(pag.log) + notes
    return admg


__all__ = [
    "JointDistribution",
    "EntropicConfig",
    "LatentSearchResult",
    "DirectionVerdict",
    "DirectionVerdictKind",
    "descent_monitor",
    "empirical_joint",
    "shannon_entropy",
    "latent_search",
    "confounder_below_threshold",
    "greedy_coupling_entropy",
    "min_entropy_exogenous",
    "orient_edge",
    "resolve_pag",
]
