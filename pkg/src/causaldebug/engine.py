"""The debugging loop: diagnose, recommend a repair, measure it, learn, repeat."""

from __future__ import annotations

import enum
import json
import logging
import subprocess
import time
from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

import numpy as np

from .causal_discovery import learn_pag
from .causal_inference import (
    DiagnosisReport,
    PathConfig,
    ace,
    best_repair,
    extract_paths,
    fit_cpts,
    generate_repair_set,
    ite,
    rank_paths,
    score_paths,
)
from .causal_inference.repair import REPAIR_CAP, repair_order_key
from .ci_tests import CiConfig
from .data_model import (
    FaultSpec,
    ObservationTable,
    Schema,
    VariableKind,
    compute_gain,
    discretize,
    fault_thresholds,
    is_faulty,
    label_faults,
    level_info,
)
from .entropic_orientation import EntropicConfig, resolve_pag
from .errors import EvaluatorFailure, NoFaultObserved, NoIntervenableOption

log = logging.getLogger(__name__)


class SystemEvaluator(Protocol):
    def measure(self, assignment: Mapping, repeat: int) -> dict:
        """Return ``{"events": {...}, "nfps": {...}}`` for one run of ``assignment``."""


@dataclass(frozen=True)
class Budget:
    max_evaluations: int = 25
    repeats_per_measurement: int = 5
    wallclock_limit: float | None = None

    def __post_init__(self):
        if self.max_evaluations < 1 or self.repeats_per_measurement < 1:
            raise ValueError("budget counts must be positive")
        if self.wallclock_limit is not None and self.wallclock_limit <= 0:
            raise ValueError("wallclock_limit must be positive")


@dataclass(frozen=True)
class DiagnosisConfig:
    alpha: float = 0.05
    bins: int = 10
    max_cond_size: int = 3
    k_paths: int = 3
    smoothing: float = 1.0
    repair_cap: int = REPAIR_CAP
    latent_mixture: bool = True
    seed: int = 0
    entropic: EntropicConfig | None = None

    def entropic_config(self) -> EntropicConfig:
        return self.entropic or EntropicConfig(seed=self.seed)


def select_faulty_row(table: ObservationTable, fault: FaultSpec, thresholds: Mapping[str, float]) -> int:
    """The requested row, or the faulty row that is worst on the first target."""
    labels = label_faults(table, fault, thresholds)
    if fault.faulty_row_index is not None:
        i = int(fault.faulty_row_index)
        if not 0 <= i < table.n_rows or not labels[i]:
            raise NoFaultObserved(f"row {i} is not faulty under the given thresholds")
        return i
    rows = np.flatnonzero(labels)
    if not rows.size:
        raise NoFaultObserved("no row is worse than the fault thresholds")
    first = fault.targets[0]
    values = table.column(first)[rows]
    lower_better = table.schema[first].direction.value == "lower_is_better"
    pick = int(np.argmax(values)) if lower_better else int(np.argmin(values))
    return int(rows[pick])


def _option_domains(schema: Schema, bins: int) -> dict[str, list]:
    out = {}
    for var in schema:
        if var.kind is VariableKind.CONFIG_OPTION:
            if var.is_continuous:
                out[var.name] = [float(x) for x in level_info(var, bins).values]
            else:
                out[var.name] = list(var.domain)
    return out


def diagnose(
    table: ObservationTable,
    fault: FaultSpec,
    cfg: DiagnosisConfig | None = None,
    thresholds: Mapping[str, float] | None = None,
) -> DiagnosisReport:
    """Learn the causal model, rank causal paths and score candidate repairs."""
    cfg = cfg or DiagnosisConfig()
    fault.validate(table.schema)
    thresholds = dict(thresholds) if thresholds is not None else fault_thresholds(table, fault)
    row = select_faulty_row(table, fault, thresholds)
    flags: list[str] = []

    dtable = discretize(table, cfg.bins)
    pag = learn_pag(dtable, CiConfig(alpha=cfg.alpha), cfg.max_cond_size)
    admg = resolve_pag(pag, dtable, cfg.entropic_config())
    model = fit_cpts(admg, dtable, cfg.smoothing, seed=cfg.seed, latent_mixture=cfg.latent_mixture)

    paths = []
    for target in fault.targets:
        paths.extend(extract_paths(admg, target))
    top = rank_paths(score_paths(model, paths), PathConfig(cfg.k_paths), admg)
    root_causes = []
    for path in top:
        for name in path.nodes:
            if table.schema[name].kind is VariableKind.CONFIG_OPTION and name not in root_causes:
                root_causes.append(name)

    repairs = []
    factual = dtable.codes[row]
    try:
        scores = {o: max(ace(model, t, o) for t in fault.targets) for o in root_causes}
        candidates = generate_repair_set(top, table.schema, cfg.repair_cap, scores, _option_domains(table.schema, cfg.bins))
        if candidates.fallback:
            flags.append("repair_set_fallback")
        repairs = [ite(model, a, factual, fault, thresholds) for a in candidates]
    except NoIntervenableOption:
        flags.append("no_intervenable_option")
    repairs.sort(key=repair_order_key)
    best = best_repair(repairs) if repairs else None
    if best is not None and best.non_improving:
        flags.append("non_improving")
    if any(r.monte_carlo for r in repairs):
        flags.append("monte_carlo")
    fault_json = fault.to_json()
    fault_json["faulty_row_index"] = row
    return DiagnosisReport(
        fault=fault_json,
        thresholds=thresholds,
        factual_row=row,
        paths=top,
        root_causes=root_causes,
        repairs=repairs,
        best_repair=best,
        flags=flags,
        graph=admg.to_json(),
    )


# -- the loop ---------------------------------------------------------------


class SessionStatus(enum.Enum):
    FIXED = "fixed"
    BUDGET_EXHAUSTED = "budget_exhausted"
    NON_IMPROVING = "non_improving"


@dataclass
class Evaluation:
    assignment: dict
    events: dict
    nfps: dict
    gain: dict
    faulty: bool

    def to_json(self) -> dict:
        return {
            "assignment": dict(self.assignment),
            "events": dict(self.events),
            "nfps": dict(self.nfps),
            "gain": dict(self.gain),
            "faulty": self.faulty,
        }


@dataclass
class SessionOutcome:
    status: SessionStatus
    evaluations: list
    report: DiagnosisReport | None
    best_gain: dict
    thresholds: dict
    factual_row: int
    table: ObservationTable | None = field(default=None, repr=False)
    skipped: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "status": self.status.value,
            "evaluations": [e.to_json() for e in self.evaluations],
            "best_gain": dict(self.best_gain),
            "thresholds": dict(self.thresholds),
            "factual_row": self.factual_row,
            "skipped": [dict(s) for s in self.skipped],
            "report": self.report.to_json() if self.report is not None else None,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def _key(assignment: Mapping) -> tuple:
    return tuple(sorted((k, repr(v)) for k, v in assignment.items()))


def measure_averaged(evaluator: SystemEvaluator, schema: Schema, assignment: Mapping, repeats: int) -> dict:
    """Run ``repeats`` measurements; continuous values are averaged, discrete ones take the mode.

    A failing run is retried once before :class:`EvaluatorFailure` propagates.
    """
    runs = []
    for k in range(repeats):
        for attempt in (1, 2):
            try:
                runs.append(evaluator.measure(dict(assignment), k))
                break
            except EvaluatorFailure as exc:
                if attempt == 2:
                    raise EvaluatorFailure(str(exc), attempt) from exc
                log.warning("evaluation failed, retrying: %s", exc)
    out = {"events": {}, "nfps": {}}
    for group in out:
        for name in runs[0][group]:
            values = [r[group][name] for r in runs]
            var = schema[name]
            if var.is_continuous:
                out[group][name] = float(np.mean([float(v) for v in values]))
            else:
                counts = Counter(var.encode(v) for v in values)
                code = min(counts, key=lambda c: (-counts[c], c))
                out[group][name] = var.decode(code)
    for var in schema:
        if var.kind is not VariableKind.CONFIG_OPTION and var.name not in out["events"] and var.name not in out["nfps"]:
            raise EvaluatorFailure(f"evaluator did not report {var.name!r}", 1)
    return out


def repair_loop(
    table: ObservationTable,
    fault: FaultSpec,
    evaluator: SystemEvaluator,
    budget: Budget | None = None,
    cfg: DiagnosisConfig | None = None,
    target_gain: float | None = None,
) -> SessionOutcome:
    """Repeat diagnose, evaluate the best untried repair, append the result.

    Thresholds and the faulty row are fixed at the start.  A measurement is a
    fix when it is no longer faulty and improves every target; with
    ``target_gain`` each target must also improve by at least that many percent.
    """
    budget = budget or Budget()
    cfg = cfg or DiagnosisConfig()
    fault.validate(table.schema)
    thresholds = fault_thresholds(table, fault)
    row = select_faulty_row(table, fault, thresholds)
    schema = table.schema
    fault_values = {t: float(table.column(t)[row]) for t in fault.targets}
    factual = table.row_dict(row)
    pinned = FaultSpec(fault.targets, fault.percentile, row)
    tried: set = set()
    evaluations: list[Evaluation] = []
    skipped: list = []
    best_gain = {t: None for t in fault.targets}
    report = None
    start = time.monotonic()
    status = SessionStatus.BUDGET_EXHAUSTED
    attempts = 0
    while attempts < budget.max_evaluations:
        if budget.wallclock_limit is not None and time.monotonic() - start > budget.wallclock_limit:
            break
        report = diagnose(table, pinned, cfg, thresholds)
        candidate = None
        for rep in report.repairs:
            config = {name: factual[name] for name in schema.options}
            config.update(rep.assignment)
            if _key(config) not in tried:
                candidate = config
                break
        if candidate is None:
            status = SessionStatus.NON_IMPROVING
            break
        tried.add(_key(candidate))
        attempts += 1
        try:
            measured = measure_averaged(evaluator, schema, candidate, budget.repeats_per_measurement)
        except EvaluatorFailure as exc:
            log.warning("skipping candidate after repeated failure: %s", exc)
            skipped.append(candidate)
            continue
        values = {**candidate, **measured["events"], **measured["nfps"]}
        table = table.append([values])
        nfps = {t: float(measured["nfps"][t]) for t in fault.targets}
        gain = {t: compute_gain(fault_values[t], nfps[t], schema[t].direction) for t in fault.targets}
        for t, g in gain.items():
            if best_gain[t] is None or g > best_gain[t]:
                best_gain[t] = g
        faulty = is_faulty(nfps, thresholds, schema)
        evaluations.append(Evaluation(candidate, dict(measured["events"]), nfps, gain, faulty))
        fixed = not faulty and all(g > 0 for g in gain.values())
        if fixed and target_gain is not None:
            fixed = all(g >= target_gain for g in gain.values())
        if fixed:
            status = SessionStatus.FIXED
            break
    return SessionOutcome(status, evaluations, report, best_gain, thresholds, row, table, skipped)


# -- bootstrap and subprocess evaluators ------------------------------------


@dataclass
class BootstrapSample:
    assignments: list
    exhaustive: bool = False

    def __iter__(self):
        return iter(self.assignments)

    def __len__(self):
        return len(self.assignments)


def bootstrap_samples(schema: Schema, n: int = 25, seed: int = 0, bins: int = 10) -> BootstrapSample:
    """Distinct uniformly random option assignments; the whole space when ``n`` covers it."""
    if n < 1:
        raise ValueError("n must be at least 1")
    domains = _option_domains(schema, bins)
    names = list(domains)
    sizes = [len(domains[o]) for o in names]
    space = int(np.prod(sizes, dtype=float))
    rng = np.random.default_rng(seed)
    if n >= space:
        picks = range(space)
        exhaustive = True
    else:
        picks = sorted(rng.choice(space, size=n, replace=False).tolist()) if space < 10**7 else None
        exhaustive = False
        if picks is None:
            seen, picks = set(), []
            while len(picks) < n:
                flat = tuple(int(rng.integers(s)) for s in sizes)
                if flat not in seen:
                    seen.add(flat)
                    picks.append(flat)
    out = []
    for p in picks:
        idx = p if isinstance(p, tuple) else np.unravel_index(p, sizes)
        out.append({o: domains[o][int(i)] for o, i in zip(names, idx)})
    if not exhaustive:
        order = rng.permutation(len(out))
        out = [out[i] for i in order]
    return BootstrapSample(out, exhaustive)


class SubprocessEvaluator:
    """Runs an external command per measurement.

    The command receives ``{"assignment": {...}, "repeat": k}`` on standard
    input and must print ``{"events": {...}, "nfps": {...}}``.
    """

    def __init__(self, command: Sequence[str] | str, timeout: float | None = 60.0):
        self.command = [command] if isinstance(command, str) else list(command)
        self.timeout = timeout

    def measure(self, assignment: Mapping, repeat: int = 0) -> dict:
        payload = json.dumps({"assignment": dict(assignment), "repeat": int(repeat)}, sort_keys=True)
        try:
            proc = subprocess.run(
                self.command, input=payload, capture_output=True, text=True, timeout=self.timeout, check=False
            )
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise EvaluatorFailure(f"evaluator could not run: {exc}", 1) from exc
        if proc.returncode != 0:
            raise EvaluatorFailure(f"evaluator exited with status {proc.returncode}: {proc.stderr.strip()}", 1)
        try:
            out = json.loads(proc.stdout)
        except json.JSONDecodeError as exc:
            raise EvaluatorFailure(f"evaluator printed invalid JSON: {exc}", 1) from exc
        if not isinstance(out, dict) or not isinstance(out.get("events"), dict) or not isinstance(out.get("nfps"), dict):
            raise EvaluatorFailure("evaluator output needs 'events' and 'nfps' objects", 1)
        return out
