"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 data error, 3 no fault observed,
4 the repair loop ended without a fix.
"""

from __future__ import annotations

import argparse
import json
import shlex
import sys
from pathlib import Path

from .causal_discovery import learn_pag
from .causal_inference import PathConfig, extract_paths, fit_cpts, rank_paths, score_paths
from .ci_tests import CiConfig
from .data_model import FaultSpec, Schema, discretize, load_observations
from .engine import Budget, DiagnosisConfig, SessionStatus, SubprocessEvaluator, diagnose, repair_loop
from .entropic_orientation import EntropicConfig, resolve_pag
from .errors import CausalDebugError, DataError, EvaluatorFailure, NoFaultObserved
from .simulator import GroundTruthScm, ScmSpec, SimulatorEvaluator, generate_scm, sample_observational, score_diagnosis

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NO_FAULT, EXIT_NOT_FIXED = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _load(args):
    if not args.schema or not args.data:
        raise UsageError("--schema and --data are required")
    schema = Schema.loads(_read(args.schema))
    return load_observations(_read(args.data), schema)


def _targets(args, table) -> tuple:
    if args.targets:
        return tuple(t.strip() for t in args.targets.split(",") if t.strip())
    return tuple(table.schema.nfps)


def _fault(args, table) -> FaultSpec:
    return FaultSpec(_targets(args, table), args.percentile, args.row)


def _config(args) -> DiagnosisConfig:
    return DiagnosisConfig(
        alpha=args.alpha, bins=args.bins, k_paths=args.k, seed=args.seed,
        entropic=EntropicConfig(seed=args.seed),
    )


def cmd_simulate(args) -> int:
    if not args.out:
        raise UsageError("simulate needs --out DIR")
    spec = ScmSpec(
        n_options=args.options, n_events=args.events, n_nfps=args.nfps,
        n_latents=args.latents, seed=args.seed,
    )
    scm = generate_scm(spec)
    table = sample_observational(scm, args.rows, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "data.csv").write_text(table.to_csv())
    (out / "schema.json").write_text(table.schema.dumps())
    (out / "scm.json").write_text(scm.dumps())
    return EXIT_OK


def _learn(args, table):
    dtable = discretize(table, args.bins)
    pag = learn_pag(dtable, CiConfig(alpha=args.alpha))
    admg = resolve_pag(pag, dtable, EntropicConfig(seed=args.seed))
    return dtable, pag, admg


def cmd_discover(args) -> int:
    table = _load(args)
    _, pag, admg = _learn(args, table)
    _emit(_dumps({"pag": pag.to_json(), "admg": admg.to_json(), "log": list(admg.log)}), args.out)
    if args.dot:
        Path(args.dot).write_text(admg.to_dot())
    return EXIT_OK


def cmd_paths(args) -> int:
    table = _load(args)
    targets = _targets(args, table)
    dtable, _, admg = _learn(args, table)
    model = fit_cpts(admg, dtable, seed=args.seed)
    paths = []
    for t in targets:
        paths.extend(extract_paths(admg, t))
    ranked = rank_paths(score_paths(model, paths), PathConfig(args.k), admg)
    _emit(_dumps({"targets": list(targets), "paths": [p.to_json() for p in ranked]}), args.out)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    table = _load(args)
    report = diagnose(table, _fault(args, table), _config(args))
    _emit(report.dumps(), args.out)
    return EXIT_OK


def cmd_repair(args) -> int:
    table = _load(args)
    if not args.evaluator_cmd:
        raise UsageError("repair needs --evaluator-cmd")
    evaluator = SubprocessEvaluator(shlex.split(args.evaluator_cmd))
    outcome = repair_loop(
        table, _fault(args, table), evaluator, Budget(max_evaluations=args.budget, repeats_per_measurement=args.repeats),
        _config(args), args.target_gain,
    )
    _emit(outcome.dumps(), args.out)
    return EXIT_OK if outcome.status is SessionStatus.FIXED else EXIT_NOT_FIXED


def cmd_score(args) -> int:
    if not args.report or not args.scm:
        raise UsageError("score needs --report and --scm")
    report = json.loads(_read(args.report))
    if "report" in report and "fault" not in report:
        report = report["report"]
    scm = GroundTruthScm.loads(_read(args.scm))
    metrics = score_diagnosis(argparse.Namespace(**report), scm)
    _emit(_dumps(metrics), args.out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    """Subprocess evaluator backed by a pinned simulator system."""
    if not args.scm:
        raise UsageError("evaluate needs --scm")
    scm = GroundTruthScm.loads(_read(args.scm))
    request = json.loads(sys.stdin.read())
    result = SimulatorEvaluator(scm, args.seed).measure(request["assignment"], int(request.get("repeat", 0)))
    sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--schema")
    common.add_argument("--data")
    common.add_argument("--out")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--alpha", type=float, default=0.05)
    common.add_argument("--bins", type=int, default=10)
    common.add_argument("--k", type=int, default=3)
    common.add_argument("--percentile", type=float, default=99.0)
    common.add_argument("--targets", help="comma-separated NFP names (default: every NFP)")
    common.add_argument("--row", type=int, default=None, help="faulty row index (default: the worst faulty row)")
    common.add_argument("--json", action="store_true", help="report errors as JSON on standard output")

    parser = _Parser(prog="causaldebug", description="Causal debugging of non-functional faults.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="generate a ground-truth system and sample it")
    p.add_argument("--rows", type=int, default=2000)
    p.add_argument("--options", type=int, default=4)
    p.add_argument("--events", type=int, default=4)
    p.add_argument("--nfps", type=int, default=1)
    p.add_argument("--latents", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("discover", parents=[common], help="learn the causal graph")
    p.add_argument("--dot")
    p.set_defaults(func=cmd_discover)

    p = sub.add_parser("paths", parents=[common], help="rank causal paths into the targets")
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("diagnose", parents=[common], help="root causes and repairs for a fault")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("repair", parents=[common], help="run the repair loop against an evaluator command")
    p.add_argument("--budget", type=int, default=25)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--evaluator-cmd")
    p.add_argument("--target-gain", type=float, default=None)
    p.set_defaults(func=cmd_repair)

    p = sub.add_parser("score", parents=[common], help="score a diagnosis against a pinned system")
    p.add_argument("--report")
    p.add_argument("--scm")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("evaluate", parents=[common], help="answer one evaluator request from a pinned system")
    p.add_argument("--scm")
    p.set_defaults(func=cmd_evaluate)
    return parser


def _fail(args, code: int, kind: str, message: str) -> int:
    sys.stderr.write(f"causaldebug: {message}\n")
    if args is not None and getattr(args, "json", False):
        sys.stdout.write(_dumps({"error": kind, "message": message, "exit_code": code}))
    return code


def main(argv=None) -> int:
    parser = build_parser()
    args = None
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "func", None):
            raise UsageError("a subcommand is required")
        return args.func(args)
    except UsageError as exc:
        return _fail(args, EXIT_USAGE, "usage", str(exc))
    except NoFaultObserved as exc:
        return _fail(args, EXIT_NO_FAULT, type(exc).__name__, str(exc))
    except (DataError, EvaluatorFailure, json.JSONDecodeError, KeyError) as exc:
        return _fail(args, EXIT_DATA, type(exc).__name__, str(exc))
    except CausalDebugError as exc:
        return _fail(args, EXIT_DATA, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
