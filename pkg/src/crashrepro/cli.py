"""Command-line entry point binding all modules.

Sub-commands and exit codes:

* ``reproduce`` — one search run: 0 reproduced, 1 not reproduced, 2 usage/config error
* ``bench``     — repeated-run experiment over a suite directory: 0 on a
  completed experiment (coverage outcomes are data, not errors), 2 on a
  malformed suite
* ``oracle``    — exhaustive reachability: 0 reachable, 1 unreachable,
  2 usage error, 3 enumeration too large
* ``parse-trace`` — normalize a trace file to canonical text: 0 ok, 2 malformed

The evaluation budget may be overridden by the CRASHREPRO_EVALUATION_BUDGET
environment variable; everything else is flags only.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

import yaml

from . import engine, experiment, oracle
from .engine import ConfigError, SearchConfig, run_record_to_lines
from .genome import genome_to_text
from .ioutil import write_atomic
from .operators import OperatorConfig
from .scenario import (
    ScenarioBackend,
    ScenarioParseError,
    ScenarioSemanticError,
    load_scenario,
)
from .script_backend import ScriptBackend, load_script_target
from .trace import (
    CANONICAL,
    SCRIPT_RUNTIME,
    CrashCase,
    MalformedTrace,
    TraceGrammar,
    format_trace,
    grammar_by_name,
    parse_trace,
)

BUDGET_ENV_VAR = "CRASHREPRO_EVALUATION_BUDGET"


class UsageError(ValueError):
    pass


def _load_backend(path: Path):
    """A backend spec is either a scenario file or a script-target manifest."""
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"no such file: {path}")
    except yaml.YAMLError as e:
        raise UsageError(f"{path}: not parsable as YAML: {e}")
    if isinstance(doc, dict) and "module" in doc:
        return ScriptBackend(load_script_target(path))
    return ScenarioBackend(load_scenario(path))


def _load_case(
    trace_path: Path,
    case_id: str,
    target_frame: int | None,
    grammar: TraceGrammar = CANONICAL,
) -> CrashCase:
    try:
        text = trace_path.read_text()
    except FileNotFoundError:
        raise UsageError(f"no such file: {trace_path}")
    trace = parse_trace(text, grammar)
    level = target_frame if target_frame is not None else len(trace.frames)
    return CrashCase(case_id, trace, level)


def _case_grammar(backend) -> TraceGrammar:
    """Scenario traces are stored canonically; script-target reference traces
    keep the runtime's own traceback format."""
    return SCRIPT_RUNTIME if isinstance(backend, ScriptBackend) else CANONICAL


def _search_config(args, seed: int) -> SearchConfig:
    budget = args.evaluation_budget
    env = os.environ.get(BUDGET_ENV_VAR)
    if env is not None:
        budget = int(env)
    return SearchConfig(
        seed=seed,
        initial_population=args.population,
        population_step=args.population_step,
        population_max=args.population_max,
        operators=OperatorConfig(crossover_probability=args.crossover_probability),
        evaluation_budget=budget,
        wall_clock_budget=args.wall_clock_seconds or None,
        genome_length_max=args.length_max,
    )


def _add_search_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--evaluation-budget", type=int, default=50_000,
                   help="total fitness evaluations per run (default 50000)")
    p.add_argument("--wall-clock-seconds", type=float, default=30.0 * 60.0,
                   help="wall-clock cap per run; 0 disables (default 1800)")
    p.add_argument("--population", type=int, default=50)
    p.add_argument("--population-step", type=int, default=25)
    p.add_argument("--population-max", type=int, default=300)
    p.add_argument("--crossover-probability", type=float, default=0.75)
    p.add_argument("--length-max", type=int, default=20,
                   help="maximum statements per generated test")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crashrepro",
        description="Reproduce crashes from stack traces with a guided genetic algorithm.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("reproduce", help="run a single guided search against one crash")
    p.add_argument("--scenario", required=True, type=Path,
                   help="scenario file or script-target manifest")
    p.add_argument("--trace", required=True, type=Path, help="crash trace (canonical grammar)")
    p.add_argument("--target-frame", type=int, default=None,
                   help="frame level to reproduce, innermost = 1 (default: all frames)")
    p.add_argument("--seed", type=int, required=True,
                   help="run seed (mandatory so runs stay reproducible)")
    p.add_argument("--out", type=Path, default=None,
                   help="directory for witness.genome / reproduced.trace / run.runlog")
    p.add_argument("--dump-witness", type=Path, default=None,
                   help="also write the witness genome text to this file")
    _add_search_flags(p)

    p = sub.add_parser("bench", help="repeated seeded runs over a suite directory")
    p.add_argument("--suite", required=True, type=Path,
                   help="directory of <name>.scn/<name>.trace pairs and/or "
                        "target dirs with manifest.yaml + reference.trace")
    p.add_argument("--reps", type=int, default=50, help="runs per case (default 50)")
    p.add_argument("--base-seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("bench-out"))
    _add_search_flags(p)

    p = sub.add_parser("oracle", help="exhaustively decide whether a crash is reachable")
    p.add_argument("--scenario", required=True, type=Path)
    p.add_argument("--trace", required=True, type=Path)
    p.add_argument("--target-frame", type=int, default=None)
    p.add_argument("--max-calls", type=int, default=4)

    p = sub.add_parser("parse-trace", help="normalize a trace file to canonical text")
    p.add_argument("path", type=Path)
    p.add_argument("--grammar", default="canonical",
                   help="input grammar: canonical or script-runtime")

    return parser


def cmd_reproduce(args) -> int:
    backend = _load_backend(args.scenario)
    case = _load_case(args.trace, args.scenario.stem, args.target_frame, _case_grammar(backend))
    config = _search_config(args, args.seed)
    record = engine.run_search(backend, case, config)

    if args.out is not None:
        out: Path = args.out
        write_atomic(out / "run.runlog", run_record_to_lines(record))
        if record.witness is not None:
            write_atomic(out / "witness.genome", genome_to_text(record.witness) + "\n")
            outcome = backend.execute(record.witness)
            assert outcome.trace is not None
            write_atomic(out / "reproduced.trace", format_trace(outcome.trace) + "\n")
    if args.dump_witness is not None and record.witness is not None:
        write_atomic(args.dump_witness, genome_to_text(record.witness) + "\n")

    if record.reproduced:
        print(f"reproduced after {record.evaluations_used} evaluations "
              f"(best fitness {record.best_fitness.total:.6f})")
        if record.witness is not None and args.out is None:
            print(genome_to_text(record.witness))
        return 0
    print(f"not reproduced; best fitness {record.best_fitness.total:.6f} "
          f"after {record.evaluations_used} evaluations")
    return 1


def discover_suite(suite_dir: Path) -> list[tuple[object, CrashCase]]:
    """Collect (backend, case) pairs: *.scn with sibling *.trace, plus target
    directories holding manifest.yaml with sibling reference.trace."""
    if not suite_dir.is_dir():
        raise UsageError(f"suite directory {suite_dir} does not exist")
    suite: list[tuple[object, CrashCase]] = []
    for scn in sorted(suite_dir.glob("*.scn")):
        trace_path = scn.with_suffix(".trace")
        if not trace_path.exists():
            raise UsageError(f"{scn} has no sibling {trace_path.name}")
        backend = ScenarioBackend(load_scenario(scn))
        suite.append((backend, _load_case(trace_path, scn.stem, None)))
    for manifest in sorted(suite_dir.glob("*/manifest.yaml")):
        trace_path = manifest.parent / "reference.trace"
        if not trace_path.exists():
            raise UsageError(f"{manifest} has no sibling reference.trace")
        backend = ScriptBackend(load_script_target(manifest))
        suite.append(
            (backend, _load_case(trace_path, manifest.parent.name, None, SCRIPT_RUNTIME))
        )
    if not suite:
        raise UsageError(f"suite directory {suite_dir} holds no scenario/trace pairs")
    return suite


def cmd_bench(args) -> int:
    suite = discover_suite(args.suite)
    config = _search_config(args, seed=args.base_seed)
    report, _ = experiment.run_experiment(
        suite,
        repetitions=args.reps,
        base_seed=args.base_seed,
        config=config,
        workers=args.workers,
        out_dir=args.out,
    )
    write_atomic(args.out / "report.txt", experiment.render_report(report, "table-text"))
    write_atomic(args.out / "report.csv", experiment.render_report(report, "csv"))
    print(experiment.render_report(report, "table-text"), end="")
    return 0


def cmd_oracle(args) -> int:
    backend = _load_backend(args.scenario)
    if not isinstance(backend, ScenarioBackend):
        raise UsageError("the oracle enumerates scenarios only, not script targets")
    case = _load_case(args.trace, args.scenario.stem, args.target_frame)
    try:
        verdict = oracle.oracle_enumerate(backend.scenario, case, args.max_calls)
    except oracle.EnumerationTooLarge as e:
        print(f"enumeration too large: {e}", file=sys.stderr)
        return 3
    if verdict.reachable:
        assert verdict.witness is not None
        print(f"reachable with {verdict.witness_call_count} calls "
              f"({verdict.sequences_tried} sequences tried)")
        print(genome_to_text(verdict.witness))
        return 0
    print(f"unreachable within {args.max_calls} calls "
          f"({verdict.sequences_tried} sequences tried)")
    return 1


def cmd_parse_trace(args) -> int:
    grammar = grammar_by_name(args.grammar)
    trace = parse_trace(args.path.read_text(), grammar)
    print(format_trace(trace, CANONICAL))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "reproduce": cmd_reproduce,
        "bench": cmd_bench,
        "oracle": cmd_oracle,
        "parse-trace": cmd_parse_trace,
    }
    try:
        return handlers[args.command](args)
    except (
        UsageError,
        ConfigError,
        MalformedTrace,
        ScenarioParseError,
        ScenarioSemanticError,
        KeyError,
        ValueError,
        OSError,
    ) as e:
        print(f"crashrepro: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
