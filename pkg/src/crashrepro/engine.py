"""The guided genetic algorithm loop: schedule, budgets, stopping, logging.

One search run is sequential and bitwise-deterministic for a fixed seed
(random.Random, i.e. MT19937, drives all randomness).  The population starts
at ``initial_population`` and, whenever a budget slice runs out without a
zero-fitness individual, restarts fresh at the next size of the escalation
schedule.  The evaluation budget is the deterministic primary budget; the
30-minute wall clock remains available as an optional cap.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from random import Random
from typing import Protocol

from . import fitness as fitness_mod
from .fitness import FitnessValue
from .genome import DEFAULT_LENGTH_MAX, Genome, genome_to_text
from .operators import (
    OperatorConfig,
    guided_crossover,
    guided_initialize,
    guided_mutate,
    select,
)
from .scenario import ExecutionOutcome
from .surface import ApiSurface
from .trace import CrashCase

RUNLOG_SCHEMA = 1


class ConfigError(ValueError):
    pass


class Backend(Protocol):
    """An execution backend: a callable surface plus a way to run genomes."""

    @property
    def surface(self) -> ApiSurface: ...

    def execute(self, genome: Genome) -> ExecutionOutcome: ...


@dataclass(frozen=True, slots=True)
class SearchConfig:
    seed: int
    initial_population: int = 50
    population_step: int = 25
    population_max: int = 300
    operators: OperatorConfig = field(default_factory=OperatorConfig)
    evaluation_budget: int = 50_000
    wall_clock_budget: float | None = 30.0 * 60.0
    genome_length_max: int = DEFAULT_LENGTH_MAX

    def __post_init__(self):
        if self.initial_population < 2:
            raise ConfigError("initial_population must be at least 2")
        if self.population_step <= 0:
            raise ConfigError("population_step must be positive")
        if self.initial_population > self.population_max:
            raise ConfigError("initial_population exceeds population_max")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be a 64-bit unsigned integer")
        if self.evaluation_budget < len(self.schedule()):
            raise ConfigError(
                "evaluation_budget smaller than the escalation schedule length"
            )
        if self.wall_clock_budget is not None and self.wall_clock_budget <= 0:
            raise ConfigError("wall_clock_budget must be positive")
        if self.genome_length_max < 1:
            raise ConfigError("genome_length_max must be positive")

    def schedule(self) -> list[int]:
        return list(range(self.initial_population, self.population_max + 1, self.population_step))

    def budget_slices(self) -> list[int]:
        """Per-population-size evaluation budgets; the remainder goes to the
        last step."""
        steps = self.schedule()
        q, r = divmod(self.evaluation_budget, len(steps))
        slices = [q] * len(steps)
        slices[-1] += r
        return slices


@dataclass(frozen=True, slots=True)
class GenerationStats:
    generation: int
    population_size: int
    evaluated: int
    best_total: float
    mean_total: float
    evaluations_used: int


@dataclass(frozen=True)
class RunRecord:
    case_id: str
    seed: int
    reproduced: bool
    best_fitness: FitnessValue
    evaluations_used: int
    population_sizes_visited: tuple[int, ...]
    witness: Genome | None
    generation_log: tuple[GenerationStats, ...]

    def __post_init__(self):
        if self.reproduced and self.witness is None:
            raise ValueError("reproduced runs must carry a witness")


def best_so_far(log: tuple[GenerationStats, ...] | list[GenerationStats]) -> list[float]:
    """Running minimum of the per-generation best totals; non-increasing."""
    if not log:
        raise ValueError("empty generation log")
    out = []
    best = float("inf")
    for g in log:
        best = min(best, g.best_total)
        out.append(best)
    return out


def _fitness_str(x: float) -> str:
    return f"{x:.6f}"


def generation_line(g: GenerationStats) -> str:
    return json.dumps(
        {
            "kind": "generation",
            "schema": RUNLOG_SCHEMA,
            "generation": g.generation,
            "population_size": g.population_size,
            "evaluated": g.evaluated,
            "best": _fitness_str(g.best_total),
            "mean": _fitness_str(g.mean_total),
            "evaluations_used": g.evaluations_used,
        },
        sort_keys=True,
    )


def run_record_line(r: RunRecord) -> str:
    return json.dumps(
        {
            "kind": "run",
            "schema": RUNLOG_SCHEMA,
            "case_id": r.case_id,
            "seed": r.seed,
            "reproduced": r.reproduced,
            "best_fitness": {
                "d_line": _fitness_str(r.best_fitness.d_line),
                "d_exception": _fitness_str(r.best_fitness.d_exception),
                "d_trace": _fitness_str(r.best_fitness.d_trace),
                "total": _fitness_str(r.best_fitness.total),
            },
            "evaluations_used": r.evaluations_used,
            "population_sizes_visited": list(r.population_sizes_visited),
            "witness": genome_to_text(r.witness) if r.witness is not None else None,
        },
        sort_keys=True,
    )


def run_record_to_lines(r: RunRecord) -> str:
    """Full line-delimited run log: one generation record per line plus the
    final run record."""
    lines = [generation_line(g) for g in r.generation_log]
    lines.append(run_record_line(r))
    return "\n".join(lines) + "\n"


class _Search:
    def __init__(self, backend: Backend, case: CrashCase, config: SearchConfig):
        self.backend = backend
        self.case = case
        self.config = config
        self.rng = Random(config.seed)
        self.evaluations = 0
        self.phase_cap = 0
        self.deadline = (
            time.monotonic() + config.wall_clock_budget
            if config.wall_clock_budget is not None
            else None
        )
        self.gen_log: list[GenerationStats] = []
        self.generation = 0
        self.best: tuple[FitnessValue, Genome] | None = None
        self.witness: Genome | None = None
        self.done = False

    def out_of_time(self) -> bool:
        return self.deadline is not None and time.monotonic() >= self.deadline

    def halt(self) -> bool:
        if self.evaluations == 0:
            return False  # every run performs at least one evaluation
        return self.done or self.evaluations >= self.phase_cap or self.out_of_time()

    def evaluate(self, genome: Genome) -> FitnessValue:
        outcome = self.backend.execute(genome)
        value = fitness_mod.evaluate(self.case, outcome)
        self.evaluations += 1
        if self.best is None or (value.total, len(genome.statements)) < (
            self.best[0].total,
            len(self.best[1].statements),
        ):
            self.best = (value, genome)
        if fitness_mod.is_reproduced(value):
            self._confirm(genome, outcome)
            self.witness = genome
            self.done = True
        return value

    def _confirm(self, genome: Genome, outcome: ExecutionOutcome) -> None:
        """Witness soundness: deterministic re-execution must match the
        zero-fitness outcome exactly."""
        again = self.backend.execute(genome)
        if again != outcome:
            raise RuntimeError(
                "backend is not deterministic: witness re-execution diverged"
            )

    def log_generation(self, pop_size: int, scored: list[FitnessValue]) -> None:
        if not scored:
            return
        best = min(f.total for f in scored)
        mean = sum(f.total for f in scored) / len(scored)
        self.gen_log.append(
            GenerationStats(
                generation=self.generation,
                population_size=pop_size,
                evaluated=len(scored),
                best_total=best,
                mean_total=mean,
                evaluations_used=self.evaluations,
            )
        )
        self.generation += 1

    def run_phase(self, pop_size: int, slice_budget: int) -> None:
        cfg = self.config
        ops = cfg.operators
        surface = self.backend.surface
        self.phase_cap = self.evaluations + slice_budget

        population = guided_initialize(
            surface, self.case.target_routine, pop_size, self.rng, cfg.genome_length_max
        )
        scored: list[FitnessValue] = []
        for genome in population:
            if self.halt():
                break
            scored.append(self.evaluate(genome))
        self.log_generation(pop_size, scored)
        if self.halt():
            return
        population = population[: len(scored)]

        while not self.halt():
            order = sorted(
                range(len(population)),
                key=lambda i: (scored[i].total, len(population[i].statements), i),
            )
            elites = order[: ops.elite_count]
            next_pop: list[Genome] = [population[i] for i in elites]
            next_scored: list[FitnessValue] = [scored[i] for i in elites]
            while len(next_pop) < pop_size and not self.halt():
                p1 = select(population, scored, ops, self.rng)
                p2 = select(population, scored, ops, self.rng)
                if self.rng.random() < ops.crossover_probability:
                    c1, c2 = guided_crossover(p1, p2, self.rng, surface, cfg.genome_length_max)
                else:
                    c1, c2 = p1, p2
                for child in (c1, c2):
                    if len(next_pop) >= pop_size or self.halt():
                        break
                    mutated = guided_mutate(child, self.rng, surface, cfg.genome_length_max)
                    next_scored.append(self.evaluate(mutated))
                    next_pop.append(mutated)
            self.log_generation(pop_size, next_scored)
            population, scored = next_pop, next_scored


def run_search(backend: Backend, case: CrashCase, config: SearchConfig) -> RunRecord:
    """Run the guided GA against one crash case.

    Deterministic for fixed (backend, case, config); stops immediately when
    any individual evaluates to total 0, escalating the population size
    through the schedule as budget slices run dry.
    """
    if backend.surface.routine(case.target_routine) is None:
        raise ConfigError(
            f"target routine {case.target_routine!r} does not exist on the surface"
        )
    if config.operators.elite_count >= config.initial_population:
        raise ConfigError("elite_count must be smaller than the population size")

    search = _Search(backend, case, config)
    visited: list[int] = []
    for pop_size, slice_budget in zip(config.schedule(), config.budget_slices()):
        if visited and (search.done or search.out_of_time()):
            break
        visited.append(pop_size)
        search.run_phase(pop_size, slice_budget)

    assert search.best is not None, "no evaluations performed"
    return RunRecord(
        case_id=case.id,
        seed=config.seed,
        reproduced=search.witness is not None,
        best_fitness=search.best[0],
        evaluations_used=search.evaluations,
        population_sizes_visited=tuple(visited),
        witness=search.witness,
        generation_log=tuple(search.gen_log),
    )
