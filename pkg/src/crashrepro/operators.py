"""Guided genetic operators: initialization, crossover, mutation, selection.

Every operator routes its output through genome repair, which is what
guarantees the population-wide invariant that each individual stays valid
and keeps at least one call to the target routine.
"""

from __future__ import annotations

from dataclasses import dataclass
from random import Random

from .genome import (
    DEFAULT_LENGTH_MAX,
    Construct,
    Genome,
    Invoke,
    SetValue,
    Statement,
    repair,
)
from .surface import ApiSurface, Value, value_in


@dataclass(frozen=True, slots=True)
class OperatorConfig:
    """Operator parameters; the defaults follow the reproduced study's setup."""

    crossover_probability: float = 0.75
    mutation_mode: str = "per-statement"  # probability 1/n per statement
    tournament_size: int = 2
    elite_count: int = 1

    def __post_init__(self):
        if not 0.0 <= self.crossover_probability <= 1.0:
            raise ValueError("crossover_probability outside [0,1]")
        if self.mutation_mode != "per-statement":
            raise ValueError(f"unsupported mutation mode {self.mutation_mode!r}")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be positive")
        if self.elite_count < 0:
            raise ValueError("elite_count must be non-negative")


def _slot_candidates(stmts: list[Statement], ok) -> list[int]:
    out = []
    for i, s in enumerate(stmts):
        if isinstance(s, Construct) and ok(("obj", s.type_name)):
            out.append(i)
        elif isinstance(s, SetValue) and ok(("val", s.value)):
            out.append(i)
    return out


def _random_statement(surface: ApiSurface, prior: list[Statement], rng: Random) -> Statement:
    """One random statement; references bind to earlier compatible slots when
    available, otherwise stay unbound for repair to fill."""
    pool = surface.value_pool()
    kinds = ["invoke"]
    if surface.types:
        kinds.append("construct")
    if pool:
        kinds.append("set_value")
    kind = rng.choice(kinds)
    if kind == "construct":
        return Construct(rng.choice(surface.types))
    if kind == "set_value":
        return SetValue(rng.choice(pool))
    sig = rng.choice(surface.routines)
    receiver = None
    if sig.owner is not None:
        candidates = _slot_candidates(prior, lambda k: k == ("obj", sig.owner))
        if candidates:
            receiver = rng.choice(candidates)
    args = []
    for p in sig.params:
        candidates = _slot_candidates(
            prior, lambda k, p=p: k[0] == "val" and value_in(k[1], p.domain)
        )
        if candidates and rng.random() < 0.5:
            args.append(rng.choice(candidates))
        else:
            args.append(None)
    return Invoke(sig.name, receiver, tuple(args))


def guided_initialize(
    surface: ApiSurface,
    target_routine: str,
    population_size: int,
    rng: Random,
    length_max: int = DEFAULT_LENGTH_MAX,
) -> list[Genome]:
    """Random population; every individual is valid and calls the target routine.

    Raw lengths are drawn uniformly from [1, length_max] before repair;
    argument values are drawn uniformly from the declared domains.
    """
    if population_size < 2:
        raise ValueError("population_size must be at least 2")
    population = []
    for _ in range(population_size):
        n = rng.randint(1, length_max)
        stmts: list[Statement] = []
        for _ in range(n):
            stmts.append(_random_statement(surface, stmts, rng))
        genome = Genome(tuple(stmts), target_routine)
        population.append(repair(genome, surface, rng, length_max))
    return population


def guided_crossover(
    a: Genome,
    b: Genome,
    rng: Random,
    surface: ApiSurface,
    length_max: int = DEFAULT_LENGTH_MAX,
) -> tuple[Genome, Genome]:
    """Single-point crossover at one relative cut applied to both parents.

    Using a shared relative cut keeps identical parents producing identical
    offspring; repair rebinds references the splice left dangling.
    """
    alpha = rng.random()
    ca = int(alpha * len(a.statements))
    cb = int(alpha * len(b.statements))
    o1 = Genome(a.statements[:ca] + b.statements[cb:], a.target_routine)
    o2 = Genome(b.statements[:cb] + a.statements[ca:], b.target_routine)
    return (
        repair(o1, surface, rng, length_max),
        repair(o2, surface, rng, length_max),
    )


MUTATION_OPS = ("delete", "insert", "replace")


def mutation_plan(n: int, rng: Random) -> list[tuple[int, str]]:
    """Decide which statements mutate and how: each of the n statements is
    picked independently with probability 1/n, so one mutates on average."""
    if n < 1:
        raise ValueError("mutation needs at least one statement")
    plan = []
    for i in range(n):
        if rng.random() < 1.0 / n:
            plan.append((i, rng.choice(MUTATION_OPS)))
    return plan


def _replace_statement(s: Statement, prior: list[Statement], surface: ApiSurface, rng: Random) -> Statement:
    if isinstance(s, Construct):
        return Construct(rng.choice(surface.types))
    if isinstance(s, SetValue):
        pool = surface.value_pool()
        return SetValue(rng.choice(pool)) if pool else s
    sig = surface.routine(s.routine)
    if sig is None:
        return s
    receiver = s.receiver
    if sig.owner is not None:
        candidates = _slot_candidates(prior, lambda k: k == ("obj", sig.owner))
        receiver = rng.choice(candidates) if candidates else None
    args = []
    for p in sig.params:
        candidates = _slot_candidates(
            prior, lambda k, p=p: k[0] == "val" and value_in(k[1], p.domain)
        )
        if candidates and rng.random() < 0.5:
            args.append(rng.choice(candidates))
        else:
            args.append(None)
    return Invoke(s.routine, receiver, tuple(args))


def _shift_refs(stmts: list[Statement], position: int, delta: int, removed: int | None = None):
    """Remap positional references after an insert/delete at ``position``."""
    for i, s in enumerate(stmts):
        if not isinstance(s, Invoke):
            continue

        def adj(ref: int | None) -> int | None:
            if ref is None:
                return None
            if removed is not None and ref == removed:
                return None
            if ref >= position:
                return ref + delta
            return ref

        stmts[i] = Invoke(s.routine, adj(s.receiver), tuple(adj(a) for a in s.args))


def guided_mutate(
    g: Genome,
    rng: Random,
    surface: ApiSurface,
    length_max: int = DEFAULT_LENGTH_MAX,
) -> Genome:
    """Mutate each statement with probability 1/n, then repair.

    A mutation deletes the statement, inserts a fresh random statement after
    it, or redraws its values/bindings, chosen uniformly.
    """
    plan = mutation_plan(len(g.statements), rng)
    if not plan:
        return g
    stmts = list(g.statements)
    for index, op in reversed(plan):
        if op == "delete":
            del stmts[index]
            _shift_refs(stmts, index, -1, removed=index)
        elif op == "insert":
            new = _random_statement(surface, stmts[: index + 1], rng)
            stmts.insert(index + 1, new)
            _shift_refs(stmts, index + 1, +1)
        else:
            stmts[index] = _replace_statement(stmts[index], stmts[:index], surface, rng)
    return repair(Genome(tuple(stmts), g.target_routine), surface, rng, length_max)


def select(
    population: list[Genome],
    fitnesses: list,
    config: OperatorConfig,
    rng: Random,
) -> Genome:
    """Tournament selection: lowest total wins; ties prefer fewer statements,
    then the earlier population index."""
    if not population:
        raise ValueError("empty population")
    if len(population) != len(fitnesses):
        raise ValueError("population and fitnesses misaligned")
    picks = [rng.randrange(len(population)) for _ in range(config.tournament_size)]
    best = min(picks, key=lambda i: (fitnesses[i].total, len(population[i].statements), i))
    return population[best]
