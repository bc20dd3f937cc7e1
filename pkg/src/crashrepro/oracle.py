"""Exhaustive enumeration oracle: ground-truth reachability for a crash case.

Enumerates every call sequence up to a length bound, with every argument
combination from the declared domains, in a deterministic order (ascending
length, then lexicographic over routine index and argument tuples).  Each
method call uses one shared instance per owner type, which is
reachability-complete here because objects cannot reference each other.
Only sequences containing the target routine are executed, since every
valid genome must call it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from . import fitness
from .genome import Construct, Genome, Invoke, SetValue, Statement
from .scenario import DEFAULT_STEP_BUDGET, Scenario, execute
from .surface import value_kind
from .trace import CrashCase

ENUMERATION_LIMIT = 10_000_000


class EnumerationTooLarge(RuntimeError):
    def __init__(self, estimated_size: int):
        super().__init__(f"estimated {estimated_size} candidate sequences exceeds {ENUMERATION_LIMIT}")
        self.estimated_size = estimated_size


@dataclass(frozen=True, slots=True)
class OracleVerdict:
    reachable: bool
    witness: Genome | None
    witness_call_count: int | None
    sequences_tried: int


def estimate_enumeration_size(scenario: Scenario, max_calls: int) -> int:
    per_call = 0
    for r in scenario.routines:
        combos = 1
        for p in r.params:
            combos *= len(p.domain)
        per_call += combos
    total = 0
    for length in range(1, max_calls + 1):
        total += per_call**length
        if total > ENUMERATION_LIMIT:
            break
    return total


def _sequence_to_genome(
    scenario: Scenario, seq: tuple[tuple[int, tuple], ...], target_routine: str
) -> Genome:
    """Build a genome for a call sequence, sharing constructed instances and
    value slots across calls."""
    stmts: list[Statement] = []
    type_slot: dict[str, int] = {}
    value_slot: dict[tuple[str, object], int] = {}
    for routine_idx, args in seq:
        routine = scenario.routines[routine_idx]
        receiver = None
        if routine.owner is not None:
            if routine.owner not in type_slot:
                stmts.append(Construct(routine.owner))
                type_slot[routine.owner] = len(stmts) - 1
            receiver = type_slot[routine.owner]
        arg_slots = []
        for v in args:
            key = (value_kind(v), v)
            if key not in value_slot:
                stmts.append(SetValue(v))
                value_slot[key] = len(stmts) - 1
            arg_slots.append(value_slot[key])
        stmts.append(Invoke(routine.name, receiver, tuple(arg_slots)))
    return Genome(tuple(stmts), target_routine)


def oracle_enumerate(
    scenario: Scenario,
    case: CrashCase,
    max_calls: int,
    step_budget: int = DEFAULT_STEP_BUDGET,
) -> OracleVerdict:
    """Search every bounded call sequence for one reproducing the case at fitness 0.

    Raises EnumerationTooLarge when the candidate space exceeds the guard
    bound.  The first witness found has the minimal call count by
    construction (lengths are tried in ascending order).
    """
    estimated = estimate_enumeration_size(scenario, max_calls)
    if estimated > ENUMERATION_LIMIT:
        raise EnumerationTooLarge(estimated)

    target_routine = case.target_routine
    choices: list[tuple[int, tuple]] = []
    for idx, r in enumerate(scenario.routines):
        domains = [p.domain for p in r.params]
        for args in itertools.product(*domains):
            choices.append((idx, args))

    target_indices = {
        idx for idx, r in enumerate(scenario.routines) if r.name == target_routine
    }

    tried = 0
    for length in range(1, max_calls + 1):
        for seq in itertools.product(choices, repeat=length):
            if not any(ri in target_indices for ri, _ in seq):
                continue
            tried += 1
            genome = _sequence_to_genome(scenario, seq, target_routine)
            outcome = execute(scenario, genome, step_budget)
            if fitness.is_reproduced(fitness.evaluate(case, outcome)):
                return OracleVerdict(True, genome, length, tried)
    return OracleVerdict(False, None, None, tried)
