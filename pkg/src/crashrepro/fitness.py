"""Piecewise guided fitness: scalar error that is 0 exactly on reproduction.

Three gated components, weighted so each dominates the next:

* ``d_line``  — has the crash site's source line executed?  Shaped from
  approach level and branch distance via the bounded normalization ``nu``.
* ``d_exception`` — 0/1: did the crash throw the expected exception type?
  Only scored once the line is reached.
* ``d_trace`` — distance between expected and generated traces up to the
  target frame level.  Only scored once the exception type matches.

``total = 3*d_line + 2*d_exception + d_trace`` lies in [0, 6] and hits 0
exactly when the crash is reproduced.
"""

from __future__ import annotations

from dataclasses import dataclass

from .scenario import ExecutionOutcome
from .trace import CrashCase, nu, trace_distance


@dataclass(frozen=True, slots=True)
class ApproachData:
    """Closest-approach evidence for one target line.

    ``approach_level`` counts unexecuted control-dependency guards between
    the closest executed point and the target line; ``branch_distance``
    measures how far the critical guard was from flipping toward it.
    Both are 0 iff the target line executed.
    """

    approach_level: int
    branch_distance: float

    def __post_init__(self):
        if self.approach_level < 0 or self.branch_distance < 0:
            raise ValueError("approach data must be non-negative")


@dataclass(frozen=True, slots=True)
class FitnessValue:
    """The three gated components; ``total`` is their weighted sum."""

    d_line: float
    d_exception: float
    d_trace: float

    def __post_init__(self):
        if not 0.0 <= self.d_line <= 1.0:
            raise ValueError(f"d_line {self.d_line} outside [0,1]")
        if self.d_exception not in (0.0, 1.0):
            raise ValueError(f"d_exception {self.d_exception} not in {{0,1}}")
        if not 0.0 <= self.d_trace <= 1.0:
            raise ValueError(f"d_trace {self.d_trace} outside [0,1]")
        if self.d_line > 0.0 and (self.d_exception != 1.0 or self.d_trace != 1.0):
            raise ValueError("gating violated: line unreached but later components scored")
        if self.d_exception == 1.0 and self.d_trace != 1.0:
            raise ValueError("gating violated: wrong exception but trace scored")

    @property
    def total(self) -> float:
        return 3.0 * self.d_line + 2.0 * self.d_exception + self.d_trace


def approach_data(outcome: ExecutionOutcome, target_routine: str, target_line: int) -> ApproachData:
    """Derive approach level and branch distance for a target (routine, line).

    Levels: 0 when the line executed or its own guard was at least
    evaluated, 1 when the routine ran but aborted before the line
    (critical guard: the earlier throw that fired), 2 when the routine was
    never entered.
    """
    key = (target_routine, target_line)
    if key in outcome.covered_lines:
        return ApproachData(0, 0.0)
    obs = outcome.guard_observations.get(key)
    if obs is not None:
        return ApproachData(0, obs.min_true)
    if target_routine in outcome.entered_routines:
        blockers = [
            o.min_false
            for (r, l), o in outcome.guard_observations.items()
            if r == target_routine and l < target_line and o.fired
        ]
        return ApproachData(1, min(blockers) if blockers else 1.0)
    return ApproachData(2, 1.0)


def evaluate(case: CrashCase, outcome: ExecutionOutcome) -> FitnessValue:
    """Score one execution outcome against a crash case.  Pure and deterministic."""
    site = case.crash_site
    ad = approach_data(outcome, site.routine, site.line)
    d_line = nu(ad.approach_level + nu(ad.branch_distance))

    if d_line != 0.0:
        return FitnessValue(d_line, 1.0, 1.0)

    crashed_right_type = (
        outcome.kind == "crashed"
        and outcome.trace is not None
        and outcome.trace.exception_type == case.trace.exception_type
    )
    if not crashed_right_type:
        return FitnessValue(0.0, 1.0, 1.0)

    assert outcome.trace is not None
    d_trace = trace_distance(case.trace, case.target_frame_level, outcome.trace)
    return FitnessValue(0.0, 0.0, d_trace)


def is_reproduced(f: FitnessValue) -> bool:
    """Strict zero, no epsilon: the paper's reproduction criterion."""
    return f.total == 0.0
