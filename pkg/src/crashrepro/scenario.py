"""Declarative crash scenarios and the interpreter that executes genomes against them.

A scenario is a small model program: object types with fields, routines
whose bodies are straight-line sequences of guarded throws, internal calls,
field writes, and returns.  Guards are conjunctions of atomic comparisons
over parameters, receiver fields, and constants, so branch distances are
well defined and exhaustive enumeration stays tractable.

Scenario files are YAML documents (``format_version: 1``); the exact schema
is documented in ``docs/scenario-format.md``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping

import yaml

from .genome import Construct, Genome, Invoke, SetValue
from .surface import ApiSurface, Param, RoutineSig, Value, value_in, value_kind
from .trace import StackFrame, StackTrace

FORMAT_VERSION = 1
DEFAULT_STEP_BUDGET = 10_000
MAX_BODY_STATEMENTS = 32
MAX_CALL_DEPTH = 128  # bounds interpreter recursion well below Python's own limit

COMPARATORS = ("==", "!=", "<", "<=")


class ScenarioParseError(ValueError):
    def __init__(self, location: str, reason: str):
        super().__init__(f"{location}: {reason}")
        self.location = location
        self.reason = reason


class ScenarioSemanticError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Model


@dataclass(frozen=True, slots=True)
class Const:
    value: Value


@dataclass(frozen=True, slots=True)
class ParamRef:
    name: str


@dataclass(frozen=True, slots=True)
class FieldRef:
    name: str


Operand = Const | ParamRef | FieldRef


@dataclass(frozen=True, slots=True)
class GuardAtom:
    left: Operand
    cmp: str
    right: Operand


@dataclass(frozen=True, slots=True)
class ThrowStmt:
    line: int
    exception_type: str
    guard: tuple[GuardAtom, ...]  # empty guard = unconditional


@dataclass(frozen=True, slots=True)
class CallStmt:
    line: int
    routine: str
    args: tuple[Operand, ...]


@dataclass(frozen=True, slots=True)
class SetFieldStmt:
    line: int
    field: str
    value: Operand


@dataclass(frozen=True, slots=True)
class ReturnStmt:
    line: int


BodyStmt = ThrowStmt | CallStmt | SetFieldStmt | ReturnStmt


@dataclass(frozen=True, slots=True)
class FieldDecl:
    name: str
    kind: str  # int | bool | str
    init: Value


@dataclass(frozen=True, slots=True)
class TypeDecl:
    name: str
    fields: tuple[FieldDecl, ...]


@dataclass(frozen=True, slots=True)
class Routine:
    name: str
    owner: str | None
    params: tuple[Param, ...]
    body: tuple[BodyStmt, ...]


@dataclass(frozen=True, slots=True)
class Scenario:
    name: str
    types: tuple[TypeDecl, ...]
    routines: tuple[Routine, ...]

    @property
    def file_name(self) -> str:
        return f"{self.name}.scn"

    def unit_path(self, routine: Routine) -> str:
        if routine.owner is None:
            return self.name
        return f"{self.name}.{routine.owner}"

    def routine(self, name: str) -> Routine | None:
        for r in self.routines:
            if r.name == name:
                return r
        return None

    def type_decl(self, name: str) -> TypeDecl | None:
        for t in self.types:
            if t.name == name:
                return t
        return None

    @property
    def surface(self) -> ApiSurface:
        return ApiSurface(
            types=tuple(t.name for t in self.types),
            routines=tuple(RoutineSig(r.name, r.owner, r.params) for r in self.routines),
        )


# ---------------------------------------------------------------------------
# Loading


def _require(mapping: Any, key: str, where: str) -> Any:
    if not isinstance(mapping, dict) or key not in mapping:
        raise ScenarioParseError(where, f"missing key {key!r}")
    return mapping[key]


def _check_value(v: Any, where: str) -> Value:
    if isinstance(v, bool) or isinstance(v, int) or isinstance(v, str):
        return v
    raise ScenarioParseError(where, f"unsupported constant {v!r} (int/bool/str only)")


def _parse_operand(raw: Any, where: str) -> Operand:
    if not isinstance(raw, dict) or len(raw) != 1:
        raise ScenarioParseError(
            where, f"operand must be one of {{const:|param:|field:}}, got {raw!r}"
        )
    (key, value), = raw.items()
    if key == "const":
        return Const(_check_value(value, where))
    if key == "param":
        return ParamRef(str(value))
    if key == "field":
        return FieldRef(str(value))
    raise ScenarioParseError(where, f"unknown operand kind {key!r}")


def _parse_guard(raw: Any, where: str) -> tuple[GuardAtom, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ScenarioParseError(where, "guard must be a list of comparisons")
    atoms = []
    for i, item in enumerate(raw):
        loc = f"{where}.when[{i}]"
        cmp = str(_require(item, "cmp", loc))
        if cmp not in COMPARATORS:
            raise ScenarioParseError(loc, f"comparator {cmp!r} not in {COMPARATORS}")
        atoms.append(
            GuardAtom(
                _parse_operand(_require(item, "left", loc), loc),
                cmp,
                _parse_operand(_require(item, "right", loc), loc),
            )
        )
    return tuple(atoms)


def _parse_statement(raw: Any, where: str) -> BodyStmt:
    line = _require(raw, "line", where)
    if not isinstance(line, int) or isinstance(line, bool) or line < 1:
        raise ScenarioParseError(where, f"bad line number {line!r}")
    op = str(_require(raw, "op", where))
    if op == "throw":
        return ThrowStmt(
            line,
            str(_require(raw, "exception", where)),
            _parse_guard(raw.get("when"), where),
        )
    if op == "call":
        args = raw.get("args") or []
        if not isinstance(args, list):
            raise ScenarioParseError(where, "args must be a list")
        return CallStmt(
            line,
            str(_require(raw, "routine", where)),
            tuple(_parse_operand(a, where) for a in args),
        )
    if op == "set_field":
        return SetFieldStmt(
            line,
            str(_require(raw, "field", where)),
            _parse_operand(_require(raw, "value", where), where),
        )
    if op == "return":
        return ReturnStmt(line)
    raise ScenarioParseError(where, f"unknown op {op!r}")


def scenario_from_dict(doc: Any, origin: str = "<scenario>") -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioParseError(origin, "document must be a mapping")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ScenarioParseError(origin, f"format_version must be {FORMAT_VERSION}, got {version!r}")
    name = str(_require(doc, "name", origin))

    types = []
    for ti, traw in enumerate(doc.get("types") or []):
        loc = f"{origin}.types[{ti}]"
        tname = str(_require(traw, "name", loc))
        fields = []
        for fi, fraw in enumerate(traw.get("fields") or []):
            floc = f"{loc}.fields[{fi}]"
            kind = str(_require(fraw, "type", floc))
            if kind not in ("int", "bool", "str"):
                raise ScenarioParseError(floc, f"field type {kind!r} not in int/bool/str")
            init = _check_value(_require(fraw, "init", floc), floc)
            fields.append(FieldDecl(str(_require(fraw, "name", floc)), kind, init))
        types.append(TypeDecl(tname, tuple(fields)))

    routines = []
    for ri, rraw in enumerate(doc.get("routines") or []):
        loc = f"{origin}.routines[{ri}]"
        rname = str(_require(rraw, "name", loc))
        owner = rraw.get("owner")
        params = []
        for pi, praw in enumerate(rraw.get("params") or []):
            ploc = f"{loc}.params[{pi}]"
            domain = praw.get("domain") if isinstance(praw, dict) else None
            if not isinstance(domain, list) or not domain:
                raise ScenarioSemanticError(
                    f"{ploc}: parameter domain must be a non-empty listed set"
                )
            params.append(
                Param(
                    str(_require(praw, "name", ploc)),
                    tuple(_check_value(v, ploc) for v in domain),
                )
            )
        body = tuple(
            _parse_statement(sraw, f"{loc}.body[{si}]")
            for si, sraw in enumerate(rraw.get("body") or [])
        )
        routines.append(Routine(rname, str(owner) if owner is not None else None, tuple(params), body))

    scenario = Scenario(name, tuple(types), tuple(routines))
    _validate_scenario(scenario)
    return scenario


def scenario_from_text(text: str, origin: str = "<scenario>") -> Scenario:
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ScenarioParseError(origin, f"not parsable as YAML: {e}") from e
    return scenario_from_dict(doc, origin)


def load_scenario(path: str | Path) -> Scenario:
    """Load and fully validate a scenario file."""
    path = Path(path)
    return scenario_from_text(path.read_text(), origin=str(path))


def _operand_kind(
    op: Operand, routine: Routine, owner_fields: Mapping[str, FieldDecl], where: str
) -> str:
    if isinstance(op, Const):
        return value_kind(op.value)
    if isinstance(op, ParamRef):
        for p in routine.params:
            if p.name == op.name:
                return p.kind
        raise ScenarioSemanticError(f"{where}: unknown parameter {op.name!r}")
    if op.name not in owner_fields:
        raise ScenarioSemanticError(
            f"{where}: unknown field {op.name!r} on owner of {routine.name!r}"
        )
    return owner_fields[op.name].kind


def _validate_scenario(s: Scenario) -> None:
    if not s.name or any(c.isspace() for c in s.name):
        raise ScenarioSemanticError(f"bad scenario name {s.name!r}")
    tnames = [t.name for t in s.types]
    if len(set(tnames)) != len(tnames):
        raise ScenarioSemanticError("type names must be unique")
    rnames = [r.name for r in s.routines]
    if len(set(rnames)) != len(rnames):
        raise ScenarioSemanticError("routine names must be unique")
    if not s.routines:
        raise ScenarioSemanticError("scenario declares no routines")
    for t in s.types:
        fnames = [f.name for f in t.fields]
        if len(set(fnames)) != len(fnames):
            raise ScenarioSemanticError(f"type {t.name!r} repeats field names")
        for f in t.fields:
            if value_kind(f.init) != f.kind:
                raise ScenarioSemanticError(
                    f"type {t.name}.{f.name}: init {f.init!r} is not {f.kind}"
                )

    all_lines: set[int] = set()
    for r in s.routines:
        where = f"routine {r.name!r}"
        if r.owner is not None and s.type_decl(r.owner) is None:
            raise ScenarioSemanticError(f"{where}: unknown owner type {r.owner!r}")
        pnames = [p.name for p in r.params]
        if len(set(pnames)) != len(pnames):
            raise ScenarioSemanticError(f"{where}: repeated parameter names")
        if not r.body:
            raise ScenarioSemanticError(f"{where}: empty body")
        if len(r.body) > MAX_BODY_STATEMENTS:
            raise ScenarioSemanticError(
                f"{where}: body exceeds {MAX_BODY_STATEMENTS} statements"
            )
        owner_fields: dict[str, FieldDecl] = {}
        if r.owner is not None:
            decl = s.type_decl(r.owner)
            assert decl is not None
            owner_fields = {f.name: f for f in decl.fields}

        prev_line = 0
        for st in r.body:
            sw = f"{where} line {st.line}"
            if st.line <= prev_line:
                raise ScenarioSemanticError(f"{sw}: lines must strictly increase")
            prev_line = st.line
            if st.line in all_lines:
                raise ScenarioSemanticError(f"{sw}: line numbers must be distinct scenario-wide")
            all_lines.add(st.line)

            if isinstance(st, ThrowStmt):
                for atom in st.guard:
                    lk = _operand_kind(atom.left, r, owner_fields, sw)
                    rk = _operand_kind(atom.right, r, owner_fields, sw)
                    if lk != rk:
                        raise ScenarioSemanticError(f"{sw}: comparison mixes {lk} and {rk}")
                    if atom.cmp in ("<", "<=") and lk != "int":
                        raise ScenarioSemanticError(f"{sw}: ordering comparison needs ints")
            elif isinstance(st, CallStmt):
                callee = s.routine(st.routine)
                if callee is None:
                    raise ScenarioSemanticError(f"{sw}: unknown call target {st.routine!r}")
                if callee.owner is not None and callee.owner != r.owner:
                    raise ScenarioSemanticError(
                        f"{sw}: cannot call {st.routine!r} owned by {callee.owner!r} "
                        f"from {r.owner!r} (methods are only callable on self)"
                    )
                if len(st.args) != len(callee.params):
                    raise ScenarioSemanticError(
                        f"{sw}: {st.routine} wants {len(callee.params)} args, got {len(st.args)}"
                    )
                for op, p in zip(st.args, callee.params):
                    ok = _operand_kind(op, r, owner_fields, sw)
                    if ok != p.kind:
                        raise ScenarioSemanticError(
                            f"{sw}: argument for {p.name!r} is {ok}, wants {p.kind}"
                        )
                    if isinstance(op, Const) and not value_in(op.value, p.domain):
                        raise ScenarioSemanticError(
                            f"{sw}: constant {op.value!r} outside domain of {p.name!r}"
                        )
            elif isinstance(st, SetFieldStmt):
                if r.owner is None:
                    raise ScenarioSemanticError(f"{sw}: set_field in a free function")
                if st.field not in owner_fields:
                    raise ScenarioSemanticError(f"{sw}: unknown field {st.field!r}")
                vk = _operand_kind(st.value, r, owner_fields, sw)
                if vk != owner_fields[st.field].kind:
                    raise ScenarioSemanticError(
                        f"{sw}: field {st.field!r} is {owner_fields[st.field].kind}, value is {vk}"
                    )

    # Building the surface re-checks routine/type uniqueness and domains.
    s.surface


# ---------------------------------------------------------------------------
# Execution


@dataclass(frozen=True, slots=True)
class GuardObservation:
    """Aggregated guard evaluations at one throw site.

    ``min_true`` is the smallest observed distance to satisfying the guard,
    ``min_false`` the smallest distance to falsifying it (infinite for
    unconditional throws), and ``fired`` whether the throw ever happened.
    """

    min_true: float
    min_false: float
    fired: bool


@dataclass(frozen=True)
class ExecutionOutcome:
    """Deterministic result of running one genome.

    ``covered_lines``, ``guard_observations``, and ``entered_routines``
    carry the closest-approach evidence the fitness module turns into
    approach level and branch distance.  A guarded throw's line counts as
    covered only when the throw fired.
    """

    kind: str  # crashed | completed | budget_exceeded
    trace: StackTrace | None
    steps_executed: int
    covered_lines: frozenset[tuple[str, int]]
    guard_observations: Mapping[tuple[str, int], GuardObservation]
    entered_routines: frozenset[str]

    def __post_init__(self):
        if self.kind not in ("crashed", "completed", "budget_exceeded"):
            raise ValueError(f"bad outcome kind {self.kind!r}")
        if (self.kind == "crashed") != (self.trace is not None):
            raise ValueError("crashed outcomes carry a trace; others must not")


class _Crash(Exception):
    def __init__(self, trace: StackTrace):
        self.trace = trace


class _BudgetExhausted(Exception):
    pass


def _cmp_distance_true(cmp: str, a: Value, b: Value) -> float:
    """Standard branch distance: 0 iff the comparison holds."""
    if cmp == "==":
        if isinstance(a, bool) or not isinstance(a, int):
            return 0.0 if a == b else 1.0
        return float(abs(a - b))
    if cmp == "!=":
        return 0.0 if a != b else 1.0
    assert isinstance(a, int) and isinstance(b, int)
    if cmp == "<":
        return float(max(a - b + 1, 0))
    return float(max(a - b, 0))  # <=


def _cmp_distance_false(cmp: str, a: Value, b: Value) -> float:
    """Distance to making the comparison fail."""
    if cmp == "==":
        return 0.0 if a != b else 1.0
    if cmp == "!=":
        if isinstance(a, bool) or not isinstance(a, int):
            return 0.0 if a == b else 1.0
        return float(abs(a - b)) if a != b else 0.0
    assert isinstance(a, int) and isinstance(b, int)
    if cmp == "<":
        return float(max(b - a, 0))  # want a >= b
    return float(max(b - a + 1, 0))  # want a > b


def guard_distances(guard: tuple[GuardAtom, ...], resolve) -> tuple[float, float]:
    """(distance to true, distance to false) for a conjunction of atoms."""
    if not guard:
        return 0.0, math.inf
    d_true = 0.0
    d_false = math.inf
    for atom in guard:
        a = resolve(atom.left)
        b = resolve(atom.right)
        d_true += _cmp_distance_true(atom.cmp, a, b)
        d_false = min(d_false, _cmp_distance_false(atom.cmp, a, b))
    return d_true, d_false


class _Interpreter:
    def __init__(self, scenario: Scenario, step_budget: int):
        self.scenario = scenario
        self.step_budget = step_budget
        self.steps = 0
        self.covered: set[tuple[str, int]] = set()
        self.guards: dict[tuple[str, int], list] = {}  # [min_true, min_false, fired]
        self.entered: set[str] = set()
        self.stack: list[list] = []  # [routine, current_line, receiver, params]

    def tick(self):
        self.steps += 1
        if self.steps > self.step_budget:
            raise _BudgetExhausted()

    def observe_guard(self, key: tuple[str, int], d_true: float, d_false: float, fired: bool):
        slot = self.guards.get(key)
        if slot is None:
            self.guards[key] = [d_true, d_false, fired]
        else:
            slot[0] = min(slot[0], d_true)
            slot[1] = min(slot[1], d_false)
            slot[2] = slot[2] or fired

    def build_trace(self, exception_type: str) -> StackTrace:
        frames = []
        for routine, line, _, _ in reversed(self.stack):
            frames.append(
                StackFrame(
                    self.scenario.unit_path(routine),
                    routine.name,
                    self.scenario.file_name,
                    line,
                )
            )
        return StackTrace(exception_type, None, tuple(frames))

    def run_routine(self, routine: Routine, receiver: dict | None, args: tuple[Value, ...]):
        if len(self.stack) >= MAX_CALL_DEPTH:
            raise _BudgetExhausted()
        params = {p.name: v for p, v in zip(routine.params, args)}
        frame = [routine, routine.body[0].line, receiver, params]
        self.stack.append(frame)
        self.entered.add(routine.name)

        def resolve(op: Operand) -> Value:
            if isinstance(op, Const):
                return op.value
            if isinstance(op, ParamRef):
                return params[op.name]
            assert receiver is not None, "field access outside a method"
            return receiver[op.name]

        try:
            for st in routine.body:
                frame[1] = st.line
                self.tick()
                if isinstance(st, ThrowStmt):
                    d_true, d_false = guard_distances(st.guard, resolve)
                    fired = d_true == 0.0
                    self.observe_guard((routine.name, st.line), d_true, d_false, fired)
                    if fired:
                        self.covered.add((routine.name, st.line))
                        raise _Crash(self.build_trace(st.exception_type))
                    continue
                self.covered.add((routine.name, st.line))
                if isinstance(st, CallStmt):
                    callee = self.scenario.routine(st.routine)
                    assert callee is not None
                    callee_args = tuple(resolve(a) for a in st.args)
                    callee_recv = receiver if callee.owner is not None else None
                    self.run_routine(callee, callee_recv, callee_args)
                elif isinstance(st, SetFieldStmt):
                    assert receiver is not None
                    receiver[st.field] = resolve(st.value)
                elif isinstance(st, ReturnStmt):
                    break
        finally:
            self.stack.pop()


def execute(scenario: Scenario, genome: Genome, step_budget: int = DEFAULT_STEP_BUDGET) -> ExecutionOutcome:
    """Run a genome against a scenario; deterministic for fixed inputs.

    The genome must be valid for the scenario's surface.  A fired guarded
    throw aborts execution and synthesizes the call-stack trace at that
    point; budget exhaustion is an outcome, not an error.
    """
    interp = _Interpreter(scenario, step_budget)
    slots: list[Any] = []
    kind = "completed"
    trace = None
    try:
        for stmt in genome.statements:
            interp.tick()
            if isinstance(stmt, Construct):
                decl = scenario.type_decl(stmt.type_name)
                assert decl is not None, f"genome constructs unknown type {stmt.type_name!r}"
                slots.append({f.name: f.init for f in decl.fields})
            elif isinstance(stmt, SetValue):
                slots.append(stmt.value)
            else:
                routine = scenario.routine(stmt.routine)
                assert routine is not None, f"genome invokes unknown routine {stmt.routine!r}"
                receiver = slots[stmt.receiver] if stmt.receiver is not None else None
                args = tuple(slots[a] for a in stmt.args)
                interp.run_routine(routine, receiver, args)
                slots.append(None)
    except _Crash as c:
        kind = "crashed"
        trace = c.trace
    except _BudgetExhausted:
        kind = "budget_exceeded"

    return ExecutionOutcome(
        kind=kind,
        trace=trace,
        steps_executed=interp.steps,
        covered_lines=frozenset(interp.covered),
        guard_observations={
            k: GuardObservation(v[0], v[1], v[2]) for k, v in sorted(interp.guards.items())
        },
        entered_routines=frozenset(interp.entered),
    )


@dataclass(frozen=True)
class ScenarioBackend:
    """Execution backend over a model scenario; safe to share across runs."""

    scenario: Scenario
    step_budget: int = DEFAULT_STEP_BUDGET

    @property
    def surface(self) -> ApiSurface:
        return self.scenario.surface

    def execute(self, genome: Genome) -> ExecutionOutcome:
        return execute(self.scenario, genome, self.step_budget)


def outcome_to_dict(outcome: ExecutionOutcome) -> dict:
    """Stable dict form used by determinism checks and logs."""
    from .trace import format_trace

    return {
        "kind": outcome.kind,
        "trace": format_trace(outcome.trace) if outcome.trace else None,
        "steps_executed": outcome.steps_executed,
        "covered_lines": sorted(outcome.covered_lines),
        "guard_observations": {
            f"{r}:{l}": [o.min_true, o.min_false, o.fired]
            for (r, l), o in sorted(outcome.guard_observations.items())
        },
        "entered_routines": sorted(outcome.entered_routines),
    }
