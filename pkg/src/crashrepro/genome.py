"""Candidate test cases as statement sequences, with validity checking and repair.

A genome is an ordered list of statements over a callable surface:
``construct`` creates an object in a new slot, ``set_value`` binds a domain
constant to a new slot, ``invoke`` calls a routine on previously defined
slots.  Slot references are positional (the index of the defining
statement).  Every valid genome contains at least one invoke of its target
routine; ``repair`` is the mechanism that makes the guarantee hold after
arbitrary crossover and mutation damage.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from random import Random

from .surface import ApiSurface, Value, value_in

DEFAULT_LENGTH_MAX = 20


class RepairImpossible(RuntimeError):
    """The length bound cannot host the target call and its dependencies."""


@dataclass(frozen=True, slots=True)
class Construct:
    type_name: str


@dataclass(frozen=True, slots=True)
class SetValue:
    value: Value


@dataclass(frozen=True, slots=True)
class Invoke:
    routine: str
    receiver: int | None
    args: tuple[int | None, ...]


Statement = Construct | SetValue | Invoke


def defines_slot(stmt: Statement) -> bool:
    return isinstance(stmt, (Construct, SetValue))


@dataclass(frozen=True, slots=True)
class Genome:
    """An ordered statement list guaranteed (when valid) to call the target routine."""

    statements: tuple[Statement, ...]
    target_routine: str

    def __len__(self) -> int:
        return len(self.statements)

    def invokes_of(self, routine: str) -> list[int]:
        return [
            i
            for i, s in enumerate(self.statements)
            if isinstance(s, Invoke) and s.routine == routine
        ]


@dataclass(frozen=True, slots=True)
class ValidityReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _slot_kind(stmt: Statement) -> tuple[str, object] | None:
    """(kind, detail) for slot-defining statements: ('obj', type) or ('val', value)."""
    if isinstance(stmt, Construct):
        return ("obj", stmt.type_name)
    if isinstance(stmt, SetValue):
        return ("val", stmt.value)
    return None


def validate(genome: Genome, surface: ApiSurface, length_max: int = DEFAULT_LENGTH_MAX) -> ValidityReport:
    """Report every invariant violation; an empty report means the genome is valid."""
    v: list[str] = []
    stmts = genome.statements
    if not 1 <= len(stmts) <= length_max:
        v.append(f"length {len(stmts)} outside [1, {length_max}]")

    pool = surface.value_pool()

    def check_ref(i: int, ref: int | None, what: str, ok) -> None:
        if ref is None:
            v.append(f"statement {i}: unbound {what}")
            return
        if not 0 <= ref < len(stmts):
            v.append(f"statement {i}: {what} slot v{ref} out of range")
            return
        if ref >= i:
            v.append(f"statement {i}: forward reference to v{ref}")
            return
        kind = _slot_kind(stmts[ref])
        if kind is None:
            v.append(f"statement {i}: {what} v{ref} defines no slot")
            return
        if not ok(kind):
            v.append(f"statement {i}: {what} v{ref} has incompatible type")

    for i, s in enumerate(stmts):
        if isinstance(s, Construct):
            if not surface.has_type(s.type_name):
                v.append(f"statement {i}: unknown type {s.type_name!r}")
        elif isinstance(s, SetValue):
            if not value_in(s.value, pool):
                v.append(f"statement {i}: constant {s.value!r} not in any declared domain")
        elif isinstance(s, Invoke):
            sig = surface.routine(s.routine)
            if sig is None:
                v.append(f"statement {i}: unknown routine {s.routine!r}")
                continue
            if sig.owner is None:
                if s.receiver is not None:
                    v.append(f"statement {i}: {s.routine} takes no receiver")
            else:
                check_ref(i, s.receiver, "receiver", lambda k: k == ("obj", sig.owner))
            if len(s.args) != len(sig.params):
                v.append(
                    f"statement {i}: {s.routine} wants {len(sig.params)} args, got {len(s.args)}"
                )
                continue
            for p, a in zip(sig.params, s.args):
                check_ref(
                    i,
                    a,
                    f"argument {p.name}",
                    lambda k, p=p: k[0] == "val" and value_in(k[1], p.domain),
                )
        else:  # pragma: no cover - closed union
            v.append(f"statement {i}: unknown statement kind {type(s).__name__}")

    if not genome.invokes_of(genome.target_routine):
        v.append("target call missing")
    return ValidityReport(tuple(v))


def _nearest_compatible(out: list[Statement], upto: int, ok) -> int | None:
    for j in range(upto - 1, -1, -1):
        kind = _slot_kind(out[j])
        if kind is not None and ok(kind):
            return j
    return None


def repair(
    genome: Genome,
    surface: ApiSurface,
    rng: Random,
    length_max: int = DEFAULT_LENGTH_MAX,
) -> Genome:
    """Return a valid genome, disturbing the input as little as possible.

    Missing constructors and constants are inserted immediately before first
    use; dangling or incompatible references re-target the nearest earlier
    compatible slot; a target-routine invoke is appended if absent.  Valid
    input is returned unchanged and consumes no randomness, which makes
    repair idempotent.  Raises RepairImpossible only when the target call's
    own dependencies cannot fit in ``length_max`` statements.
    """
    if validate(genome, surface, length_max).ok:
        return genome

    pool = surface.value_pool()
    stmts: list[Statement] = []
    dropped: set[int] = set()
    for i, s in enumerate(genome.statements):
        if isinstance(s, Construct) and not surface.has_type(s.type_name):
            dropped.add(i)
            continue
        if isinstance(s, SetValue) and not value_in(s.value, pool):
            if pool:
                s = SetValue(rng.choice(pool))
            else:
                dropped.add(i)
                continue
        if isinstance(s, Invoke) and surface.routine(s.routine) is None:
            dropped.add(i)
            continue
        stmts.append(s)

    # Old index -> index within `stmts` (pre-fix positions), for reference mapping.
    survivors = [i for i in range(len(genome.statements)) if i not in dropped]
    old_to_mid = {old: mid for mid, old in enumerate(survivors)}

    target_sig = surface.routine(genome.target_routine)
    if target_sig is None:
        raise RepairImpossible(
            f"target routine {genome.target_routine!r} is not on the surface"
        )
    if not any(isinstance(s, Invoke) and s.routine == genome.target_routine for s in stmts):
        stmts.append(
            Invoke(genome.target_routine, None, tuple(None for _ in target_sig.params))
        )

    out: list[Statement] = []
    mid_to_new: dict[int, int] = {}

    def remap(ref: int | None) -> int | None:
        if ref is None or not 0 <= ref < len(genome.statements):
            return None
        mid = old_to_mid.get(ref)
        if mid is None:
            return None
        return mid_to_new.get(mid)  # None when it was a forward reference

    def ref_ok(new_ref: int | None, ok) -> bool:
        if new_ref is None:
            return False
        kind = _slot_kind(out[new_ref])
        return kind is not None and ok(kind)

    for mid, s in enumerate(stmts):
        if isinstance(s, Invoke):
            sig = surface.routine(s.routine)
            assert sig is not None
            receiver: int | None = None
            if sig.owner is not None:
                ok_recv = lambda k, t=sig.owner: k == ("obj", t)
                mapped = remap(s.receiver)
                if ref_ok(mapped, ok_recv):
                    receiver = mapped
                else:
                    receiver = _nearest_compatible(out, len(out), ok_recv)
                    if receiver is None:
                        out.append(Construct(sig.owner))
                        receiver = len(out) - 1
            new_args: list[int] = []
            for pi, p in enumerate(sig.params):
                ok_arg = lambda k, p=p: k[0] == "val" and value_in(k[1], p.domain)
                mapped_a = remap(s.args[pi] if pi < len(s.args) else None)
                if ref_ok(mapped_a, ok_arg):
                    new_args.append(mapped_a)
                    continue
                found = _nearest_compatible(out, len(out), ok_arg)
                if found is None:
                    out.append(SetValue(rng.choice(p.domain)))
                    found = len(out) - 1
                new_args.append(found)
            out.append(Invoke(s.routine, receiver, tuple(new_args)))
        else:
            out.append(s)
        mid_to_new[mid] = len(out) - 1

    if len(out) > length_max:
        out = _trim(out, genome.target_routine, length_max)

    repaired = Genome(tuple(out), genome.target_routine)
    report = validate(repaired, surface, length_max)
    assert report.ok, f"repair left violations: {report.violations}"
    return repaired


def _trim(out: list[Statement], target_routine: str, length_max: int) -> list[Statement]:
    """Cut a too-long statement list down to length_max, keeping the first
    target call and its transitive dependencies intact."""
    protected = next(
        i for i, s in enumerate(out) if isinstance(s, Invoke) and s.routine == target_routine
    )
    required: set[int] = set()
    stack = [protected]
    while stack:
        i = stack.pop()
        if i in required:
            continue
        required.add(i)
        s = out[i]
        if isinstance(s, Invoke):
            for ref in (s.receiver, *s.args):
                if ref is not None:
                    stack.append(ref)
    if len(required) > length_max:
        raise RepairImpossible(
            f"target call needs {len(required)} statements but the bound is {length_max}"
        )

    budget = length_max - len(required)
    kept: dict[int, int] = {}
    trimmed: list[Statement] = []
    for i, s in enumerate(out):
        if i in required:
            pass
        elif budget > 0 and all(
            ref is None or ref in kept
            for ref in ((s.receiver, *s.args) if isinstance(s, Invoke) else ())
        ):
            budget -= 1
        else:
            continue
        if isinstance(s, Invoke):
            s = Invoke(
                s.routine,
                kept[s.receiver] if s.receiver is not None else None,
                tuple(kept[a] if a is not None else None for a in s.args),
            )
        kept[i] = len(trimmed)
        trimmed.append(s)
    return trimmed


def _value_literal(v: Value) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    return json.dumps(v)


def _parse_literal(text: str) -> Value:
    if text == "true":
        return True
    if text == "false":
        return False
    if re.fullmatch(r"-?\d+", text):
        return int(text)
    if text.startswith('"'):
        out = json.loads(text)
        if not isinstance(out, str):
            raise ValueError(f"bad constant literal {text!r}")
        return out
    raise ValueError(f"bad constant literal {text!r}")


_CONSTRUCT_LINE = re.compile(r"^v(?P<slot>\d+) = new (?P<type>\S+)$")
_VALUE_LINE = re.compile(r"^v(?P<slot>\d+) = const (?P<literal>.+)$")
_INVOKE_LINE = re.compile(
    r"^call (?:v(?P<recv>\d+)\.)?(?P<routine>[^.()\s]+)\((?P<args>[^()]*)\)$"
)


def genome_to_text(genome: Genome) -> str:
    """Line-oriented serialization: one statement per line, slots named v<index>.

    Only valid genomes round-trip: unbound references render as ``v?``,
    which the parser rejects.
    """
    lines = []
    for i, s in enumerate(genome.statements):
        if isinstance(s, Construct):
            lines.append(f"v{i} = new {s.type_name}")
        elif isinstance(s, SetValue):
            lines.append(f"v{i} = const {_value_literal(s.value)}")
        else:
            args = ", ".join("v?" if a is None else f"v{a}" for a in s.args)
            if s.receiver is None:
                lines.append(f"call {s.routine}({args})")
            else:
                lines.append(f"call v{s.receiver}.{s.routine}({args})")
    return "\n".join(lines)


def genome_from_text(text: str, target_routine: str) -> Genome:
    """Inverse of genome_to_text; slot names must equal statement indices."""
    stmts: list[Statement] = []
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if not line:
            continue
        i = len(stmts)
        if m := _CONSTRUCT_LINE.match(line):
            if int(m.group("slot")) != i:
                raise ValueError(f"line {ln}: slot v{m.group('slot')} is not index {i}")
            stmts.append(Construct(m.group("type")))
        elif m := _VALUE_LINE.match(line):
            if int(m.group("slot")) != i:
                raise ValueError(f"line {ln}: slot v{m.group('slot')} is not index {i}")
            stmts.append(SetValue(_parse_literal(m.group("literal"))))
        elif m := _INVOKE_LINE.match(line):
            argtext = m.group("args").strip()
            args: list[int | None] = []
            if argtext:
                for piece in argtext.split(","):
                    piece = piece.strip()
                    if not re.fullmatch(r"v\d+", piece):
                        raise ValueError(f"line {ln}: bad argument {piece!r}")
                    args.append(int(piece[1:]))
            recv = m.group("recv")
            stmts.append(
                Invoke(m.group("routine"), int(recv) if recv else None, tuple(args))
            )
        else:
            raise ValueError(f"line {ln}: unparsable statement {line!r}")
    if not stmts:
        raise ValueError("genome text has no statements")
    return Genome(tuple(stmts), target_routine)
