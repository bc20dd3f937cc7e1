"""Stack trace data model, parsing, formatting, and distance metrics.

Traces are the crash evidence the whole search runs against: an exception
type, an optional message, and an ordered list of frames, innermost (throw
site) first.  Two text grammars are shipped: ``canonical`` (JVM-style
``at unit.routine(File:line)`` lines) and ``script-runtime`` (interpreter
traceback blocks, outermost-first in the text).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import PurePosixPath

_NO_WS_RE = re.compile(r"^\S+$")
_EXCEPTION_TYPE_RE = re.compile(r"^[^\s:]+$")
_FILE_RE = re.compile(r'^[^():\s"]+$')
_UNIT_RE = re.compile(r"^[^():\s]+$")

CANONICAL_FRAME_RE = re.compile(r"^\tat (?P<qual>[^():\s]+)\((?P<file>[^():\s\"]+):(?P<line>\d+)\)$")
SCRIPT_FRAME_RE = re.compile(r'^  File "(?P<file>[^"]+)", line (?P<line>\d+), in (?P<routine>\S+)$')
SCRIPT_HEADER = "Traceback (most recent call last):"


class MalformedTrace(ValueError):
    """A line of trace text matched neither the header nor a frame production."""

    def __init__(self, line_number: int, reason: str):
        super().__init__(f"line {line_number}: {reason}")
        self.line_number = line_number
        self.reason = reason


class EmptyTrace(MalformedTrace):
    """Trace text contained a header but no parsable frame."""

    def __init__(self, reason: str = "no stack frames found"):
        super().__init__(0, reason)


@dataclass(frozen=True, slots=True)
class StackFrame:
    """One frame: a routine in a unit, pinned to a file and source line."""

    unit_path: str
    routine: str
    file: str
    line: int

    def __post_init__(self):
        if not _UNIT_RE.match(self.unit_path):
            raise ValueError(f"bad unit_path {self.unit_path!r}")
        if not _NO_WS_RE.match(self.routine) or any(c in self.routine for c in ".():"):
            raise ValueError(f"bad routine name {self.routine!r}")
        if not _FILE_RE.match(self.file):
            raise ValueError(f"bad file name {self.file!r}")
        if not isinstance(self.line, int) or isinstance(self.line, bool) or self.line < 1:
            raise ValueError(f"bad line number {self.line!r}")


@dataclass(frozen=True, slots=True)
class StackTrace:
    """Parsed crash evidence; frames ordered innermost (throw site) first."""

    exception_type: str
    message: str | None
    frames: tuple[StackFrame, ...]

    def __post_init__(self):
        if not _EXCEPTION_TYPE_RE.match(self.exception_type):
            raise ValueError(f"bad exception type {self.exception_type!r}")
        if self.message is not None and ("\n" in self.message or "\r" in self.message):
            raise ValueError("trace message must be single-line")
        if not self.frames:
            raise ValueError("trace needs at least one frame")


@dataclass(frozen=True, slots=True)
class CrashCase:
    """A reproduction target: a trace plus the frame level to reproduce.

    ``target_frame_level`` counts from the innermost frame, starting at 1.
    The routine of that frame is the target routine every candidate test is
    guaranteed to call.
    """

    id: str
    trace: StackTrace
    target_frame_level: int

    def __post_init__(self):
        if not self.id:
            raise ValueError("crash case id must be non-empty")
        if not 1 <= self.target_frame_level <= len(self.trace.frames):
            raise ValueError(
                f"target_frame_level {self.target_frame_level} outside "
                f"[1, {len(self.trace.frames)}]"
            )

    @property
    def target_frame(self) -> StackFrame:
        return self.trace.frames[self.target_frame_level - 1]

    @property
    def target_routine(self) -> str:
        return self.target_frame.routine

    @property
    def crash_site(self) -> StackFrame:
        """The innermost frame: where the exception must be thrown from."""
        return self.trace.frames[0]


def _split_header(line: str, line_number: int) -> tuple[str, str | None]:
    if ": " in line:
        exc, msg = line.split(": ", 1)
    else:
        exc, msg = line, None
    if not _EXCEPTION_TYPE_RE.match(exc):
        raise MalformedTrace(line_number, f"bad exception header {line!r}")
    return exc, msg


def _format_header(trace: StackTrace) -> str:
    if trace.message is None:
        return trace.exception_type
    return f"{trace.exception_type}: {trace.message}"


@dataclass(frozen=True)
class TraceGrammar:
    """Named selection of header/frame productions for one trace text format."""

    name: str

    def parse(self, text: str) -> StackTrace:
        raise NotImplementedError

    def format(self, trace: StackTrace) -> str:
        raise NotImplementedError


class _CanonicalGrammar(TraceGrammar):
    """``Header[: message]`` then tab-indented ``at unit.routine(File:line)`` lines.

    Frames appear innermost-first, top to bottom.
    """

    def parse(self, text: str) -> StackTrace:
        lines = text.splitlines()
        while lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise MalformedTrace(1, "empty trace text")
        exc, msg = _split_header(lines[0], 1)
        frames = []
        for i, line in enumerate(lines[1:], start=2):
            m = CANONICAL_FRAME_RE.match(line)
            if not m:
                raise MalformedTrace(i, f"unparsable frame line {line!r}")
            qual = m.group("qual")
            unit, dot, routine = qual.rpartition(".")
            if not dot or not unit or not routine:
                raise MalformedTrace(i, f"frame site {qual!r} lacks a unit.routine split")
            try:
                frames.append(StackFrame(unit, routine, m.group("file"), int(m.group("line"))))
            except ValueError as e:
                raise MalformedTrace(i, str(e)) from e
        if not frames:
            raise EmptyTrace()
        return StackTrace(exc, msg, tuple(frames))

    def format(self, trace: StackTrace) -> str:
        lines = [_format_header(trace)]
        lines.extend(
            f"\tat {f.unit_path}.{f.routine}({f.file}:{f.line})" for f in trace.frames
        )
        return "\n".join(lines)


class _ScriptRuntimeGrammar(TraceGrammar):
    """Interpreter traceback blocks: ``File "f", line n, in routine`` frames.

    Frames appear outermost-first in the text and are reversed to
    innermost-first on parse.  Source-echo lines (indented four spaces or
    more) between frame lines are skipped.  The frame's unit path is not
    written in this format; it is re-derived as the file's stem, so
    formatting is inverse to parsing only for traces obeying that coupling.
    """

    @staticmethod
    def unit_for_file(file: str) -> str:
        return PurePosixPath(file).stem

    def parse(self, text: str) -> StackTrace:
        lines = text.splitlines()
        while lines and lines[-1] == "":
            lines.pop()
        if not lines:
            raise MalformedTrace(1, "empty trace text")
        if lines[0] != SCRIPT_HEADER:
            raise MalformedTrace(1, f"expected {SCRIPT_HEADER!r}")
        frames: list[StackFrame] = []
        i = 1
        while i < len(lines):
            line = lines[i]
            m = SCRIPT_FRAME_RE.match(line)
            if m:
                file = m.group("file")
                unit = self.unit_for_file(file)
                try:
                    frames.append(
                        StackFrame(unit, m.group("routine"), file, int(m.group("line")))
                    )
                except ValueError as e:
                    raise MalformedTrace(i + 1, str(e)) from e
                i += 1
                continue
            if line.startswith("    "):  # source echo / caret marker
                i += 1
                continue
            break
        if i >= len(lines):
            raise MalformedTrace(len(lines), "traceback block has no exception line")
        exc, msg = _split_header(lines[i], i + 1)
        if i + 1 != len(lines):
            raise MalformedTrace(i + 2, "trailing content after exception line")
        if not frames:
            raise EmptyTrace()
        frames.reverse()
        return StackTrace(exc, msg, tuple(frames))

    def format(self, trace: StackTrace) -> str:
        lines = [SCRIPT_HEADER]
        lines.extend(
            f'  File "{f.file}", line {f.line}, in {f.routine}'
            for f in reversed(trace.frames)
        )
        lines.append(_format_header(trace))
        return "\n".join(lines)


CANONICAL = _CanonicalGrammar("canonical")
SCRIPT_RUNTIME = _ScriptRuntimeGrammar("script-runtime")

GRAMMARS: dict[str, TraceGrammar] = {g.name: g for g in (CANONICAL, SCRIPT_RUNTIME)}


def grammar_by_name(name: str) -> TraceGrammar:
    try:
        return GRAMMARS[name]
    except KeyError:
        raise KeyError(f"unknown trace grammar {name!r}; have {sorted(GRAMMARS)}") from None


def parse_trace(text: str, grammar: TraceGrammar = CANONICAL) -> StackTrace:
    """Parse trace text; raises MalformedTrace / EmptyTrace on bad input."""
    return grammar.parse(text)


def format_trace(trace: StackTrace, grammar: TraceGrammar = CANONICAL) -> str:
    """Emit canonical text for the grammar; inverse of parse_trace on its image."""
    return grammar.format(trace)


def nu(x: float) -> float:
    """Bounded normalization x/(x+1): strictly increasing, nu(0) = 0, sup 1."""
    if x < 0:
        raise ValueError("nu is defined on [0, inf)")
    if x == float("inf"):
        return 1.0
    return x / (x + 1.0)


def frame_distance(expected: StackFrame, actual: StackFrame) -> float:
    """Distance in [0,1]; 0 iff unit path, routine, and line match. File is ignored."""
    if expected.unit_path != actual.unit_path or expected.routine != actual.routine:
        return 1.0
    if expected.line == actual.line:
        return 0.0
    return nu(abs(expected.line - actual.line))


def trace_distance(expected: StackTrace, target_frame_level: int, actual: StackTrace) -> float:
    """Summed frame distances up to the target level, normalized to [0,1].

    Frames missing from the actual trace contribute 1 each; frames deeper
    than the target level are free.
    """
    if not 1 <= target_frame_level <= len(expected.frames):
        raise ValueError(f"target_frame_level {target_frame_level} out of range")
    total = 0.0
    for i in range(target_frame_level):
        if i < len(actual.frames):
            total += frame_distance(expected.frames[i], actual.frames[i])
        else:
            total += 1.0
    return nu(total)
