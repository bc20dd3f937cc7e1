"""Execution backend that runs genomes as scripts in an external interpreter.

A script target is declared by a manifest file (``docs/script-target.md``):
the module under test, the invokable routine signatures with their value
domains, the interpreter command, and a per-execution timeout.  A genome is
rendered to a deterministic, self-contained script; any raised error
propagates to the runtime's standard traceback printer, which we parse with
the ``script-runtime`` grammar and filter down to frames of the module
under test.

This backend is uninstrumented, so its closest-approach data is coarse:
the fitness module sees only which routines and lines appear in the parsed
trace.  Trace-level guidance still functions, which is the trade this
backend makes for running real code.
"""

from __future__ import annotations

import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path, PurePosixPath

import yaml

from .genome import Construct, Genome, Invoke, SetValue
from .scenario import ExecutionOutcome, ScenarioParseError
from .surface import ApiSurface, Param, RoutineSig, Value
from .trace import (
    SCRIPT_HEADER,
    SCRIPT_RUNTIME,
    MalformedTrace,
    StackFrame,
    StackTrace,
    parse_trace,
)

MANIFEST_FORMAT_VERSION = 1
DEFAULT_TIMEOUT_SECONDS = 5.0


class InterpreterMissing(RuntimeError):
    pass


class UnrenderableStatement(ValueError):
    pass


class UnparsableTraceback(RuntimeError):
    """Raised when a nonzero exit produced no usable module traceback.

    The raw text is preserved for triage; when the target names a
    ``failed_script_dir`` the script is retained there too.
    """

    def __init__(self, reason: str, raw: str):
        super().__init__(f"{reason}\n--- raw stderr ---\n{raw}")
        self.reason = reason
        self.raw = raw


@dataclass(frozen=True)
class ScriptTarget:
    name: str
    module: str
    directory: Path
    surface: ApiSurface
    interpreter: tuple[str, ...] = (sys.executable,)
    timeout_seconds: float = DEFAULT_TIMEOUT_SECONDS
    grammar_name: str = "script-runtime"
    trigger: tuple[str, ...] = ()  # documented triggering call sequence, verbatim lines
    failed_script_dir: Path | None = None

    def __post_init__(self):
        if self.timeout_seconds <= 0:
            raise ValueError("timeout must be positive")

    @property
    def module_file(self) -> str:
        return f"{self.module}.py"


def load_script_target(path: str | Path) -> ScriptTarget:
    """Load a script-target manifest; the module lives next to the manifest."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ScenarioParseError(str(path), f"not parsable as YAML: {e}") from e
    if not isinstance(doc, dict):
        raise ScenarioParseError(str(path), "manifest must be a mapping")
    if doc.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise ScenarioParseError(str(path), "format_version must be 1")
    if "module" not in doc:
        raise ScenarioParseError(str(path), "missing key 'module'")
    module = str(doc["module"])

    types = tuple(str(t["name"]) for t in doc.get("types") or [])
    routines = []
    for rraw in doc.get("routines") or []:
        params = []
        for praw in rraw.get("params") or []:
            domain = praw.get("domain")
            if not isinstance(domain, list) or not domain:
                raise ScenarioParseError(
                    str(path), f"routine {rraw.get('name')}: domain must be a non-empty list"
                )
            params.append(Param(str(praw["name"]), tuple(domain)))
        owner = rraw.get("owner")
        routines.append(
            RoutineSig(str(rraw["name"]), str(owner) if owner is not None else None, tuple(params))
        )
    surface = ApiSurface(types=types, routines=tuple(routines))

    interpreter = doc.get("interpreter")
    if interpreter is None:
        cmd: tuple[str, ...] = (sys.executable,)
    elif isinstance(interpreter, str):
        cmd = (interpreter,)
    else:
        cmd = tuple(str(c) for c in interpreter)

    trigger = tuple(str(line) for line in doc.get("trigger") or [])

    return ScriptTarget(
        name=str(doc.get("name", module)),
        module=module,
        directory=path.parent.resolve(),
        surface=surface,
        interpreter=cmd,
        timeout_seconds=float(doc.get("timeout_seconds", DEFAULT_TIMEOUT_SECONDS)),
        trigger=trigger,
    )


def _py_literal(v: Value) -> str:
    return repr(v)


def script_preamble(target: ScriptTarget) -> list[str]:
    return [
        "import sys",
        f"sys.path.insert(0, {str(target.directory)!r})",
        f"import {target.module}",
        "",
    ]


def render_script(genome: Genome, target: ScriptTarget) -> str:
    """Emit a deterministic script performing the genome's statements in order."""
    lines = script_preamble(target)
    for i, s in enumerate(genome.statements):
        if isinstance(s, Construct):
            if not target.surface.has_type(s.type_name):
                raise UnrenderableStatement(f"type {s.type_name!r} not in the manifest")
            lines.append(f"v{i} = {target.module}.{s.type_name}()")
        elif isinstance(s, SetValue):
            lines.append(f"v{i} = {_py_literal(s.value)}")
        elif isinstance(s, Invoke):
            sig = target.surface.routine(s.routine)
            if sig is None:
                raise UnrenderableStatement(f"routine {s.routine!r} not in the manifest")
            if s.receiver is None and sig.owner is not None:
                raise UnrenderableStatement(f"method {s.routine!r} rendered without a receiver")
            args = ", ".join(f"v{a}" for a in s.args)
            if sig.owner is None:
                lines.append(f"{target.module}.{s.routine}({args})")
            else:
                lines.append(f"v{s.receiver}.{s.routine}({args})")
        else:
            raise UnrenderableStatement(f"statement kind {type(s).__name__} not renderable")
    return "\n".join(lines) + "\n"


def render_trigger_script(target: ScriptTarget) -> str:
    """Script for the manifest's documented triggering sequence."""
    return "\n".join(script_preamble(target) + list(target.trigger)) + "\n"


def extract_last_traceback(stderr_text: str) -> str:
    """Isolate the last traceback block from interpreter stderr."""
    lines = stderr_text.splitlines()
    starts = [i for i, line in enumerate(lines) if line == SCRIPT_HEADER]
    if not starts:
        raise UnparsableTraceback("no traceback header in stderr", stderr_text)
    block = lines[starts[-1] :]
    # Trim trailing interpreter chatter after the exception line, if any.
    out = [block[0]]
    for line in block[1:]:
        out.append(line)
        if not line.startswith("  ") and not line.startswith("    "):
            break  # first non-indented line after frames is the exception line
    return "\n".join(out)


def parse_script_traceback(stderr_text: str, target: ScriptTarget) -> StackTrace:
    """Parse stderr into a StackTrace filtered to the module under test."""
    block = extract_last_traceback(stderr_text)
    try:
        trace = parse_trace(block, SCRIPT_RUNTIME)
    except MalformedTrace as e:
        raise UnparsableTraceback(f"traceback does not parse: {e}", stderr_text) from e
    kept = tuple(
        StackFrame(target.module, f.routine, target.module_file, f.line)
        for f in trace.frames
        if PurePosixPath(f.file).name == target.module_file
    )
    if not kept:
        raise UnparsableTraceback(
            f"no frames from module {target.module!r} in the traceback", stderr_text
        )
    return StackTrace(trace.exception_type, trace.message, kept)


@dataclass(frozen=True)
class ScriptBackend:
    """Execution backend over a script target; one subprocess per execution."""

    target: ScriptTarget

    @property
    def surface(self) -> ApiSurface:
        return self.target.surface

    def execute(self, genome: Genome) -> ExecutionOutcome:
        return execute_script(render_script(genome, self.target), self.target)


def execute_script(script: str, target: ScriptTarget) -> ExecutionOutcome:
    """Run a script in an isolated subprocess and classify the outcome.

    Nonzero exit with a parsable module traceback -> crashed; clean exit ->
    completed; timeout -> budget_exceeded.  The temp dir is deleted on
    those paths and retained (if a failed_script_dir is set) when the
    traceback cannot be parsed.
    """
    workdir = Path(tempfile.mkdtemp(prefix="crashrepro-run-"))
    script_path = workdir / "script.py"
    script_path.write_text(script)
    keep = False
    try:
        try:
            proc = subprocess.run(
                [*target.interpreter, str(script_path)],
                capture_output=True,
                text=True,
                timeout=target.timeout_seconds,
                cwd=workdir,
            )
        except FileNotFoundError as e:
            raise InterpreterMissing(f"interpreter {target.interpreter[0]!r} not found") from e
        except subprocess.TimeoutExpired:
            return _outcome("budget_exceeded", None)

        if proc.returncode == 0:
            return _outcome("completed", None)

        try:
            trace = parse_script_traceback(proc.stderr, target)
        except UnparsableTraceback:
            keep = True
            raise
        return _outcome("crashed", trace)
    finally:
        if keep and target.failed_script_dir is not None:
            retain = Path(target.failed_script_dir)
            retain.mkdir(parents=True, exist_ok=True)
            shutil.copy(script_path, retain / f"{workdir.name}.py")
        shutil.rmtree(workdir, ignore_errors=True)


def _outcome(kind: str, trace: StackTrace | None) -> ExecutionOutcome:
    covered = frozenset((f.routine, f.line) for f in trace.frames) if trace else frozenset()
    entered = frozenset(f.routine for f in trace.frames) if trace else frozenset()
    return ExecutionOutcome(
        kind=kind,
        trace=trace,
        steps_executed=0,
        covered_lines=covered,
        guard_observations={},
        entered_routines=entered,
    )
