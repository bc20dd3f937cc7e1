"""Replay every corpus trigger and diff the live traceback against its reference.

The corpus talks to the reproduction tool only through its public surfaces:
the script-target manifest format, the documented trigger-script preamble,
the module-frame filtering rule, and the ``crashrepro parse-trace`` command
used to normalize both sides of the diff to canonical trace text.
"""

from __future__ import annotations

import re
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass
from pathlib import Path

import yaml

TRACEBACK_HEADER = "Traceback (most recent call last):"
FRAME_RE = re.compile(r'^  File "(?P<file>[^"]+)"(?P<rest>, line \d+, in \S+)$')

DEFAULT_TIMEOUT = 5.0


def reproducer_command() -> list[str]:
    """The crash-reproduction CLI; prefers the installed entry point."""
    exe = shutil.which("crashrepro")
    if exe:
        return [exe]
    return [sys.executable, "-m", "crashrepro.cli"]


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    directory: Path
    module: str
    difficulty: str
    interpreter: list[str]
    timeout_seconds: float
    trigger: tuple[str, ...]

    @property
    def module_file(self) -> str:
        return f"{self.module}.py"

    @property
    def reference_path(self) -> Path:
        return self.directory / "reference.trace"


@dataclass(frozen=True)
class EntryResult:
    name: str
    status: str  # ok | mismatch | unverified
    detail: str = ""


@dataclass(frozen=True)
class VerificationReport:
    results: tuple[EntryResult, ...]

    @property
    def mismatches(self) -> int:
        return sum(1 for r in self.results if r.status == "mismatch")

    @property
    def unverified(self) -> int:
        return sum(1 for r in self.results if r.status == "unverified")

    @property
    def ok(self) -> bool:
        return all(r.status == "ok" for r in self.results)


DIFFICULTY_CLASSES = (
    "trivial",
    "argument-dependent",
    "order-dependent",
    "unreachable-by-manifest",
)


def load_entries(targets_dir: str | Path) -> list[CorpusEntry]:
    targets_dir = Path(targets_dir)
    entries = []
    for manifest_path in sorted(targets_dir.glob("*/manifest.yaml")):
        doc = yaml.safe_load(manifest_path.read_text())
        difficulty = str(doc.get("difficulty", ""))
        if difficulty not in DIFFICULTY_CLASSES:
            raise ValueError(f"{manifest_path}: difficulty {difficulty!r} not in {DIFFICULTY_CLASSES}")
        interpreter = doc.get("interpreter")
        if interpreter is None:
            cmd = [sys.executable]
        elif isinstance(interpreter, str):
            cmd = [interpreter]
        else:
            cmd = [str(c) for c in interpreter]
        trigger = tuple(str(line) for line in doc.get("trigger") or ())
        if not trigger:
            raise ValueError(f"{manifest_path}: entry documents no trigger")
        entries.append(
            CorpusEntry(
                name=manifest_path.parent.name,
                directory=manifest_path.parent.resolve(),
                module=str(doc["module"]),
                difficulty=difficulty,
                interpreter=cmd,
                timeout_seconds=float(doc.get("timeout_seconds", DEFAULT_TIMEOUT)),
                trigger=trigger,
            )
        )
    return entries


def trigger_script(entry: CorpusEntry) -> str:
    lines = [
        "import sys",
        f"sys.path.insert(0, {str(entry.directory)!r})",
        f"import {entry.module}",
        "",
        *entry.trigger,
    ]
    return "\n".join(lines) + "\n"


def run_trigger(entry: CorpusEntry) -> str:
    """Execute the documented trigger; returns raw stderr text."""
    with tempfile.TemporaryDirectory(prefix="crashcorpus-") as workdir:
        script = Path(workdir) / "trigger.py"
        script.write_text(trigger_script(entry))
        proc = subprocess.run(
            [*entry.interpreter, str(script)],
            capture_output=True,
            text=True,
            timeout=entry.timeout_seconds,
            cwd=workdir,
        )
    if proc.returncode == 0:
        raise RuntimeError(f"{entry.name}: trigger did not crash")
    return proc.stderr


def filter_traceback(stderr_text: str, module_file: str) -> str:
    """Reduce raw stderr to the documented filtered form: header, frame lines
    of the module under test (file rewritten to its bare name), exception line."""
    lines = stderr_text.splitlines()
    starts = [i for i, line in enumerate(lines) if line == TRACEBACK_HEADER]
    if not starts:
        raise RuntimeError("no traceback in stderr")
    block = lines[starts[-1] :]
    kept = [TRACEBACK_HEADER]
    exception_line = None
    for line in block[1:]:
        m = FRAME_RE.match(line)
        if m:
            if Path(m.group("file")).name == module_file:
                kept.append(f'  File "{module_file}"{m.group("rest")}')
            continue
        if line.startswith("    "):
            continue  # source echo / caret marker
        exception_line = line
        break
    if exception_line is None:
        raise RuntimeError("traceback block has no exception line")
    kept.append(exception_line)
    if len(kept) < 3:
        raise RuntimeError(f"no frames from {module_file} in the traceback")
    return "\n".join(kept) + "\n"


def normalize(trace_text: str) -> str:
    """Canonical form via the reproduction CLI's parse-trace command."""
    with tempfile.NamedTemporaryFile("w", suffix=".trace", delete=False) as f:
        f.write(trace_text)
        path = f.name
    try:
        proc = subprocess.run(
            [*reproducer_command(), "parse-trace", path, "--grammar", "script-runtime"],
            capture_output=True,
            text=True,
        )
    finally:
        Path(path).unlink(missing_ok=True)
    if proc.returncode != 0:
        raise RuntimeError(f"parse-trace rejected the trace: {proc.stderr.strip()}")
    return proc.stdout


def live_trace(entry: CorpusEntry) -> str:
    """The filtered script-runtime trace the trigger produces right now."""
    return filter_traceback(run_trigger(entry), entry.module_file)


def verify_entry(entry: CorpusEntry) -> EntryResult:
    try:
        live = normalize(live_trace(entry))
    except FileNotFoundError as e:
        return EntryResult(entry.name, "unverified", f"runtime missing: {e}")
    except Exception as e:
        return EntryResult(entry.name, "mismatch", str(e))
    try:
        reference = normalize(entry.reference_path.read_text())
    except Exception as e:
        return EntryResult(entry.name, "mismatch", f"reference unusable: {e}")
    if live != reference:
        return EntryResult(
            entry.name,
            "mismatch",
            f"live != reference\n--- live ---\n{live}--- reference ---\n{reference}",
        )
    return EntryResult(entry.name, "ok")


def verify_corpus(targets_dir: str | Path) -> VerificationReport:
    """Run every documented trigger and diff against the stored references."""
    entries = load_entries(targets_dir)
    results = []
    for entry in entries:
        try:
            results.append(verify_entry(entry))
        except FileNotFoundError as e:
            results.append(EntryResult(entry.name, "unverified", f"runtime missing: {e}"))
    return VerificationReport(tuple(results))


def main(argv: list[str] | None = None) -> int:
    import argparse

    parser = argparse.ArgumentParser(description="Verify corpus reference tracebacks.")
    parser.add_argument(
        "--targets",
        type=Path,
        default=Path(__file__).resolve().parents[2] / "targets",
        help="corpus targets directory",
    )
    args = parser.parse_args(argv)
    report = verify_corpus(args.targets)
    for r in report.results:
        line = f"{r.name}: {r.status}"
        if r.detail and r.status != "ok":
            line += f"\n  {r.detail}"
        print(line)
    print(f"{len(report.results)} entries, {report.mismatches} mismatches, "
          f"{report.unverified} unverified")
    return 0 if report.ok else 1


if __name__ == "__main__":
    sys.exit(main())
