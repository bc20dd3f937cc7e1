"""Repetition harness: crash coverage over seeded runs and report rendering.

Each case runs ``repetitions`` independent searches with seeds
``base_seed + run_index``, so any single run can be re-executed in
isolation.  Every run record is persisted before aggregation; aggregation
follows a deterministic sort by (case id, seed), so the worker count never
affects output bytes.  A case counts as covered when at least one run
reproduces the crash.
"""

from __future__ import annotations

import csv
import io
import json
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

from .engine import Backend, RunRecord, SearchConfig, run_record_to_lines, run_search
from .ioutil import write_atomic
from .trace import CrashCase


@dataclass(frozen=True, slots=True)
class CaseCoverage:
    case_id: str
    run_count: int
    success_count: int
    failure_count: int
    error_count: int

    def __post_init__(self):
        if self.success_count + self.failure_count + self.error_count != self.run_count:
            raise ValueError("run counts do not conserve")

    @property
    def covered(self) -> bool:
        return self.success_count >= 1

    @property
    def percentage_exact(self) -> float:
        return 100.0 * self.success_count / self.run_count

    @property
    def percentage_display(self) -> int:
        return round(self.percentage_exact)


@dataclass(frozen=True, slots=True)
class CoverageReport:
    entries: tuple[CaseCoverage, ...]
    repetitions: int
    base_seed: int

    @property
    def total_cases(self) -> int:
        return len(self.entries)

    @property
    def covered_cases(self) -> int:
        return sum(1 for e in self.entries if e.covered)

    @property
    def total_runs(self) -> int:
        return sum(e.run_count for e in self.entries)

    @property
    def total_successes(self) -> int:
        return sum(e.success_count for e in self.entries)


@dataclass(frozen=True)
class _Task:
    case_id: str
    seed: int
    backend: Backend
    case: CrashCase
    config: SearchConfig


def _execute_task(task: _Task) -> tuple[str, int, str, RunRecord | str]:
    try:
        record = run_search(task.backend, task.case, task.config)
        return (task.case_id, task.seed, "ok", record)
    except Exception as e:  # flagged in the report, not fatal to the experiment
        return (task.case_id, task.seed, "error", f"{type(e).__name__}: {e}")


def run_experiment(
    suite: list[tuple[Backend, CrashCase]],
    repetitions: int,
    base_seed: int,
    config: SearchConfig,
    workers: int = 1,
    out_dir: str | Path | None = None,
) -> tuple[CoverageReport, dict[tuple[str, int], RunRecord]]:
    """Run every case ``repetitions`` times; returns the report plus all records.

    When ``out_dir`` is given, each run's log is written to
    ``runs/<case>/<seed>.runlog`` before any aggregation happens.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be at least 1")
    ids = [case.id for _, case in suite]
    if len(set(ids)) != len(ids):
        raise ValueError("crash case ids must be unique within a suite")

    tasks = [
        _Task(case.id, base_seed + i, backend, case, replace(config, seed=base_seed + i))
        for backend, case in suite
        for i in range(repetitions)
    ]
    tasks.sort(key=lambda t: (t.case_id, t.seed))

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_execute_task, tasks))
    else:
        results = [_execute_task(t) for t in tasks]

    records: dict[tuple[str, int], RunRecord] = {}
    errors: dict[tuple[str, int], str] = {}
    for case_id, seed, status, payload in results:
        if status == "ok":
            assert isinstance(payload, RunRecord)
            records[(case_id, seed)] = payload
        else:
            errors[(case_id, seed)] = str(payload)

    if out_dir is not None:
        runs_dir = Path(out_dir) / "runs"
        for (case_id, seed), record in sorted(records.items()):
            write_atomic(runs_dir / case_id / f"{seed}.runlog", run_record_to_lines(record))
        for (case_id, seed), message in sorted(errors.items()):
            line = json.dumps(
                {"kind": "error", "schema": 1, "case_id": case_id, "seed": seed, "message": message},
                sort_keys=True,
            )
            write_atomic(runs_dir / case_id / f"{seed}.runlog", line + "\n")

    entries = []
    for case_id in sorted(set(ids)):
        successes = failures = errs = 0
        for i in range(repetitions):
            key = (case_id, base_seed + i)
            if key in errors:
                errs += 1
            elif records[key].reproduced:
                successes += 1
            else:
                failures += 1
        entries.append(
            CaseCoverage(case_id, repetitions, successes, failures, errs)
        )
    report = CoverageReport(tuple(entries), repetitions, base_seed)
    return report, records


_BUG_ID_RE = re.compile(r"^(?P<project>.+)-(?P<bug>\d+)$")


def split_case_id(case_id: str) -> tuple[str, str]:
    """'ACC-104' -> ('ACC', '104'); ids without a numeric suffix keep the
    whole id as the project and '-' as the bug id."""
    m = _BUG_ID_RE.match(case_id)
    if m:
        return m.group("project"), m.group("bug")
    return case_id, "-"


def result_cell(entry: CaseCoverage) -> str:
    """Table-text result: Y/N with the integer percentage, 100% suppressed."""
    letter = "Y" if entry.covered else "N"
    pct = entry.percentage_display
    if pct == 100:
        return letter
    return f"{letter} ({pct}%)"


def render_report(report: CoverageReport, format: str = "table-text") -> str:
    if format == "csv":
        return _render_csv(report)
    if format == "table-text":
        return _render_table(report)
    raise ValueError(f"unknown report format {format!r}")


def _render_csv(report: CoverageReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["case_id", "runs", "successes", "failures", "errors", "covered", "percentage_exact"]
    )
    for e in report.entries:
        writer.writerow(
            [
                e.case_id,
                e.run_count,
                e.success_count,
                e.failure_count,
                e.error_count,
                "Y" if e.covered else "N",
                repr(e.percentage_exact),
            ]
        )
    return buf.getvalue()


def _render_table(report: CoverageReport) -> str:
    rows = [("Project/Case", "Bug ID", "Result")]
    for e in report.entries:
        project, bug = split_case_id(e.case_id)
        rows.append((project, bug, result_cell(e)))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    header = "  ".join(col.ljust(widths[i]) for i, col in enumerate(rows[0]))
    lines.append(header.rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for row in rows[1:]:
        lines.append("  ".join(col.ljust(widths[i]) for i, col in enumerate(row)).rstrip())
    lines.append("")
    lines.append(
        f"Covered {report.covered_cases}/{report.total_cases} cases; "
        f"{report.total_successes}/{report.total_runs} runs reproduced"
    )
    return "\n".join(lines) + "\n"
