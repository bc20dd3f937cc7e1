"""Shared fixtures: corpus access and random generators for property tests."""

from __future__ import annotations

import string
from pathlib import Path
from random import Random

import pytest

from crashrepro.scenario import Scenario, load_scenario
from crashrepro.trace import CrashCase, StackFrame, StackTrace, parse_trace

REPO_ROOT = Path(__file__).resolve().parents[1]
SCENARIO_DIR = REPO_ROOT / "corpus" / "scenarios"

REACHABLE_NAMES = [
    "always-boom",
    "box-open",
    "guarded-throw",
    "strict-resize",
    "bad-mode",
    "neg-input",
    "acc104-analog",
    "session-send",
    "deep-chain",
    "codec-mix",
]
UNREACHABLE_NAMES = ["probe-gap", "sealed-vault"]
ALL_NAMES = sorted(REACHABLE_NAMES + UNREACHABLE_NAMES)


def load_corpus_case(name: str) -> tuple[Scenario, CrashCase]:
    scenario = load_scenario(SCENARIO_DIR / f"{name}.scn")
    trace = parse_trace((SCENARIO_DIR / f"{name}.trace").read_text())
    return scenario, CrashCase(name, trace, len(trace.frames))


@pytest.fixture(scope="session")
def corpus() -> dict[str, tuple[Scenario, CrashCase]]:
    return {name: load_corpus_case(name) for name in ALL_NAMES}


_WORDS = ["alpha", "beta", "gamma", "delta", "omega", "stack", "probe", "vault", "codec"]


def random_identifier(rng: Random) -> str:
    return rng.choice(_WORDS) + rng.choice(["", str(rng.randrange(10))])


def random_canonical_trace(rng: Random) -> StackTrace:
    exc = ".".join(random_identifier(rng) for _ in range(rng.randint(1, 3)))
    message = None
    if rng.random() < 0.6:
        alphabet = string.ascii_letters + string.digits + " :._-()!?"
        message = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
    frames = tuple(
        StackFrame(
            ".".join(random_identifier(rng) for _ in range(rng.randint(1, 3))),
            random_identifier(rng),
            random_identifier(rng) + rng.choice([".ext", ".src", ""]),
            rng.randint(1, 9999),
        )
        for _ in range(rng.randint(1, 8))
    )
    return StackTrace(exc, message, frames)


def random_script_trace(rng: Random) -> StackTrace:
    """script-runtime traces derive the unit path from the file stem, so the
    generator keeps that coupling."""
    exc = ".".join(random_identifier(rng) for _ in range(rng.randint(1, 2)))
    message = None
    if rng.random() < 0.6:
        alphabet = string.ascii_letters + string.digits + " :._-()!?"
        message = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 30)))
    frames = []
    for _ in range(rng.randint(1, 8)):
        module = random_identifier(rng)
        routine = rng.choice([random_identifier(rng), "<module>"])
        frames.append(StackFrame(module, routine, f"{module}.py", rng.randint(1, 9999)))
    return StackTrace(exc, message, tuple(frames))
