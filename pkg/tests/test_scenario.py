"""Scenario loading, validation, and interpreter semantics."""

import json

import pytest

from crashrepro.genome import Construct, Genome, Invoke, SetValue
from crashrepro.scenario import (
    ScenarioParseError,
    ScenarioSemanticError,
    execute,
    outcome_to_dict,
    scenario_from_text,
)
from crashrepro.trace import format_trace

from conftest import SCENARIO_DIR, load_corpus_case

MINIMAL = """
format_version: 1
name: minimal
routines:
  - name: boom
    params: []
    body:
      - {line: 1, op: throw, exception: faults.Boom}
"""


class TestLoading:
    def test_minimal_loads(self):
        s = scenario_from_text(MINIMAL)
        assert len(s.routines) == 1

    def test_acc104_analog_fixture(self):
        scenario, _ = load_corpus_case("acc104-analog")
        assert len(scenario.routines) >= 2

    def test_all_corpus_scenarios_load(self):
        names = sorted(p.stem for p in SCENARIO_DIR.glob("*.scn"))
        assert len(names) == 12
        for name in names:
            scenario, case = load_corpus_case(name)
            assert scenario.name == name
            assert scenario.surface.routine(case.target_routine) is not None

    def test_undeclared_call_target(self):
        text = """
format_version: 1
name: bad
routines:
  - name: a
    params: []
    body:
      - {line: 1, op: call, routine: ghost, args: []}
"""
        with pytest.raises(ScenarioSemanticError, match="unknown call target"):
            scenario_from_text(text)

    def test_non_increasing_lines(self):
        text = """
format_version: 1
name: bad
routines:
  - name: a
    params: []
    body:
      - {line: 5, op: return}
      - {line: 5, op: return}
"""
        with pytest.raises(ScenarioSemanticError, match="strictly increase"):
            scenario_from_text(text)

    def test_unbounded_domain(self):
        text = """
format_version: 1
name: bad
routines:
  - name: a
    params:
      - {name: x, domain: []}
    body:
      - {line: 1, op: return}
"""
        with pytest.raises(ScenarioSemanticError, match="non-empty listed set"):
            scenario_from_text(text)

    def test_wrong_format_version(self):
        with pytest.raises(ScenarioParseError, match="format_version"):
            scenario_from_text("format_version: 2\nname: x\nroutines: []")

    def test_yaml_garbage(self):
        with pytest.raises(ScenarioParseError):
            scenario_from_text(":\n  - ::")

    def test_cross_owner_method_call_rejected(self):
        text = """
format_version: 1
name: bad
types:
  - {name: A, fields: []}
  - {name: B, fields: []}
routines:
  - name: ma
    owner: A
    params: []
    body:
      - {line: 1, op: call, routine: mb, args: []}
  - name: mb
    owner: B
    params: []
    body:
      - {line: 2, op: return}
"""
        with pytest.raises(ScenarioSemanticError, match="callable on self"):
            scenario_from_text(text)

    def test_guard_type_mismatch(self):
        text = """
format_version: 1
name: bad
routines:
  - name: a
    params:
      - {name: x, domain: [1, 2]}
    body:
      - line: 1
        op: throw
        exception: f.E
        when:
          - {left: {param: x}, cmp: "==", right: {const: "one"}}
"""
        with pytest.raises(ScenarioSemanticError, match="mixes int and str"):
            scenario_from_text(text)

    def test_ordering_comparison_needs_ints(self):
        text = """
format_version: 1
name: bad
routines:
  - name: a
    params:
      - {name: x, domain: ["p", "q"]}
    body:
      - line: 1
        op: throw
        exception: f.E
        when:
          - {left: {param: x}, cmp: "<", right: {const: "q"}}
"""
        with pytest.raises(ScenarioSemanticError, match="needs ints"):
            scenario_from_text(text)

    def test_duplicate_lines_across_routines_rejected(self):
        text = """
format_version: 1
name: bad
routines:
  - name: a
    params: []
    body:
      - {line: 7, op: return}
  - name: b
    params: []
    body:
      - {line: 7, op: return}
"""
        with pytest.raises(ScenarioSemanticError, match="distinct scenario-wide"):
            scenario_from_text(text)


class TestExecution:
    def test_unconditional_throw_innermost_frame(self):
        s = scenario_from_text(MINIMAL)
        out = execute(s, Genome((Invoke("boom", None, ()),), "boom"))
        assert out.kind == "crashed"
        assert out.trace.frames[0].routine == "boom"
        assert out.trace.frames[0].line == 1

    def test_benign_genome_completes(self):
        scenario, _ = load_corpus_case("acc104-analog")
        g = Genome((Construct("Registry"), Invoke("load", 0, ())), "load")
        out = execute(scenario, g)
        assert out.kind == "completed"
        assert out.trace is None

    def test_acc104_required_order_reproduces_reference(self):
        scenario, case = load_corpus_case("acc104-analog")
        g = Genome(
            (
                Construct("Registry"),
                Invoke("load", 0, ()),
                SetValue(3),
                Invoke("configure", 0, (2,)),
                Invoke("flush", 0, ()),
            ),
            "flush",
        )
        out = execute(scenario, g)
        assert out.kind == "crashed"
        assert format_trace(out.trace) + "\n" == (SCENARIO_DIR / "acc104-analog.trace").read_text()

    def test_acc104_wrong_order_crashes_differently(self):
        scenario, _ = load_corpus_case("acc104-analog")
        g = Genome(
            (Construct("Registry"), SetValue(3), Invoke("configure", 0, (1,))),
            "configure",
        )
        out = execute(scenario, g)
        assert out.kind == "crashed"
        assert out.trace.exception_type == "faults.RegistryNotReady"

    def test_determinism_1000_runs(self):
        scenario, _ = load_corpus_case("codec-mix")
        g = Genome(
            (
                Construct("Codec"),
                SetValue(2),
                Invoke("init", 0, (1,)),
                SetValue(4),
                Invoke("encode", 0, (3,)),
            ),
            "encode",
        )
        reference = json.dumps(outcome_to_dict(execute(scenario, g)), sort_keys=True)
        for _ in range(1000):
            again = json.dumps(outcome_to_dict(execute(scenario, g)), sort_keys=True)
            assert again == reference

    def test_trace_soundness_on_deep_chain(self):
        scenario, _ = load_corpus_case("deep-chain")
        g = Genome((SetValue(5), Invoke("alpha", None, (0,))), "alpha")
        out = execute(scenario, g)
        assert [(f.routine, f.line) for f in out.trace.frames] == [
            ("gamma", 30),
            ("beta", 20),
            ("alpha", 10),
        ]

    def test_coverage_monotone_over_prefixes(self):
        scenario, _ = load_corpus_case("acc104-analog")
        stmts = (
            Construct("Registry"),
            Invoke("load", 0, ()),
            SetValue(1),
            Invoke("configure", 0, (2,)),
            Invoke("flush", 0, ()),
        )
        covered_prev = frozenset()
        for n in range(1, len(stmts) + 1):
            out = execute(scenario, Genome(stmts[:n], "flush"))
            assert out.kind == "completed"
            assert covered_prev <= out.covered_lines
            covered_prev = out.covered_lines

    def test_runaway_recursion_hits_budget(self):
        text = """
format_version: 1
name: spin
routines:
  - name: loop
    params: []
    body:
      - {line: 1, op: call, routine: loop, args: []}
      - {line: 2, op: return}
"""
        s = scenario_from_text(text)
        out = execute(s, Genome((Invoke("loop", None, ()),), "loop"), step_budget=500)
        assert out.kind == "budget_exceeded"
        assert out.steps_executed <= 501

    def test_guard_observation_distances(self):
        scenario, _ = load_corpus_case("guarded-throw")
        g = Genome((SetValue(3), Invoke("lookup", None, (0,))), "lookup")
        out = execute(scenario, g)
        assert out.kind == "completed"
        obs = out.guard_observations[("lookup", 5)]
        assert obs.min_true == 4.0  # |3 - 7|
        assert not obs.fired

    def test_steps_counted(self):
        s = scenario_from_text(MINIMAL)
        out = execute(s, Genome((Invoke("boom", None, ()),), "boom"))
        assert out.steps_executed == 2  # the invoke plus the throw statement
