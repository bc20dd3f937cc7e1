"""Engine behavior: stopping, escalation, budgets, determinism, logging."""

import pytest

from crashrepro import fitness
from crashrepro.engine import (
    ConfigError,
    GenerationStats,
    SearchConfig,
    best_so_far,
    run_record_to_lines,
    run_search,
)
from crashrepro.scenario import ScenarioBackend, execute
from crashrepro.trace import CrashCase, StackFrame, StackTrace

from conftest import load_corpus_case


def backend_and_case(name: str):
    scenario, case = load_corpus_case(name)
    return ScenarioBackend(scenario), case


def quick_config(seed: int = 0, budget: int = 2_000) -> SearchConfig:
    return SearchConfig(seed=seed, evaluation_budget=budget, wall_clock_budget=None)


class TestRunSearch:
    def test_trivial_scenario_reproduces_in_first_phase(self):
        backend, case = backend_and_case("always-boom")
        record = run_search(backend, case, quick_config())
        assert record.reproduced
        assert record.population_sizes_visited == (50,)
        assert record.witness is not None

    def test_unreachable_visits_full_escalation_schedule(self):
        backend, case = backend_and_case("probe-gap")
        record = run_search(backend, case, quick_config(budget=2_200))
        assert not record.reproduced
        assert record.population_sizes_visited == tuple(range(50, 301, 25))

    def test_same_seed_identical_serialization(self):
        backend, case = backend_and_case("acc104-analog")
        a = run_search(backend, case, quick_config(seed=9))
        b = run_search(backend, case, quick_config(seed=9))
        assert run_record_to_lines(a) == run_record_to_lines(b)

    def test_budget_accounting_exact(self):
        backend, case = backend_and_case("probe-gap")
        record = run_search(backend, case, quick_config(budget=330))
        assert record.evaluations_used == 330

    def test_witness_reexecutes_to_zero(self):
        backend, case = backend_and_case("session-send")
        record = run_search(backend, case, quick_config(seed=3))
        assert record.reproduced
        value = fitness.evaluate(case, backend.execute(record.witness))
        assert value.total == 0.0

    def test_generation_best_monotone_within_phase(self):
        backend, case = backend_and_case("probe-gap")
        record = run_search(backend, case, quick_config(budget=1_100))
        by_phase: dict[int, list[float]] = {}
        for g in record.generation_log:
            by_phase.setdefault(g.population_size, []).append(g.best_total)
        for bests in by_phase.values():
            assert all(a >= b for a, b in zip(bests, bests[1:]))

    def test_best_so_far_final_matches_best_fitness(self):
        backend, case = backend_and_case("guarded-throw")
        record = run_search(backend, case, quick_config(seed=5))
        assert best_so_far(record.generation_log)[-1] == record.best_fitness.total

    def test_target_routine_missing_from_surface(self):
        backend, _ = backend_and_case("always-boom")
        trace = StackTrace("x.E", None, (StackFrame("u", "ghost", "f", 1),))
        with pytest.raises(ConfigError):
            run_search(backend, CrashCase("ghost", trace, 1), quick_config())

    def test_wall_clock_expiry_still_evaluates_once(self):
        backend, case = backend_and_case("probe-gap")
        config = SearchConfig(seed=0, evaluation_budget=5_000, wall_clock_budget=1e-9)
        record = run_search(backend, case, config)
        assert record.evaluations_used >= 1
        assert record.population_sizes_visited == (50,)

    def test_reproduced_run_stops_early(self):
        backend, case = backend_and_case("box-open")
        record = run_search(backend, case, quick_config(budget=10_000))
        assert record.reproduced
        assert record.evaluations_used < 100


class TestBestSoFar:
    def stats(self, bests):
        return [
            GenerationStats(i, 50, 50, b, b, (i + 1) * 50) for i, b in enumerate(bests)
        ]

    def test_running_minimum(self):
        assert best_so_far(self.stats([5.0, 4.9, 5.2])) == [5.0, 4.9, 4.9]

    def test_singleton(self):
        assert best_so_far(self.stats([2.5])) == [2.5]

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            best_so_far([])


class TestConfigValidation:
    def test_schedule(self):
        cfg = SearchConfig(seed=0)
        assert cfg.schedule() == list(range(50, 301, 25))

    def test_budget_slices_remainder_to_last(self):
        cfg = SearchConfig(seed=0, evaluation_budget=100)
        slices = cfg.budget_slices()
        assert len(slices) == 11
        assert slices[:-1] == [9] * 10
        assert slices[-1] == 10
        assert sum(slices) == 100

    def test_invalid_configs(self):
        with pytest.raises(ConfigError):
            SearchConfig(seed=0, initial_population=1)
        with pytest.raises(ConfigError):
            SearchConfig(seed=0, population_step=0)
        with pytest.raises(ConfigError):
            SearchConfig(seed=0, initial_population=500)
        with pytest.raises(ConfigError):
            SearchConfig(seed=-1)
        with pytest.raises(ConfigError):
            SearchConfig(seed=0, evaluation_budget=5)

    def test_runlog_lines_fixed_point_fitness(self):
        backend, case = backend_and_case("always-boom")
        record = run_search(backend, case, quick_config())
        text = run_record_to_lines(record)
        assert '"total": "0.000000"' in text
        assert text.endswith("\n")
