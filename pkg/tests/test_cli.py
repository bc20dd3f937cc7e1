"""CLI contract: exit codes, artifacts, normalization."""

import shutil

import pytest

from crashrepro.cli import main

from conftest import SCENARIO_DIR


def scn(name: str) -> str:
    return str(SCENARIO_DIR / f"{name}.scn")


def trc(name: str) -> str:
    return str(SCENARIO_DIR / f"{name}.trace")


class TestReproduce:
    def test_reproduced_exit_zero_and_artifacts(self, tmp_path, capsys):
        code = main(
            [
                "reproduce",
                "--scenario", scn("always-boom"),
                "--trace", trc("always-boom"),
                "--seed", "7",
                "--evaluation-budget", "2000",
                "--out", str(tmp_path),
            ]
        )
        assert code == 0
        assert (tmp_path / "witness.genome").exists()
        assert (tmp_path / "reproduced.trace").read_text() == (
            SCENARIO_DIR / "always-boom.trace"
        ).read_text()
        assert (tmp_path / "run.runlog").exists()
        assert "reproduced" in capsys.readouterr().out

    def test_dump_witness_flag(self, tmp_path, capsys):
        dump = tmp_path / "w.genome"
        code = main(
            [
                "reproduce",
                "--scenario", scn("guarded-throw"),
                "--trace", trc("guarded-throw"),
                "--seed", "2",
                "--evaluation-budget", "2000",
                "--dump-witness", str(dump),
            ]
        )
        assert code == 0
        assert "call lookup(" in dump.read_text()

    def test_unreachable_exit_one(self, capsys):
        code = main(
            [
                "reproduce",
                "--scenario", scn("probe-gap"),
                "--trace", trc("probe-gap"),
                "--seed", "1",
                "--evaluation-budget", "300",
            ]
        )
        assert code == 1

    def test_missing_scenario_exit_two(self, tmp_path, capsys):
        code = main(
            [
                "reproduce",
                "--scenario", str(tmp_path / "nope.scn"),
                "--trace", trc("always-boom"),
                "--seed", "1",
            ]
        )
        assert code == 2
        assert "error" in capsys.readouterr().err

    def test_seed_is_mandatory(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["reproduce", "--scenario", scn("always-boom"), "--trace", trc("always-boom")])
        assert e.value.code == 2

    def test_unknown_flag_rejected(self, capsys):
        with pytest.raises(SystemExit) as e:
            main(["reproduce", "--scenario", scn("always-boom"), "--frobnicate"])
        assert e.value.code == 2

    def test_budget_env_override(self, capsys, monkeypatch):
        monkeypatch.setenv("CRASHREPRO_EVALUATION_BUDGET", "44")
        code = main(
            [
                "reproduce",
                "--scenario", scn("probe-gap"),
                "--trace", trc("probe-gap"),
                "--seed", "7",
                "--evaluation-budget", "9999",
            ]
        )
        assert code == 1
        assert "after 44 evaluations" in capsys.readouterr().out


class TestOracleCommand:
    def test_reachable_exit_zero_with_witness(self, capsys):
        code = main(
            ["oracle", "--scenario", scn("acc104-analog"), "--trace", trc("acc104-analog"),
             "--max-calls", "4"]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "reachable with 3 calls" in out
        assert "call" in out

    def test_unreachable_exit_one(self, capsys):
        code = main(
            ["oracle", "--scenario", scn("sealed-vault"), "--trace", trc("sealed-vault"),
             "--max-calls", "3"]
        )
        assert code == 1

    def test_enumeration_too_large_exit_three(self, tmp_path, capsys):
        big = ", ".join(str(i) for i in range(400))
        (tmp_path / "big.scn").write_text(
            f"""\
format_version: 1
name: big
routines:
  - name: mix
    params:
      - {{name: a, domain: [{big}]}}
      - {{name: b, domain: [{big}]}}
    body:
      - {{line: 1, op: throw, exception: f.E}}
"""
        )
        (tmp_path / "big.trace").write_text("f.E\n\tat big.mix(big.scn:1)\n")
        code = main(
            ["oracle", "--scenario", str(tmp_path / "big.scn"),
             "--trace", str(tmp_path / "big.trace"), "--max-calls", "3"]
        )
        assert code == 3


class TestParseTrace:
    def test_canonical_file_normalizes(self, capsys):
        code = main(["parse-trace", trc("deep-chain")])
        assert code == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "faults.ChainSnap"

    def test_script_runtime_normalizes_to_canonical(self, tmp_path, capsys):
        (tmp_path / "t.trace").write_text(
            "Traceback (most recent call last):\n"
            '  File "leaky.py", line 9, in drain\n'
            "    x = items[i]\n"
            "IndexError: list index out of range\n"
        )
        code = main(["parse-trace", str(tmp_path / "t.trace"), "--grammar", "script-runtime"])
        assert code == 0
        out = capsys.readouterr().out
        assert out.splitlines() == [
            "IndexError: list index out of range",
            "\tat leaky.drain(leaky.py:9)",
        ]

    def test_garbage_exit_two_with_line_number(self, tmp_path, capsys):
        (tmp_path / "bad.trace").write_text("x.E: boom\nnot a frame\n")
        code = main(["parse-trace", str(tmp_path / "bad.trace")])
        assert code == 2
        assert "line 2" in capsys.readouterr().err

    def test_unknown_grammar_exit_two(self, capsys):
        code = main(["parse-trace", trc("always-boom"), "--grammar", "klingon"])
        assert code == 2


class TestBench:
    def make_suite(self, tmp_path, names):
        suite = tmp_path / "suite"
        suite.mkdir()
        for name in names:
            shutil.copy(SCENARIO_DIR / f"{name}.scn", suite)
            shutil.copy(SCENARIO_DIR / f"{name}.trace", suite)
        return suite

    def test_bench_writes_reports(self, tmp_path, capsys):
        suite = self.make_suite(tmp_path, ["always-boom", "guarded-throw"])
        out = tmp_path / "out"
        code = main(
            ["bench", "--suite", str(suite), "--reps", "2", "--base-seed", "5",
             "--evaluation-budget", "1000", "--out", str(out)]
        )
        assert code == 0
        assert (out / "report.txt").exists()
        csv_text = (out / "report.csv").read_text()
        assert "always-boom,2,2,0,0,Y,100.0" in csv_text
        assert (out / "runs" / "guarded-throw" / "5.runlog").exists()

    def test_reps_one_percentages_binary(self, tmp_path):
        suite = self.make_suite(tmp_path, ["always-boom", "probe-gap"])
        out = tmp_path / "out"
        code = main(
            ["bench", "--suite", str(suite), "--reps", "1", "--base-seed", "0",
             "--evaluation-budget", "300", "--out", str(out)]
        )
        assert code == 0
        for line in (out / "report.csv").read_text().splitlines()[1:]:
            assert line.split(",")[-1] in ("100.0", "0.0")

    def test_malformed_suite_exit_two(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        suite.mkdir()
        shutil.copy(SCENARIO_DIR / "always-boom.scn", suite)  # no sibling trace
        code = main(["bench", "--suite", str(suite), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_empty_suite_exit_two(self, tmp_path):
        suite = tmp_path / "empty"
        suite.mkdir()
        code = main(["bench", "--suite", str(suite), "--out", str(tmp_path / "o")])
        assert code == 2

    def test_worker_counts_agree(self, tmp_path):
        suite = self.make_suite(tmp_path, ["always-boom", "session-send"])
        outs = []
        for i, workers in enumerate(("1", "2")):
            out = tmp_path / f"out{i}"
            code = main(
                ["bench", "--suite", str(suite), "--reps", "2", "--base-seed", "3",
                 "--workers", workers, "--evaluation-budget", "1000", "--out", str(out)]
            )
            assert code == 0
            outs.append((out / "report.csv").read_bytes())
        assert outs[0] == outs[1]
