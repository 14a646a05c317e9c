import json

import pytest
from click.testing import CliRunner

from conftest import FIXTURE_2048
from promptforge.cli import main


@pytest.fixture
def runner():
    return CliRunner()


@pytest.fixture
def prompt_file(tmp_path):
    path = tmp_path / "prompt.txt"
    path.write_text("I want a 2048 game\n", encoding="utf-8")
    return str(path)


def run_args(prompt_file, *extra):
    return ["run", "--kind", "user", "--input", prompt_file,
            "--mock", FIXTURE_2048, "--question-budget", "1", *extra]


class TestRunCommand:
    def test_auto_gate_completes_with_exit_zero(self, runner, prompt_file):
        result = runner.invoke(main, run_args(prompt_file))
        assert result.exit_code == 0
        assert "Please build the software" in result.output

    def test_out_file_written(self, runner, prompt_file, tmp_path):
        out = tmp_path / "final.txt"
        result = runner.invoke(main, run_args(prompt_file, "--out", str(out)))
        assert result.exit_code == 0
        assert out.read_text(encoding="utf-8").startswith("Please build the software")

    def test_stdin_input(self, runner):
        result = runner.invoke(
            main,
            ["run", "--kind", "user", "--input", "-",
             "--mock", FIXTURE_2048, "--question-budget", "1"],
            input="I want a 2048 game\n",
        )
        assert result.exit_code == 0

    def test_interactive_gate_approvals(self, runner, prompt_file):
        result = runner.invoke(
            main, run_args(prompt_file, "--gate", "interactive"),
            input="approve\n" * 4,
        )
        assert result.exit_code == 0
        assert "Please build the software" in result.output

    def test_mock_conflicts_with_provider(self, runner, prompt_file):
        result = runner.invoke(main, run_args(prompt_file, "--provider", "openai"))
        assert result.exit_code == 1
        assert "conflicts" in result.output

    def test_unknown_skip_stage(self, runner, prompt_file):
        result = runner.invoke(main, run_args(prompt_file, "--skip", "testing"))
        assert result.exit_code == 1
        assert "unknown stage" in result.output

    def test_invalid_budget_is_a_usage_error(self, runner, prompt_file):
        result = runner.invoke(main, run_args(prompt_file)[:-1] + ["0"])
        assert result.exit_code == 1

    def test_missing_input_file(self, runner, tmp_path):
        result = runner.invoke(
            main, ["run", "--kind", "user", "--input", str(tmp_path / "nope.txt"),
                   "--mock", FIXTURE_2048],
        )
        assert result.exit_code == 1
        assert "not found" in result.output

    def test_stage_failure_exits_two(self, runner, prompt_file, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps([["*", "junk"], ["*", "junk"], ["*", "junk"]]),
                       encoding="utf-8")
        result = runner.invoke(
            main,
            ["run", "--kind", "user", "--input", prompt_file, "--mock", str(bad),
             "--skip", "elicitation", "--skip", "analysis"],
        )
        assert result.exit_code == 2
        assert "after 3 attempts" in result.output


def prd_reply(name, c, cl, co):
    body = json.dumps({"criteria": {"Completeness": c, "Clarity": cl, "Cohesiveness": co}})
    return [name, "```json\n" + body + "\n```"]


@pytest.fixture
def judge_setup(tmp_path):
    docs = tmp_path / "docs"
    docs.mkdir()
    (docs / "alpha.md").write_text("alpha doc", encoding="utf-8")
    (docs / "beta.md").write_text("beta doc", encoding="utf-8")
    transcript = tmp_path / "judge.json"
    transcript.write_text(
        json.dumps([prd_reply("alpha doc", 5, 4, 3), prd_reply("beta doc", 2, 2, 2)]),
        encoding="utf-8",
    )
    return docs, transcript


class TestJudgeCommand:
    def test_report_with_json_and_figure(self, runner, judge_setup, tmp_path):
        docs, transcript = judge_setup
        out = tmp_path / "report.csv"
        result = runner.invoke(
            main, ["judge", "--kind", "prd", "--in", str(docs),
                   "--mock", str(transcript), "--out", str(out)],
        )
        assert result.exit_code == 0, result.output
        assert out.read_text(encoding="utf-8").splitlines()[1] == "alpha.md,5,4,3"
        assert json.loads(out.with_suffix(".json").read_text(encoding="utf-8"))["doc_kind"] == "prd"
        assert out.with_suffix(".png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"

    def test_no_figures_flag(self, runner, judge_setup, tmp_path):
        docs, transcript = judge_setup
        out = tmp_path / "report.csv"
        result = runner.invoke(
            main, ["judge", "--kind", "prd", "--in", str(docs),
                   "--mock", str(transcript), "--out", str(out), "--no-figures"],
        )
        assert result.exit_code == 0
        assert not out.with_suffix(".png").exists()

    def test_kind_and_in_required(self, runner):
        result = runner.invoke(main, ["judge"])
        assert result.exit_code == 1
        assert "requires --kind and --in" in result.output


class TestCsuqCommand:
    def test_all_fours(self, runner, tmp_path):
        path = tmp_path / "resp.json"
        path.write_text(json.dumps([4] * 19), encoding="utf-8")
        result = runner.invoke(main, ["judge", "csuq", "--in", str(path)])
        assert result.exit_code == 0
        assert result.output.strip() == "overall 4 usability 4 information 4 interface 4"

    def test_all_sevens(self, runner, tmp_path):
        path = tmp_path / "resp.json"
        path.write_text(json.dumps([7] * 19), encoding="utf-8")
        result = runner.invoke(main, ["judge", "csuq", "--in", str(path)])
        assert result.exit_code == 0
        assert "usability 5.5" in result.output

    def test_bad_item_count(self, runner, tmp_path):
        path = tmp_path / "resp.json"
        path.write_text(json.dumps([4] * 5), encoding="utf-8")
        result = runner.invoke(main, ["judge", "csuq", "--in", str(path)])
        assert result.exit_code == 1
