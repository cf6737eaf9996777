import csv
import json

import pytest
from click.testing import CliRunner

from scidea.cli import main

from conftest import FIXTURES, E2E_ORCID, E2E_QUERY, run_e2e, session_journal_path


class TestRun:
    def test_full_run_writes_ranked_output(self, tmp_path):
        out = tmp_path / "out.json"
        code = run_e2e(tmp_path / "data", out)
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["status"] == "RANKED"
        assert payload["thresholds"] == {"theta_n": 0.7, "theta_s": 2.0}
        assert len(payload["ranked_ideas"]) == 6
        overalls = [idea["rubric"]["overall"] for idea in payload["ranked_ideas"]]
        assert overalls == sorted(overalls, reverse=True)

    def test_invalid_strategy_is_usage_error(self, tmp_path):
        result = CliRunner().invoke(
            main,
            [
                "run",
                "--config",
                str(FIXTURES / "mock_config.json"),
                "--orcid",
                E2E_ORCID,
                "--query",
                E2E_QUERY,
                "--strategy",
                "fs4",
                "--out",
                str(tmp_path / "o.json"),
            ],
        )
        assert result.exit_code == 2
        assert "Usage" in result.output or "Invalid value" in result.output

    def test_pipeline_error_exits_one_with_stage(self, tmp_path):
        result = CliRunner().invoke(
            main,
            [
                "run",
                "--config",
                str(FIXTURES / "mock_config.json"),
                "--orcid",
                "0000-0002-0000-0000",  # valid pattern, no fixture data -> facet stage fails
                "--query",
                "unknown territory",
                "--out",
                str(tmp_path / "o.json"),
                "--data-dir",
                str(tmp_path / "data"),
            ],
        )
        assert result.exit_code == 1
        assert "pipeline failed at" in result.output


class TestBatch:
    def invoke(self, tmp_path, *extra):
        return CliRunner().invoke(
            main,
            [
                "batch",
                "--config",
                str(FIXTURES / "batch_config.json"),
                "--dataset",
                str(FIXTURES / "dataset_small.jsonl"),
                "--strategies",
                "zs",
                "--embeddings",
                "none",
                "--out-csv",
                str(tmp_path / "report.csv"),
                "--data-dir",
                str(tmp_path / "data"),
                *extra,
            ],
            catch_exceptions=False,
        )

    def test_single_cell_csv(self, tmp_path):
        result = self.invoke(tmp_path, "--no-figures")
        assert result.exit_code == 0, result.output
        rows = list(csv.reader((tmp_path / "report.csv").open()))
        header, data = rows[0], rows[1:]
        assert header[:8] == [
            "model",
            "size",
            "prompt",
            "novelty",
            "excitement",
            "feasibility",
            "effectiveness",
            "avg",
        ]
        assert len(data) == 1
        novelty, excitement, feasibility, effectiveness, avg = map(float, data[0][3:8])
        assert avg == pytest.approx((novelty + excitement + feasibility + effectiveness) / 4, abs=1e-9)
        # hand-computed from the scripted judge: every idea scores (8, 7, 6, 7)
        assert (novelty, excitement, feasibility, effectiveness) == (8.0, 7.0, 6.0, 7.0)
        assert avg == 7.0

    def test_figures_written_alongside_csv(self, tmp_path):
        result = self.invoke(tmp_path)
        assert result.exit_code == 0
        assert (tmp_path / "report_none.png").exists()

    def test_markdown_table(self, tmp_path):
        result = self.invoke(tmp_path, "--markdown", "--no-figures")
        assert result.exit_code == 0
        table = (tmp_path / "report.md").read_text()
        assert "| Model | Size | Prompt |" in table

    def test_empty_dataset_exits_one(self, tmp_path):
        empty = tmp_path / "empty.jsonl"
        empty.write_text("")
        result = CliRunner().invoke(
            main,
            [
                "batch",
                "--config",
                str(FIXTURES / "batch_config.json"),
                "--dataset",
                str(empty),
                "--out-csv",
                str(tmp_path / "r.csv"),
            ],
        )
        assert result.exit_code == 1
        assert "no records" in result.output

    def test_grid_cell_count(self, tmp_path):
        result = CliRunner().invoke(
            main,
            [
                "batch",
                "--config",
                str(FIXTURES / "batch_config.json"),
                "--dataset",
                str(FIXTURES / "dataset_small.jsonl"),
                "--strategies",
                "zs,zscot",
                "--embeddings",
                "none,token",
                "--out-csv",
                str(tmp_path / "report.csv"),
                "--data-dir",
                str(tmp_path / "data"),
                "--no-figures",
            ],
            catch_exceptions=False,
        )
        assert result.exit_code == 0
        rows = list(csv.reader((tmp_path / "report.csv").open()))
        assert len(rows) - 1 == 1 * 2 * 2  # models x strategies x embeddings


class TestReplay:
    def test_replay_identical(self, e2e_run):
        data_dir, _out = e2e_run
        journal = session_journal_path(data_dir)
        result = CliRunner().invoke(
            main,
            ["replay", "--config", str(FIXTURES / "mock_config.json"), "--journal", str(journal)],
        )
        assert result.exit_code == 0, result.output
        assert "replay identical" in result.output

    def test_deleted_event_detected(self, e2e_run, tmp_path):
        data_dir, _out = e2e_run
        journal = session_journal_path(data_dir)
        lines = journal.read_text().splitlines()
        tampered = data_dir / "tampered.jsonl"
        tampered.write_text("\n".join(lines[:4] + lines[5:]) + "\n")
        result = CliRunner().invoke(
            main,
            ["replay", "--config", str(FIXTURES / "mock_config.json"), "--journal", str(tampered)],
        )
        assert result.exit_code == 1
        assert "gap" in result.output

    def test_cache_miss_named_by_sequence(self, e2e_run, tmp_path):
        data_dir, _out = e2e_run
        journal = session_journal_path(data_dir)
        stripped = tmp_path / "nocache"
        stripped.mkdir()
        (stripped / "session.jsonl").write_text(journal.read_text())
        (stripped / "calls_cache.json").write_text("{}")
        result = CliRunner().invoke(
            main,
            ["replay", "--config", str(FIXTURES / "mock_config.json"), "--journal", str(stripped / "session.jsonl")],
        )
        assert result.exit_code == 1
        assert "cache miss at sequence" in result.output
