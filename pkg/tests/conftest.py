import json
import sys
from pathlib import Path

import pytest
from click.testing import CliRunner

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"

E2E_QUERY = "How can we improve the energy efficiency of training deep reinforcement learning agents?"
E2E_ORCID = "0000-0002-1825-0097"
E2E_FEEDBACK = "incorporate Group Relative Policy Optimization (GRPO)"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def mock_config_path() -> Path:
    return FIXTURES / "mock_config.json"


@pytest.fixture
def batch_config_path() -> Path:
    return FIXTURES / "batch_config.json"


def run_e2e(data_dir: Path, out_path: Path, *, feedback: bool = True, extra_args: list[str] | None = None) -> int:
    """Drive the full mock walkthrough through the CLI; returns the exit code."""
    from scidea.cli import main

    args = [
        "run",
        "--config",
        str(FIXTURES / "mock_config.json"),
        "--orcid",
        E2E_ORCID,
        "--query",
        E2E_QUERY,
        "--strategy",
        "zs",
        "--embedding",
        "token",
        "--theta-n",
        "0.7",
        "--theta-s",
        "2.0",
        "--out",
        str(out_path),
        "--data-dir",
        str(data_dir),
    ]
    if feedback:
        args += ["--feedback", E2E_FEEDBACK]
    if extra_args:
        args += extra_args
    result = CliRunner().invoke(main, args, catch_exceptions=False)
    return result.exit_code


def session_journal_path(data_dir: Path) -> Path:
    index = json.loads((data_dir / "index.json").read_text())
    (session_id, filename), = index.items()
    return data_dir / filename


@pytest.fixture
def e2e_run(tmp_path):
    """One completed walkthrough run: (data_dir, output_path)."""
    data_dir = tmp_path / "data"
    out_path = tmp_path / "out.json"
    code = run_e2e(data_dir, out_path)
    assert code == 0
    return data_dir, out_path
