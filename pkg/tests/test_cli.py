"""Tests for `eazybandit`.cli module."""
import hashlib
from pathlib import Path
from typing import Any, Callable, Dict, List

import orjson
import pytest
from click.testing import CliRunner, Result

import eazybandit
from eazybandit import cli

PayloadFactory = Callable[..., Dict[str, Any]]


def _write(path: Path, payload: Any) -> str:
    path.write_bytes(orjson.dumps(payload))
    return str(path)


def _invoke(data_dir: Path, *args: str) -> Result:
    return CliRunner().invoke(cli.main, ["--data-dir", str(data_dir), *args])


@pytest.fixture
def config_file(tmp_path: Path, payload: PayloadFactory) -> str:
    """A bandit configuration matching the two-arm environment."""
    return _write(tmp_path / "config.json", payload(arms=["a0", "a1"]))


@pytest.fixture
def env_file(tmp_path: Path) -> str:
    """A two-arm environment with delayed rewards."""
    env = {"kind": "BernoulliArms", "means": [0.8, 0.2], "delay": {"kind": "Geometric", "p": 0.2}}
    return _write(tmp_path / "env.json", env)


@pytest.mark.parametrize(
    "options,expected",
    [
        (["--help"], "Usage: main [OPTIONS]"),
        (["--version"], f"main, version { eazybandit.__version__ }\n"),
        (["simulate", "--help"], "--ab-control"),
    ],
)
def test_command_line_interface(options: List[str], expected: str) -> None:
    """Test the CLI."""
    runner = CliRunner()
    result = runner.invoke(cli.main, options)
    assert result.exit_code == 0
    assert expected in result.output


def test_unknown_command(tmp_path: Path) -> None:
    """Test that usage errors exit with 1."""
    result = _invoke(tmp_path, "train")
    assert result.exit_code == cli.EXIT_INVALID


# ------------------------------------------
# Test cases for the administration commands
# ------------------------------------------


def test_create_bandit(tmp_path: Path, config_file: str) -> None:
    """Test creating a bandit and resubmitting its config."""
    for _ in range(2):
        result = _invoke(tmp_path / "data", "create-bandit", "--config", config_file)
        assert result.exit_code == 0
        assert result.output == "Bandit hero ready at version 0\n"


def test_create_invalid_bandit(tmp_path: Path, payload: PayloadFactory) -> None:
    """Test that every violation is listed."""
    path = _write(tmp_path / "bad.json", payload(arms=["a"], attribution_window=0.0))
    result = _invoke(tmp_path / "data", "create-bandit", "--config", path)
    assert result.exit_code == cli.EXIT_INVALID
    assert "  - arm_space needs ≥ 2 arms" in result.output
    assert "  - attribution_window must be a positive duration" in result.output


def test_create_bandit_from_environment(tmp_path: Path, config_file: str) -> None:
    """Test the data directory taken from the environment."""
    result = CliRunner().invoke(
        cli.main,
        ["create-bandit", "--config", config_file],
        env={"EAZYBANDIT_DATA_DIR": str(tmp_path / "env-data")},
    )
    assert result.exit_code == 0
    assert (tmp_path / "env-data" / "store" / "hero.log").exists()


def test_freeze_twice(tmp_path: Path, config_file: str) -> None:
    """Test that freezing a frozen bandit succeeds with a note."""
    data = tmp_path / "data"
    _invoke(data, "create-bandit", "--config", config_file)
    assert _invoke(data, "freeze", "--bandit-id", "hero").output == "Bandit hero frozen\n"
    second = _invoke(data, "freeze", "--bandit-id", "hero")
    assert second.exit_code == 0
    assert second.output == "Bandit hero frozen (already frozen)\n"


def test_unknown_bandit(tmp_path: Path) -> None:
    """Test commands naming bandits that do not exist."""
    for command in ("freeze", "inspect", "replay"):
        result = _invoke(tmp_path, command, "--bandit-id", "ghost")
        assert result.exit_code == cli.EXIT_INVALID
        assert "ghost" in result.output


def test_serve(tmp_path: Path, monkeypatch: Any) -> None:
    """Test that serve hands the application to uvicorn."""
    calls: List[Dict[str, Any]] = []
    monkeypatch.setattr("uvicorn.run", lambda app, **kwargs: calls.append(kwargs))
    result = _invoke(tmp_path, "serve", "--port", "9000")
    assert result.exit_code == 0
    assert calls == [{"host": "127.0.0.1", "port": 9000}]


# ------------------------------------------
# Test cases for simulate, replay and inspect
# ------------------------------------------


def test_simulate_is_reproducible(tmp_path: Path, config_file: str, env_file: str) -> None:
    """Test that two runs with one seed write the same report."""
    digests = []
    for name in ("first", "second"):
        data = tmp_path / name
        result = _invoke(
            data, "simulate", "--config", config_file, "--env", env_file, "--horizon", "400"
        )
        assert result.exit_code == 0
        assert result.output.startswith("regret ")
        report = data / "reports" / "hero-0" / "report.json"
        digests.append(hashlib.sha256(report.read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_simulate_refuses_existing_bandit(
    tmp_path: Path, config_file: str, env_file: str
) -> None:
    """Test that a data directory holds one run per bandit."""
    data = tmp_path / "data"
    args = ["simulate", "--config", config_file, "--env", env_file, "--horizon", "50"]
    assert _invoke(data, *args).exit_code == 0
    result = _invoke(data, *args)
    assert result.exit_code == cli.EXIT_INVALID
    assert "already exists" in result.output


def test_simulate_with_ab_test(tmp_path: Path, config_file: str, env_file: str) -> None:
    """Test the frozen A/B test after a run."""
    out = tmp_path / "out"
    result = _invoke(
        tmp_path / "data",
        "simulate",
        "--config",
        config_file,
        "--env",
        env_file,
        "--horizon",
        "1000",
        "--out",
        str(out),
        "--ab-control",
        "a1",
        "--ab-horizon",
        "2000",
    )
    assert result.exit_code == 0
    assert "uplift " in result.output
    ab = orjson.loads((out / "ab.json").read_bytes())
    assert (ab["n_treatment"], ab["n_control"]) == (1000, 1000)
    assert ab["uplift"] > 0.0


def test_replay_and_inspect(tmp_path: Path, config_file: str, env_file: str) -> None:
    """Test replaying a simulated run's logs and inspecting its bandit."""
    data = tmp_path / "data"
    args = ["--config", config_file, "--env", env_file, "--horizon", "300", "--max-examples", "7"]
    assert _invoke(data, "simulate", *args).exit_code == 0

    result = _invoke(data, "replay", "--bandit-id", "hero")
    assert result.exit_code == 0
    assert "batches identical: true" in result.output
    assert "impressions: 300 " in result.output

    inspected = _invoke(data, "inspect", "--bandit-id", "hero")
    assert inspected.exit_code == 0
    body = orjson.loads(inspected.output)
    assert body["counters"]["impressions"] == 300
    assert body["counters"]["batches"] == body["train_seq"] == body["version"]


def test_sweep(tmp_path: Path, env_file: str, payload: PayloadFactory) -> None:
    """Test a sweep writing its results table."""
    config = _write(tmp_path / "eg.json", payload(algorithm="EpsilonGreedy", arms=["a0", "a1"]))
    grid = _write(tmp_path / "grid.json", {"epsilon": [0.1, 0.5]})
    out = tmp_path / "sweep"
    result = _invoke(
        tmp_path / "data",
        "sweep",
        "--config",
        config,
        "--env",
        env_file,
        "--grid",
        grid,
        "--horizon",
        "200",
        "--seeds",
        "2",
        "--out",
        str(out),
    )
    assert result.exit_code == 0
    assert len(list((out / "runs").glob("*.json"))) == 4
    assert (out / "results.csv").read_text().startswith("epsilon,seed,")


def test_sweep_with_bad_grid(tmp_path: Path, config_file: str, env_file: str) -> None:
    """Test grids that are not name-to-list maps."""
    grid = _write(tmp_path / "grid.json", {"epsilon": 0.1})
    result = _invoke(
        tmp_path, "sweep", "--config", config_file, "--env", env_file, "--grid", grid
    )
    assert result.exit_code == cli.EXIT_INVALID
    assert "grid must map parameter names to lists" in result.output
