"""Console script for eazybandit."""
import logging
import sys
from pathlib import Path
from typing import Any, List, Optional

import click
import orjson
import pydantic

from eazybandit import __version__
from eazybandit.core import parse_config
from eazybandit.exceptions import (
    AlreadyFrozen,
    EazyBanditError,
    InvalidConfig,
    UnknownBandit,
    ValidationFailure,
)
from eazybandit.journal import JSON_OPTIONS
from eazybandit.pipeline import BatchLog, EventLog, FlushPolicy, batch_bytes, replay
from eazybandit.service import Platform, saved_flush_policy
from eazybandit.settings import SamplerSettings, ServeSettings, configure_logging
from eazybandit.simulator import (
    PipelineParams,
    Simulation,
    load_environment,
    results_table,
    sweep,
    write_plots,
    write_report,
)
from eazybandit.store import FileBanditStore, StoreConfig

logger = logging.getLogger(__name__)

#: Exit code of a usage or validation error.
EXIT_INVALID = 1

#: Exit code of a runtime failure.
EXIT_FAILURE = 2


class BanditGroup(click.Group):
    """Click group mapping errors to the platform's exit codes."""

    def main(self, *args: Any, **kwargs: Any) -> Any:  # noqa: D102
        kwargs["standalone_mode"] = False
        try:
            rv = super().main(*args, **kwargs)
        except click.ClickException as e:
            e.show()
            sys.exit(EXIT_INVALID)
        except click.Abort:
            click.echo("Aborted!", err=True)
            sys.exit(EXIT_INVALID)
        except InvalidConfig as e:
            click.echo("Error: invalid bandit configuration", err=True)
            for violation in e.violations:
                click.echo(f"  - {violation}", err=True)
            sys.exit(EXIT_INVALID)
        except (ValidationFailure, UnknownBandit, pydantic.ValidationError, ValueError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_INVALID)
        except (EazyBanditError, OSError) as e:
            click.echo(f"Error: {e}", err=True)
            sys.exit(EXIT_FAILURE)
        sys.exit(rv if isinstance(rv, int) else 0)


def _load_json(path: Path) -> Any:
    return orjson.loads(path.read_bytes())


def _echo_json(payload: Any) -> None:
    click.echo(orjson.dumps(payload, option=JSON_OPTIONS | orjson.OPT_INDENT_2).decode())


def _store(data_dir: Path) -> FileBanditStore:
    return FileBanditStore(config=StoreConfig(root=data_dir / "store"))


json_file = click.Path(exists=True, dir_okay=False, path_type=Path)


@click.group(cls=BanditGroup)
@click.version_option(version=__version__)
@click.option(
    "--data-dir",
    type=click.Path(file_okay=False, path_type=Path),
    default="data",
    show_default=True,
    envvar="EAZYBANDIT_DATA_DIR",
    help="Directory holding store/, logs/ and reports/.",
)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    default="WARNING",
    show_default=True,
    envvar="EAZYBANDIT_LOG_LEVEL",
    help="Logging level.",
)
@click.pass_context
def main(ctx: click.Context, data_dir: Path, log_level: str) -> None:
    """Self-service contextual bandits: configure, serve, learn and simulate."""
    configure_logging(log_level)
    ctx.obj = data_dir


# ------------------------------------------
# Service
# ------------------------------------------


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True, help="Interface to bind.")
@click.option(
    "--port", type=int, default=8080, show_default=True, envvar="SAMPLER_PORT", help="Port."
)
@click.option(
    "--refresh-secs",
    type=float,
    default=10.0,
    show_default=True,
    envvar="SAMPLER_REFRESH_SECS",
    help="Seconds between parameter refreshes.",
)
@click.option(
    "--ttl-secs",
    type=float,
    default=1800.0,
    show_default=True,
    envvar="SAMPLER_TTL_SECS",
    help="Seconds a session keeps its decision.",
)
@click.option(
    "--cache-cap",
    type=int,
    default=100_000,
    show_default=True,
    envvar="SAMPLER_CACHE_CAP",
    help="Sessions held by the consistency cache.",
)
@click.option(
    "--max-in-flight",
    type=int,
    default=1024,
    show_default=True,
    help="Concurrent sample requests before shedding load.",
)
@click.option("--max-examples", type=int, default=100, show_default=True, help="Batch size.")
@click.option(
    "--max-wait", type=float, default=60.0, show_default=True, help="Seconds a batch may wait."
)
@click.option(
    "--tick-interval",
    type=float,
    default=1.0,
    show_default=True,
    help="Seconds between pipeline clock ticks.",
)
@click.pass_obj
def serve(
    data_dir: Path,
    host: str,
    port: int,
    refresh_secs: float,
    ttl_secs: float,
    cache_cap: int,
    max_in_flight: int,
    max_examples: int,
    max_wait: float,
    tick_interval: float,
) -> None:
    """Run the decision service, reward pipeline and trainer on the data directory."""
    import uvicorn

    from eazybandit.api import create_app

    settings = ServeSettings(
        data_dir=data_dir,
        host=host,
        port=port,
        sampler=SamplerSettings(
            refresh_period=refresh_secs,
            ttl=ttl_secs,
            capacity=cache_cap,
            max_in_flight=max_in_flight,
        ),
        flush_policy=FlushPolicy(max_examples=max_examples, max_wait=max_wait),
        tick_interval=tick_interval,
    )
    platform = Platform(settings.data_dir, settings.sampler, settings.flush_policy)
    app = create_app(platform, settings.tick_interval)
    logger.info("Serving %s on %s:%d", data_dir, host, port)
    uvicorn.run(app, host=settings.host, port=settings.port)


# ------------------------------------------
# Administration
# ------------------------------------------


@main.command("create-bandit")
@click.option("--config", "config_path", type=json_file, required=True, help="Config JSON.")
@click.pass_obj
def create_bandit(data_dir: Path, config_path: Path) -> None:
    """Create a bandit, or resubmit its configuration."""
    config = parse_config(_load_json(config_path))
    version = _store(data_dir).put_config(config)
    click.echo(f"Bandit {config.bandit_id} ready at version {version}")


@main.command()
@click.option("--bandit-id", required=True, help="Bandit to freeze.")
@click.pass_obj
def freeze(data_dir: Path, bandit_id: str) -> None:
    """Stop a bandit's learning; it then exploits its posterior means."""
    try:
        _store(data_dir).freeze(bandit_id)
    except AlreadyFrozen:
        click.echo(f"Bandit {bandit_id} frozen (already frozen)")
        return
    click.echo(f"Bandit {bandit_id} frozen")


@main.command()
@click.option("--bandit-id", required=True, help="Bandit to inspect.")
@click.pass_obj
def inspect(data_dir: Path, bandit_id: str) -> None:
    """Print a bandit's configuration, parameter version and log counters."""
    store = _store(data_dir)
    config, params = store.snapshot(bandit_id)
    logs = data_dir / "logs"
    events = EventLog(logs, store.get_config)
    _echo_json(
        {
            "config": config.model_dump(mode="json"),
            "version": params.version,
            "train_seq": params.train_seq,
            "updated_at": params.updated_at,
            "counters": {
                "impressions": len(events.journal(bandit_id, "impression")),
                "rewards": len(events.journal(bandit_id, "reward")),
                "batches": len(BatchLog(logs, bandit_id).journal),
            },
        }
    )


@main.command("replay")
@click.option("--bandit-id", required=True, help="Bandit whose logs are replayed.")
@click.pass_obj
def replay_command(data_dir: Path, bandit_id: str) -> int:
    """Re-derive a bandit's batches from its event logs and compare them with the batch log."""
    store = _store(data_dir)
    config = store.get_config(bandit_id)
    logs = data_dir / "logs"
    flush_policy = saved_flush_policy(data_dir, bandit_id) or FlushPolicy()
    batches, counters = replay(EventLog(logs, store.get_config), config, flush_policy)
    logged = [batch for _, batch in BatchLog(logs, bandit_id).read_from(0)]
    identical = batch_bytes(batches) == batch_bytes(logged)
    conserved = counters.impressions == counters.examples + counters.dropped_examples
    click.echo(f"batches replayed: {len(batches)}")
    click.echo(f"batches logged: {len(logged)}")
    click.echo(f"batches identical: {str(identical).lower()}")
    click.echo(
        f"impressions: {counters.impressions} examples: {counters.examples} "
        f"dropped: {counters.dropped_examples} late rewards: {counters.late_rewards}"
    )
    return 0 if identical and conserved else EXIT_FAILURE


# ------------------------------------------
# Simulation
# ------------------------------------------


def _params(max_examples: int, max_wait: float, refresh_secs: float) -> PipelineParams:
    return PipelineParams(
        flush_policy=FlushPolicy(max_examples=max_examples, max_wait=max_wait),
        refresh_period=refresh_secs,
    )


simulation_options = [
    click.option("--config", "config_path", type=json_file, required=True, help="Config JSON."),
    click.option("--env", "env_path", type=json_file, required=True, help="Environment JSON."),
    click.option("--horizon", type=int, default=10_000, show_default=True, help="Decisions."),
    click.option("--max-examples", type=int, default=100, show_default=True, help="Batch size."),
    click.option(
        "--max-wait", type=float, default=60.0, show_default=True, help="Steps a batch may wait."
    ),
    click.option(
        "--refresh-secs", type=float, default=10.0, show_default=True, help="Steps per refresh."
    ),
]


def _with_options(options: List[Any]) -> Any:
    def decorate(f: Any) -> Any:
        for option in reversed(options):
            f = option(f)
        return f

    return decorate


@main.command()
@_with_options(simulation_options)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed of the run.")
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Report directory  [default: <data-dir>/reports/<bandit_id>-<seed>]",
)
@click.option("--plot/--no-plot", default=False, show_default=True, help="Write SVG plots.")
@click.option("--ab-control", default=None, help="Freeze, then A/B test against this arm.")
@click.option(
    "--ab-horizon", type=int, default=20_000, show_default=True, help="A/B decisions."
)
@click.pass_obj
def simulate(
    data_dir: Path,
    config_path: Path,
    env_path: Path,
    horizon: int,
    max_examples: int,
    max_wait: float,
    refresh_secs: float,
    seed: int,
    out: Optional[Path],
    plot: bool,
    ab_control: Optional[str],
    ab_horizon: int,
) -> None:
    """Run a bandit against a synthetic environment through the whole platform."""
    config = parse_config(_load_json(config_path))
    env = load_environment(_load_json(env_path))
    out = out or data_dir / "reports" / f"{config.bandit_id}-{seed}"
    params = _params(max_examples, max_wait, refresh_secs)
    with Simulation(config, env, seed, params, data_dir) as simulation:
        report = simulation.run(horizon)
        write_report(report, out / "report.json")
        click.echo(
            f"regret {report.final_regret:.4f} "
            f"best-arm fraction {report.best_arm_fraction:.4f} "
            f"batches {report.counters['batches']}"
        )
        if plot:
            write_plots(report, out)
        if ab_control is not None:
            simulation.freeze()
            control: Any = ab_control.split(",") if config.algorithm.is_ranking else ab_control
            ab = simulation.ab_test(control, ab_horizon)
            write_report(ab, out / "ab.json")
            click.echo(
                f"uplift {ab.uplift:.4f} [{ab.ci_low:.4f}, {ab.ci_high:.4f}] p={ab.p_value:.3g}"
            )


@main.command("sweep")
@_with_options(simulation_options)
@click.option("--grid", "grid_path", type=json_file, required=True, help="Grid JSON.")
@click.option("--seeds", type=int, default=1, show_default=True, help="Seeds 0..N-1 per point.")
@click.option("--jobs", type=int, default=1, show_default=True, help="Parallel runs.")
@click.option(
    "--out",
    type=click.Path(file_okay=False, path_type=Path),
    default=None,
    help="Results directory  [default: <data-dir>/reports/sweep]",
)
@click.pass_obj
def sweep_command(
    data_dir: Path,
    config_path: Path,
    env_path: Path,
    horizon: int,
    max_examples: int,
    max_wait: float,
    refresh_secs: float,
    grid_path: Path,
    seeds: int,
    jobs: int,
    out: Optional[Path],
) -> None:
    """Run a simulation for every grid point and seed and tabulate the results."""
    config = parse_config(_load_json(config_path))
    env = load_environment(_load_json(env_path))
    grid = _load_json(grid_path)
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise click.BadParameter("grid must map parameter names to lists", param_hint="--grid")
    out = out or data_dir / "reports" / "sweep"
    params = _params(max_examples, max_wait, refresh_secs)
    runs = sweep(config, env, grid, list(range(seeds)), horizon, params, n_jobs=jobs)
    for index, run in enumerate(runs):
        write_report(run, out / "runs" / f"{index:04d}.json")
    table = results_table(runs)
    out.mkdir(parents=True, exist_ok=True)
    table.to_csv(out / "results.csv", index=False)
    click.echo(table.to_string(index=False))


if __name__ == "__main__":
    main()  # pragma: no cover
