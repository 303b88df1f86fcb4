"""
Command-line interface.

    python -m app.cli simulate --scenario scenarios/missing_inpath_static.json --out log.jsonl
    python -m app.cli detect --scenario F --detector rsr --cost msd --p 0.99 --gamma 0.9
    python -m app.cli bench --corpus scenarios --csv results.csv --p 0.9 --p 0.99
    python -m app.cli epsilon --alpha 0.1 --n 1000

Exit codes: 0 ok, 1 usage, 2 invalid scenario or config, 3 runtime failure.
"""
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import click
from pydantic import ValidationError

from app.core.config import settings
from app.core.database import init_db, session_scope
from app.core.errors import RiskMonitorError, ScenarioSchemaError, ScenarioValidationError
from app.core.logging_config import get_logger, setup_logging
from app.schemas.config import CostMetric, DetectorKind, MonitorConfig
from app.services.benchmark_service import (
    BenchmarkService,
    emit_report,
    outcome_from_log,
    render_csv,
    run_benchmark,
)
from app.services.scenario_service import load_scenario
from app.services.simulator import run_scenario
from app.services.stats import dkw_epsilon

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3

DETECTORS = click.Choice([kind.value for kind in DetectorKind])
COSTS = click.Choice([metric.value for metric in CostMetric])
EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)


def load_config(path: Optional[Path]) -> MonitorConfig:
    """Monitor config from a JSON file; every section has defaults so {} is valid"""
    if path is None:
        return MonitorConfig()
    logger.debug(f"Loading monitor config {path}")
    return MonitorConfig.model_validate_json(path.read_text(encoding="utf-8"))


def with_overrides(config: MonitorConfig, detector: Optional[Dict[str, Any]] = None,
                   cost: Optional[CostMetric] = None, kind: Optional[DetectorKind] = None) -> MonitorConfig:
    """Copy of config with command-line values applied and re-validated"""
    data = config.model_dump(mode="json")
    data["detector"].update({key: value for key, value in (detector or {}).items() if value is not None})
    if cost is not None:
        data["cost"]["metric"] = cost.value
    if kind is not None:
        data["kind"] = kind.value
    if data["kind"] == DetectorKind.COLLISION_PROB.value:
        # the baseline shares the threshold and sample count options
        data["baseline"].update({key: value for key, value in (detector or {}).items()
                                 if key in ("gamma", "n") and value is not None})
    return MonitorConfig.model_validate(data)


@click.group()
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING, ERROR or CRITICAL")
def cli(log_level: Optional[str]):
    """Perception risk monitor: PAC relative scenario risk and its benchmark."""
    setup_logging(log_level)


@cli.command()
@click.option("--scenario", required=True, type=EXISTING_FILE, help="Scenario JSON file")
@click.option("--seed", type=int, default=None, help="Master seed")
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the simulation log here as JSON lines")
@click.option("--config", type=EXISTING_FILE, default=None, help="Monitor config JSON")
@click.option("--detector", type=DETECTORS, default=None)
def simulate(scenario: Path, seed: Optional[int], out: Optional[Path], config: Optional[Path],
             detector: Optional[str]):
    """Simulate a scenario with the monitor in the loop."""
    monitor_config = load_config(config)
    spec = load_scenario(scenario)
    kind = DetectorKind(detector) if detector else None
    log = run_scenario(spec, monitor_config, settings.default_seed if seed is None else seed, kind)
    if out is not None:
        lines = [record.model_dump_json() for record in log.steps]
        out.write_text("\n".join(lines) + "\n", encoding="utf-8")
        logger.info(f"Wrote {len(lines)} steps to {out}")
    outcome = outcome_from_log(log)
    click.echo(
        f"{spec.id}: {len(log.steps)} steps, first alarm {log.first_alarm_time}, "
        f"first collision {outcome.first_collision_time}"
    )


@cli.command()
@click.option("--scenario", required=True, type=EXISTING_FILE, help="Scenario JSON file")
@click.option("--detector", type=DETECTORS, default=None)
@click.option("--cost", type=COSTS, default=None, help="Cost function of the rsr detector")
@click.option("--p", type=float, default=None, help="Risk aversion")
@click.option("--gamma", type=float, default=None, help="Risk threshold")
@click.option("--alpha", type=float, default=None, help="One minus the confidence level")
@click.option("--n", type=int, default=None, help="Samples per scene")
@click.option("--seed", type=int, default=None)
@click.option("--config", type=EXISTING_FILE, default=None, help="Monitor config JSON")
def detect(scenario: Path, detector: Optional[str], cost: Optional[str], p: Optional[float],
           gamma: Optional[float], alpha: Optional[float], n: Optional[int], seed: Optional[int],
           config: Optional[Path]):
    """Run one scenario and print its detection outcome as JSON."""
    kind = DetectorKind(detector) if detector else None
    monitor_config = with_overrides(
        load_config(config),
        detector={"p": p, "gamma": gamma, "alpha": alpha, "n": n},
        cost=CostMetric(cost) if cost else None,
        kind=kind,
    )
    spec = load_scenario(scenario)
    log = run_scenario(spec, monitor_config, settings.default_seed if seed is None else seed)
    click.echo(outcome_from_log(log).model_dump_json(indent=2))


def _sweep(config: MonitorConfig, ps: Sequence[float]) -> List[MonitorConfig]:
    if not ps:
        return [config]
    return [with_overrides(config, detector={"p": p}) for p in ps]


@cli.command()
@click.option("--corpus", type=click.Path(file_okay=False, path_type=Path), default=None,
              help="Scenario directory")
@click.option("--config", type=EXISTING_FILE, default=None, help="Monitor config JSON")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write the metrics table here instead of stdout")
@click.option("--p", "ps", type=float, multiple=True, help="Risk aversion; repeat for a sweep")
@click.option("--detector", type=DETECTORS, default=None)
@click.option("--timing", is_flag=True, help="Add runtime columns")
@click.option("--traces", type=click.Path(dir_okay=False, path_type=Path), default=None,
              help="Write per-step risk traces here as JSON lines")
@click.option("--store", is_flag=True, help="Store each run in the database")
@click.option("--workers", type=click.IntRange(min=1), default=None)
@click.option("--seed", type=int, default=None)
def bench(corpus: Optional[Path], config: Optional[Path], csv_path: Optional[Path], ps: Sequence[float],
          detector: Optional[str], timing: bool, traces: Optional[Path], store: bool,
          workers: Optional[int], seed: Optional[int]):
    """Benchmark a detector over a scenario corpus."""
    kind = DetectorKind(detector) if detector else None
    base = with_overrides(load_config(config), kind=kind)
    if ps and base.kind == DetectorKind.COLLISION_PROB:
        raise click.UsageError("--p applies to the rsr detector only")
    corpus = corpus or Path(settings.corpus_dir)
    workers = workers or settings.bench_workers
    seed = settings.default_seed if seed is None else seed

    results = [run_benchmark(corpus, monitor_config, seed, workers) for monitor_config in _sweep(base, ps)]
    for result in results:
        for failure in result.failures:
            click.echo(f"failed: {failure.scenario_id}: {failure.error}", err=True)

    if csv_path is not None:
        emit_report(results, "csv", csv_path, timing)
    else:
        click.echo(render_csv(results, timing), nl=False)
    if traces is not None:
        emit_report(results, "jsonl", traces)
    if store:
        init_db()
        service = BenchmarkService()
        with session_scope() as db:
            for result in results:
                run = service.save_run(db, result, str(corpus))
                click.echo(f"stored run {run.run_id} ({result.parameters})", err=True)


@cli.command()
@click.option("--alpha", required=True, type=float)
@click.option("--n", required=True, type=int)
def epsilon(alpha: float, n: int):
    """Print the DKW half-width for alpha and n."""
    click.echo(repr(dkw_epsilon(alpha, n)))


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and map failures onto exit codes"""
    try:
        rv = cli.main(args=list(argv) if argv is not None else None, prog_name="risk-monitor",
                      standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("Aborted!", err=True)
        return EXIT_USAGE
    except (ScenarioSchemaError, ScenarioValidationError, ValidationError) as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_VALIDATION
    except RiskMonitorError as e:
        click.echo(f"error: {e}", err=True)
        return EXIT_RUNTIME
    except Exception as e:
        logger.error(f"Unexpected error: {str(e)}", exc_info=True)
        click.echo(f"error: {e}", err=True)
        return EXIT_RUNTIME
    return rv if isinstance(rv, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
