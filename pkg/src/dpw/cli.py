"""Operator command line.

Machine-readable JSON goes to stdout; diagnostics go to stderr. Exit codes:
0 success, 1 validation or usage error, 2 I/O error (unreadable config,
fixtures, or silo files).
"""

from __future__ import annotations

import sys
from datetime import date
from pathlib import Path
from typing import Any, Optional

import click

from . import sustainability
from .bots import BotEngine
from .config import AppConfig, load_config
from .errors import DpwError, ImportJobError, ValidationError
from .ingestion import import_source, seed_master_data
from .records import camelize, canonical_json, to_record
from .store import Store, export_table
from .units import utc_now


def _out(payload: Any) -> None:
    click.echo(canonical_json(payload))


def _diag(message: str) -> None:
    click.echo(message, err=True)


def _load(ctx: click.Context) -> tuple[AppConfig, Store]:
    config_path = Path(ctx.obj["config_path"])
    config = load_config(config_path)
    if config.store_path.exists():
        store = Store.load(config.store_path)
        store.source_priority = list(config.source_priority)
    else:
        store = Store(source_priority=config.source_priority)
        _diag(f"new store at {config.store_path}")
    return config, store


def _default_user(store: Store) -> str:
    users = store.list("user")
    if not users:
        raise ValidationError("no users in store; seed master data first")
    return users[0].id


@click.group()
@click.option(
    "--config",
    "config_path",
    envvar="DPW_CONFIG",
    default="dpw.json",
    show_default=True,
    help="Path to dpw.json (or set DPW_CONFIG).",
)
@click.pass_context
def cli(ctx: click.Context, config_path: str) -> None:
    """Digital procurement workspace admin tool."""
    ctx.ensure_object(dict)
    ctx.obj["config_path"] = config_path


@cli.command()
@click.option("--fixtures", "fixtures_dir", required=True, type=click.Path(), help="Fixture directory.")
@click.pass_context
def seed(ctx: click.Context, fixtures_dir: str) -> None:
    """Load master data (users, materials, groups, processes, tasks)."""
    config, store = _load(ctx)
    fixtures = Path(fixtures_dir)
    if not fixtures.is_dir():
        raise ImportJobError(f"fixtures directory {fixtures} does not exist", io=True)
    counts = seed_master_data(store, fixtures)
    store.save(config.store_path)
    _out({"seeded": counts, "stateHash": store.state_hash()})


@cli.command(name="import")
@click.option("--source", "source_id", default=None, help="Import a single configured source.")
@click.option("--all", "import_all", is_flag=True, default=False, help="Import every configured source.")
@click.pass_context
def import_cmd(ctx: click.Context, source_id: Optional[str], import_all: bool) -> None:
    """Run import jobs; one ImportReport JSON line per source."""
    if bool(source_id) == import_all:
        raise click.UsageError("pass exactly one of --source <id> or --all")
    config, store = _load(ctx)
    sources = config.sources if import_all else (config.source_by_id(source_id),)
    if not sources:
        raise ValidationError("no sources configured")
    for source in sources:
        report = import_source(store, source, base_dir=config.base_dir)
        _out(camelize(to_record(report)))
    store.save(config.store_path)
    _diag(f"stateHash: {store.state_hash()}")


def _score_subject(
    store: Store, supplier_id: Optional[str], rfq_id: Optional[str], chain: bool
) -> sustainability.SustainabilityScore:
    if supplier_id:
        if chain:
            return sustainability.score_supplier_chain(store, supplier_id, computed_at=utc_now())
        return sustainability.score_supplier(store, supplier_id, computed_at=utc_now())
    rfq = store.require("rfq", rfq_id)
    return sustainability.score_rfq(store, rfq, computed_at=utc_now())


@cli.command()
@click.option("--supplier", "supplier_id", default=None)
@click.option("--rfq", "rfq_id", default=None)
@click.option("--chain", is_flag=True, default=False, help="Aggregate over the sub-supplier chain.")
@click.pass_context
def score(ctx: click.Context, supplier_id: Optional[str], rfq_id: Optional[str], chain: bool) -> None:
    """Compute a sustainability score and record a snapshot."""
    if bool(supplier_id) == bool(rfq_id):
        raise click.UsageError("pass exactly one of --supplier <id> or --rfq <id>")
    if chain and rfq_id:
        raise click.UsageError("--chain applies to --supplier only")
    config, store = _load(ctx)
    result = _score_subject(store, supplier_id, rfq_id, chain)
    store.append_operational("score_snapshot", to_record(result))
    store.save(config.store_path)
    _out(camelize(to_record(result)))


@cli.group()
def bot() -> None:
    """Trigger and review automation bots."""


@bot.command(name="run")
@click.argument("bot_id")
@click.option("--dry-run", is_flag=True, default=False, help="Compute proposals without recording a run.")
@click.option("--user", "user_id", default=None, help="Acting user id (default: first user).")
@click.option("--param", "params", multiple=True, help="Bot parameter as key=value; repeatable.")
@click.pass_context
def bot_run(
    ctx: click.Context, bot_id: str, dry_run: bool, user_id: Optional[str], params: tuple[str, ...]
) -> None:
    """Execute one bot; proposals wait for human approval."""
    config, store = _load(ctx)
    parsed: dict[str, str] = {}
    for item in params:
        if "=" not in item:
            raise click.UsageError(f"--param needs key=value, got {item!r}")
        key, _, value = item.partition("=")
        parsed[key.strip()] = value.strip()
    engine = BotEngine(store, config.bundle_policy, config.negotiation_policy)
    run = engine.execute(bot_id, parsed, triggered_by=user_id or _default_user(store), dry_run=dry_run)
    if not dry_run:
        store.save(config.store_path)
    payload = camelize(to_record(run))
    payload["dryRun"] = dry_run
    _out(payload)


@bot.command(name="approve")
@click.argument("run_id")
@click.option("--user", "user_id", default=None, help="Approving user id (default: first user).")
@click.pass_context
def bot_approve(ctx: click.Context, run_id: str, user_id: Optional[str]) -> None:
    """Approve a proposed run and apply its effects atomically."""
    config, store = _load(ctx)
    engine = BotEngine(store, config.bundle_policy, config.negotiation_policy)
    run = engine.approve(run_id, approved_by=user_id or _default_user(store))
    store.save(config.store_path)
    _out(camelize(to_record(run)))


@cli.group()
def report() -> None:
    """Emit aggregated reports."""


@report.command(name="co2")
@click.option("--period", "year", required=True, type=int, help="Calendar year.")
@click.option(
    "--format", "fmt", type=click.Choice(["csv", "json"]), default="json", show_default=True
)
@click.pass_context
def report_co2(ctx: click.Context, year: int, fmt: str) -> None:
    """Per-supplier CO2e for one calendar year; suppliers without emission
    data are left out of rows and total alike."""
    config, store = _load(ctx)
    date_range = (date(year, 1, 1), date(year, 12, 31))
    rows = []
    total = None
    for supplier in store.list("supplier"):
        try:
            result = sustainability.score_supplier(store, supplier.id, date_range)
        except DpwError as exc:
            if exc.code != "stage_unavailable":
                raise
            continue
        rows.append(
            {"supplierId": supplier.id, "stage": result.stage, "valueTCO2e": str(result.value_tco2e)}
        )
        total = result.value_tco2e if total is None else total + result.value_tco2e
    if fmt == "json":
        _out({"period": year, "rows": rows, "totalTCO2e": str(total) if total is not None else "0"})
    else:
        sys.stdout.buffer.write(export_table(rows, ("supplierId", "stage", "valueTCO2e")))
        sys.stdout.buffer.flush()


@cli.command()
@click.option("--host", default=None, help="Bind host (default from config).")
@click.option("--port", default=None, type=int, help="Bind port (default from config).")
@click.pass_context
def serve(ctx: click.Context, host: Optional[str], port: Optional[int]) -> None:
    """Run the HTTP API."""
    import uvicorn

    from .api import create_app

    config, store = _load(ctx)
    bind_host, _, bind_port = config.server.bind.partition(":")
    app = create_app(store=store, config=config)
    uvicorn.run(app, host=host or bind_host or "127.0.0.1", port=port or int(bind_port or 8765))


def main(argv: Optional[list[str]] = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False, obj={})
        return 0
    except click.exceptions.Abort:
        _diag("aborted")
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except DpwError as exc:
        _diag(canonical_json(exc.to_payload()))
        return 2 if exc.details.get("io") else 1
    except OSError as exc:
        _diag(f"I/O error: {exc}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
