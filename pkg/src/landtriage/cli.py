"""Operator command line.

Every subcommand maps onto one engine/service operation against a local
data directory (LANDTRIAGE_DATA_DIR or --data-dir). Exit codes: 0 ok,
1 internal error, 2 usage or not found, 3 validation/conflict.
"""

from __future__ import annotations

import csv
import functools
import json
import sys
from pathlib import Path

import click

from . import analytics, fixtures
from .engine import DATA_DIR_ENV, Engine, ServiceConfig
from .errors import ConflictError, LandTriageError, NotFoundError, ValidationError
from .simulate import SimulationParams, parse_tpr_curve, simulate

EXIT_INTERNAL = 1
EXIT_NOT_FOUND = 2
EXIT_VALIDATION = 3


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NotFoundError as exc:
            click.echo(f"error: {exc.message}", err=True)
            sys.exit(EXIT_NOT_FOUND)
        except (ValidationError, ConflictError) as exc:
            click.echo(f"error: {exc.message}", err=True)
            sys.exit(EXIT_VALIDATION)
        except LandTriageError as exc:
            click.echo(f"error: {exc.message}", err=True)
            sys.exit(EXIT_INTERNAL)
    return wrapper


def _open_engine(ctx) -> Engine:
    config_path = ctx.obj.get("config")
    config = ServiceConfig.from_file(config_path) if config_path else ServiceConfig()
    config.fsync = True
    return Engine.open(ctx.obj["data_dir"], config=config)


@click.group()
@click.option("--data-dir", envvar=DATA_DIR_ENV, default="landtriage-data",
              show_default=True, help="Event log directory.")
@click.option("--config", type=click.Path(exists=True, dir_okay=False),
              default=None, help="JSON config file.")
@click.pass_context
def cli(ctx, data_dir, config):
    """Triage and dispatch for satellite-detected winter manure spreading."""
    ctx.ensure_object(dict)
    ctx.obj["data_dir"] = Path(data_dir)
    ctx.obj["config"] = config


@cli.command()
@click.option("--facilities", "facilities_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--fields", "fields_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--verifiers", "verifiers_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def ingest(ctx, facilities_path, fields_path, verifiers_path):
    """Load the facility, field, and verifier registries."""
    engine = _open_engine(ctx)
    summary = engine.load_registry(
        json.loads(Path(facilities_path).read_text()),
        json.loads(Path(fields_path).read_text()),
        json.loads(Path(verifiers_path).read_text()))
    click.echo(json.dumps(summary))


@cli.group()
def run():
    """Model run registration."""


@run.command("add")
@click.option("--id", "run_id", required=True)
@click.option("--imagery-date", required=True)
@click.option("--dispatched", required=True)
@click.pass_context
@handle_errors
def run_add(ctx, run_id, imagery_date, dispatched):
    """Register a model run."""
    engine = _open_engine(ctx)
    out = engine.register_run(run_id, imagery_date, dispatched)
    click.echo(json.dumps(out))


@cli.group()
def detections():
    """Detection batches."""


@detections.command("add")
@click.option("--run", "run_id", required=True)
@click.option("--file", "path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def detections_add(ctx, run_id, path):
    """Ingest a line-delimited JSON detection file."""
    engine = _open_engine(ctx)
    result = engine.ingest_detections(run_id, Path(path).read_text())
    click.echo(json.dumps(result.to_dict()))


@cli.command()
@click.option("--run", "run_id", required=True)
@click.option("--org", required=True, type=click.Choice(["wdnr", "elpc"]))
@click.pass_context
@handle_errors
def route(ctx, run_id, org):
    """Route a run through an organization protocol."""
    engine = _open_engine(ctx)
    if org == "wdnr":
        items = engine.route_wdnr(run_id)
        click.echo(json.dumps({"org": org, "queued": len(items),
                               "detections": [i.detection_id for i in items]}))
    else:
        assignments = engine.route_elpc(run_id)
        click.echo(json.dumps({"org": org, "assigned": len(assignments),
                               "assignments": [a.assignment_id for a in assignments]}))


@cli.command()
@click.option("--detection", "detection_id", required=True)
@click.option("--decision", required=True, type=click.Choice(["accept", "reject"]))
@click.option("--reason", default=None)
@click.option("--note", default="")
@click.pass_context
@handle_errors
def screen(ctx, detection_id, decision, reason, note):
    """Record a desk-screening decision."""
    engine = _open_engine(ctx)
    item, assignment = engine.record_screening(detection_id, decision,
                                               reason=reason, note=note)
    out = item.to_dict()
    out["assignment"] = assignment.to_dict() if assignment else None
    click.echo(json.dumps(out))


@cli.command()
@click.option("--file", "path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def respond(ctx, path):
    """Bulk-import field responses from CSV."""
    engine = _open_engine(ctx)
    click.echo(json.dumps(engine.import_responses_csv(Path(path).read_text())))


@cli.group()
def incidentals():
    """Incidental (off-pipeline) spreading reports."""


@incidentals.command("add")
@click.option("--file", "path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@handle_errors
def incidentals_add(ctx, path):
    """Import incidental reports from a line-delimited JSON file."""
    engine = _open_engine(ctx)
    count = 0
    for line in Path(path).read_text().splitlines():
        if line.strip():
            engine.report_incidental(json.loads(line))
            count += 1
    click.echo(json.dumps({"reported": count}))


REPORT_ALIASES = {
    "confirmation": "confirmation_by_bucket",
    "lift": "lift",
    "agreement": "agreement",
    "compliance": "compliance",
    "process": "process",
    "groups": "group_comparison",
    "crosstab": "confidence_crosstab",
    "incidentals": "incidentals",
}


def _report_payload(engine, name, org, screened_only, total_images, score_floor):
    if name == "confirmation_by_bucket":
        return analytics.confirmation_by_bucket(engine, org or "elpc",
                                                screened_only).to_dict()
    if name == "lift":
        if total_images is None:
            raise ValidationError("lift needs --total-images", code="missing_field",
                                  field="total_images")
        totals = analytics.trial_totals(engine, org or "wdnr")
        top = analytics.pooled_rate(engine, org or "wdnr", 0.8) or 0.0
        return analytics.lift_metrics(total_images, totals["sent"],
                                      totals["confirmed"], top).to_dict()
    if name == "agreement":
        return analytics.agreement_table(engine).to_dict()
    if name == "compliance":
        return analytics.compliance_breakdown(engine).to_dict()
    if name == "process":
        return analytics.process_metrics(engine, org or "elpc").to_dict()
    if name == "group_comparison":
        return analytics.group_comparison(engine).to_dict()
    if name == "confidence_crosstab":
        return analytics.reporter_confidence_crosstab(engine).to_dict()
    breakdown = engine.incidental_breakdown(score_floor)
    return breakdown.to_dict()


def _report_csv_rows(name, payload) -> tuple[list[str], list[list]]:
    if name == "confirmation_by_bucket":
        header = ["bucket", "n_sent", "n_followed", "n_confirmed", "rate", "ci_low", "ci_high"]
        rows = [[b["label"], b["n_sent"], b["n_followed"], b["n_confirmed"],
                 b["rate"], b["ci_low"], b["ci_high"]] for b in payload["buckets"]]
    elif name == "process":
        header = ["bucket", "n_sent", "n_followed", "rate"]
        rows = [[b["label"], b["n_sent"], b["n_followed"], b["rate"]]
                for b in payload["followup_rate_by_bucket"]]
    elif name == "compliance":
        header = ["category", "count"]
        rows = [[k, v] for k, v in payload["counts"].items()]
    elif name == "agreement":
        header = ["cell", "n", "elpc_rate", "wdnr_rate"]
        cells = payload["cells"]
        rows = [[key, cell["n"], cell.get("elpc_rate"), cell.get("wdnr_rate")]
                for key, cell in cells.items()]
    elif name == "group_comparison":
        header = ["group", "n", "metric", "mean", "ci_half"]
        rows = []
        for group, summary in payload["groups"].items():
            for metric, vals in summary["metrics"].items():
                rows.append([group, summary["n"], metric, vals["mean"], vals["ci_half"]])
    elif name == "confidence_crosstab":
        header = ["confidence"] + payload["buckets"]
        rows = [[level] + counts for level, counts in payload["rows"].items()]
    elif name == "incidentals":
        header = ["category", "count"]
        rows = [[k, v] for k, v in payload["counts"].items()]
    else:  # lift
        header = list(payload.keys())
        rows = [[payload[k] for k in header]]
    return header, rows


def _print_table(header: list[str], rows: list[list]) -> None:
    cells = [[("" if v is None else str(v)) for v in row] for row in rows]
    widths = [max(len(header[i]), *(len(r[i]) for r in cells)) if cells else len(header[i])
              for i in range(len(header))]
    click.echo("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for row in cells:
        click.echo("  ".join(c.ljust(w) for c, w in zip(row, widths)))


@cli.command()
@click.argument("name", type=click.Choice(sorted(REPORT_ALIASES)))
@click.option("--org", default=None, type=click.Choice(["elpc", "wdnr"]))
@click.option("--screened-only", is_flag=True, default=False)
@click.option("--total-images", type=int, default=None)
@click.option("--score-floor", type=float, default=None)
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), default=None,
              help="Also write the report as CSV.")
@click.option("--json", "as_json", is_flag=True, default=False,
              help="Print raw report JSON.")
@click.pass_context
@handle_errors
def report(ctx, name, org, screened_only, total_images, score_floor, csv_path, as_json):
    """Print a trial report as an aligned table (or JSON with --json)."""
    engine = _open_engine(ctx)
    canonical = REPORT_ALIASES[name]
    payload = _report_payload(engine, canonical, org, screened_only,
                              total_images, score_floor)
    if csv_path:
        header, rows = _report_csv_rows(canonical, payload)
        with open(csv_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
        return
    header, rows = _report_csv_rows(canonical, payload)
    _print_table(header, rows)
    if canonical == "compliance":
        click.echo(f"confirmed: {payload['confirmed']}  "
                   f"share_noncompliant: {payload['share_noncompliant']}  "
                   f"share_cracks: {payload['share_cracks']}  "
                   f"share_afo_post_window: {payload['share_afo_post_window']}")
    if canonical == "process":
        click.echo(f"visibility_rate: {payload['visibility_rate']}  "
                   f"latency_p_le_1: {payload['latency_p_le_1']}  "
                   f"latency_max: {payload['latency_max']}")


@cli.command("simulate")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--facilities", type=int, default=24, show_default=True)
@click.option("--runs", type=int, default=6, show_default=True)
@click.option("--verifiers", type=int, default=8, show_default=True)
@click.option("--detections-per-run", type=int, default=40, show_default=True)
@click.option("--tpr-curve", default="0.0:0.01,0.5:0.08,0.8:0.35,1.0:0.5",
              show_default=True, help="score:rate anchors, comma separated.")
@handle_errors
def simulate_cmd(seed, facilities, runs, verifiers, detections_per_run, tpr_curve):
    """Run a seeded synthetic season in memory and print its summary."""
    params = SimulationParams(seed=seed, n_facilities=facilities, n_runs=runs,
                              n_verifiers=verifiers,
                              detections_per_run=detections_per_run,
                              tpr_curve=parse_tpr_curve(tpr_curve))
    result = simulate(params)
    click.echo(json.dumps(result.summary, sort_keys=True))


@cli.command()
@click.pass_context
@handle_errors
def fixture(ctx):
    """Materialize the bundled trial fixture into the data directory."""
    data_dir = ctx.obj["data_dir"]
    events = data_dir / "events.jsonl"
    if events.exists() and events.stat().st_size > 0:
        raise ValidationError(f"data dir {data_dir} already has an event log",
                              code="data_dir_not_empty", field="data_dir")
    engine = fixtures.build_trial_engine(data_dir)
    click.echo(json.dumps({"data_dir": str(data_dir),
                           "events": engine.last_seq,
                           "state_digest": engine.state_digest()}))


@cli.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8420, show_default=True)
@click.pass_context
@handle_errors
def serve(ctx, host, port):
    """Serve the HTTP API over the data directory."""
    import uvicorn

    from .service import create_app

    engine = _open_engine(ctx)
    uvicorn.run(create_app(engine), host=host, port=port, log_level="warning")


def main():
    cli(obj={})


if __name__ == "__main__":
    main()
