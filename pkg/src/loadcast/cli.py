"""Command line interface.

Subcommands wrap the same service layer as the HTTP API; with --json each
prints exactly the bytes the corresponding endpoint would return.  Exit code
0 means success, 1 a rejected input (bad data, unknown country, not enough
data), 2 an internal failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

from . import api, evaluation, figures, quality
from .config import load_config, with_data_dir
from .errors import InvalidInputError, LoadcastError
from .series import SOURCES, TOTAL_LOAD, parse_timestamp
from .service import Service, error_payload, evaluation_doc
from .store import DocumentStore

EXIT_CODES = {"invalid_input": 1, "not_found": 1, "insufficient_data": 1, "internal": 2}


def _service(args) -> Service:
    config = with_data_dir(load_config(args.config), args.data_dir)
    return Service(store=DocumentStore(config.data_dir), config=config)


def _emit(payload) -> None:
    sys.stdout.write(api.to_json(payload).decode("utf-8"))


def cmd_ingest(args) -> int:
    service = _service(args)
    try:
        data = Path(args.file).read_bytes()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {args.file}: {exc.strerror}") from None
    _emit(service.ingest_csv(args.country, data, source=args.source))
    return 0


def cmd_audit(args) -> int:
    service = _service(args)
    reports = service.quality_reports(args.from_, args.to)
    if args.json:
        _emit([report.to_doc() for report in reports])
    else:
        sys.stdout.write(quality.render_report(reports))
    return 0


def cmd_train(args) -> int:
    service = _service(args)
    if args.deciles:
        from dataclasses import replace

        service = Service(store=service.store,
                          config=replace(service.config, deciles=True))
    _emit(service.rebuild(args.country))
    return 0


def cmd_forecast(args) -> int:
    service = _service(args)
    now = parse_timestamp(args.now) if args.now else None
    _emit(service.issue_forecast(args.country, now=now))
    return 0


def cmd_serve(args) -> int:
    service = _service(args)
    api.serve(service, host=args.host, port=args.port)
    return 0


def _write_delimited(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        writer.writerows(rows)


def _write_report_files(bundle: dict, doc: dict, out_dir: Path,
                        with_figures: bool) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    result = bundle["result"]
    comparison = bundle["comparison"]
    horizons = bundle["horizon_table"]
    country = result.country
    written = []

    path = out_dir / "evaluation.json"
    path.write_bytes(api.to_json(doc))
    written.append(path)

    months = sorted(result.monthly)
    if comparison is not None:
        months = list(comparison.columns)
    rows = []
    for month in months:
        model = result.monthly.get(month)
        bench = (bundle["benchmark"].monthly.get(month)
                 if bundle["benchmark"] is not None else None)
        delta = model - bench if model is not None and bench is not None else None
        rows.append([month,
                     "" if model is None else f"{model:.3f}",
                     "" if bench is None else f"{bench:.3f}",
                     "" if delta is None else f"{delta:+.3f}"])
    path = out_dir / "monthly_mape.csv"
    _write_delimited(path, ["month", "model", "benchmark", "delta"], rows)
    written.append(path)

    path = out_dir / "horizon_mape.csv"
    _write_delimited(path, ["horizon", "mape"],
                     [[h, "" if horizons.rows[h].get(country) is None
                       else f"{horizons.rows[h][country]:.3f}"]
                      for h in horizons.horizons])
    written.append(path)

    path = out_dir / "error_stats.csv"
    _write_delimited(path, ["stat", "value"],
                     [[key, f"{result.stats[key]:.6f}"] for key in evaluation.STAT_KEYS])
    written.append(path)

    path = out_dir / "error_histogram.csv"
    _write_delimited(path, ["bin", "count"],
                     [[doc_["bin"], doc_["count"]] for doc_ in bundle["histogram"]])
    written.append(path)

    if with_figures:
        written.append(figures.render_error_histogram(
            bundle["histogram"], out_dir / "error_histogram.png",
            title=f"Absolute percentage errors, {country}"))
        written.append(figures.render_horizon_curve(
            horizons, out_dir / "horizon_mape.png",
            title=f"MAPE by horizon, {country}"))
        if comparison is not None:
            written.append(figures.render_monthly_comparison(
                comparison, country, out_dir / "monthly_mape.png"))
        if result.pinball_by_quantile:
            written.append(figures.render_pinball_by_quantile(
                result.pinball_by_quantile, out_dir / "pinball_by_quantile.png",
                title=f"Pinball loss by quantile, {country}"))
    return written


def cmd_evaluate(args) -> int:
    service = _service(args)
    if args.horizon == "all":
        horizon = None
    else:
        try:
            horizon = int(args.horizon)
        except ValueError:
            raise InvalidInputError(
                f"--horizon must be 1..24 or 'all', got {args.horizon!r}") from None
    bundle = service.evaluate(args.country, from_=args.from_, to=args.to, horizon=horizon)
    doc = evaluation_doc(bundle)
    if args.json:
        _emit(doc)
        return 0

    result = bundle["result"]
    out = sys.stdout
    label = "all horizons" if horizon is None else f"horizon {horizon}"
    out.write(f"{result.country}: MAPE {result.mape:.3f}% over {result.n_pairs} hours "
              f"({label})\n\n")
    if bundle["comparison"] is not None:
        out.write(evaluation.render_comparison(bundle["comparison"]))
        out.write("\n")
    out.write(evaluation.render_stats_table({result.country: result.stats}))
    out.write("\n")
    out.write(evaluation.render_horizon_table(bundle["horizon_table"]))
    if result.pinball_average is not None:
        levels = ", ".join(str(a) for a in sorted(result.pinball_by_quantile))
        out.write(f"\naverage pinball loss {result.pinball_average:.3f} MW "
                  f"over quantiles {levels}\n")

    out_dir = Path(args.out) if args.out else Path(f"loadcast-eval-{args.country}")
    written = _write_report_files(bundle, doc, out_dir, with_figures=not args.no_figures)
    out.write("\nreport files:\n")
    for path in written:
        out.write(f"  {path}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loadcast",
        description="Electricity load forecasting: ingest, audit, train, forecast, serve.")
    parser.add_argument("--config", metavar="FILE", default=None,
                        help="JSON config file (defaults apply when omitted)")
    parser.add_argument("--data-dir", metavar="DIR", default=None,
                        help="data directory (overrides the config file)")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("ingest", help="parse a load CSV and store/merge the series")
    p.add_argument("file", help="CSV file path")
    p.add_argument("--country", required=True, help="country code the data belongs to")
    p.add_argument("--source", choices=SOURCES, default=TOTAL_LOAD)
    p.set_defaults(handler=cmd_ingest)

    p = commands.add_parser("audit", help="data quality report over a period")
    p.add_argument("--from", dest="from_", required=True, metavar="ISO",
                   help="period start (inclusive), ISO timestamp with zone")
    p.add_argument("--to", required=True, metavar="ISO",
                   help="period end (exclusive)")
    p.add_argument("--json", action="store_true", help="print the API payload instead")
    p.set_defaults(handler=cmd_audit)

    p = commands.add_parser("train", help="rebuild every model for a country")
    p.add_argument("--country", required=True)
    p.add_argument("--deciles", action="store_true",
                   help="also train the nine decile models per horizon")
    p.set_defaults(handler=cmd_train)

    p = commands.add_parser("forecast", help="issue and store a 24-hour forecast batch")
    p.add_argument("--country", required=True)
    p.add_argument("--now", metavar="ISO", default=None,
                   help="issuance time (default: current time)")
    p.set_defaults(handler=cmd_forecast)

    p = commands.add_parser("evaluate",
                            help="back-test stored forecasts and write a report")
    p.add_argument("--country", required=True)
    p.add_argument("--from", dest="from_", metavar="ISO", default=None)
    p.add_argument("--to", metavar="ISO", default=None)
    p.add_argument("--horizon", default="24",
                   help="horizon to score, 1..24 or 'all' (default 24)")
    p.add_argument("--out", metavar="DIR", default=None,
                   help="report directory (default loadcast-eval-<country>)")
    p.add_argument("--no-figures", action="store_true",
                   help="skip PNG rendering, write only delimited files")
    p.add_argument("--json", action="store_true", help="print the evaluation document only")
    p.set_defaults(handler=cmd_evaluate)

    p = commands.add_parser("serve", help="run the HTTP API")
    p.add_argument("--host", default=None)
    p.add_argument("--port", type=int, default=None)
    # accepted after the subcommand too; SUPPRESS keeps the global value
    # when these are not repeated here
    p.add_argument("--config", metavar="FILE", default=argparse.SUPPRESS,
                   help="JSON config file (defaults apply when omitted)")
    p.add_argument("--data-dir", metavar="DIR", default=argparse.SUPPRESS,
                   help="data directory (overrides the config file)")
    p.set_defaults(handler=cmd_serve)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except LoadcastError as exc:
        sys.stderr.write(api.to_json(error_payload(exc)).decode("utf-8"))
        return EXIT_CODES[exc.code]
    except KeyboardInterrupt:
        return 130
    except Exception as exc:  # noqa: BLE001  last-resort mapping to exit code 2
        sys.stderr.write(api.to_json(
            error_payload(LoadcastError(f"internal error: {exc}"))).decode("utf-8"))
        return 2


if __name__ == "__main__":
    sys.exit(main())
