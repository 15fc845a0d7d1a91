"""Command-line entry point.

Thin wrapper over the package: `serve` runs the HTTP service (optionally
driving a scripted classroom simulation), the remaining subcommands run the
offline pipelines directly. Exit codes: 0 ok, 1 validation error, 2 runtime
error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path

from .errors import SeatcheckError, ValidationError
from .refstats import (
    DEFAULT_SCHEMAS,
    DatasetKind,
    DatasetSchema,
    RowError,
    build_reference_table,
    filter_and_merge,
    gender_gap_percent,
    ingest_dataset,
    table_from_csv,
    table_to_csv,
)
from .roster import RosterStore
from .session import ATTENDANCE_CSV, read_attendance
from .sim import DeviceSim, VirtualClock, load_scenario
from .wire import encode

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seatcheck",
        description="RFID + seat-weight attendance service and tooling",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--roster-dir", required=True)
    serve.add_argument("--data-dir", default=None, help="where attendance.csv lives")
    serve.add_argument("--scenario", default=None, help="scripted classroom to drive")
    serve.add_argument("--seed", type=int, default=None, help="override scenario seed")
    serve.add_argument("--table", default=None, help="reference table csv")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument(
        "--pace-hz",
        type=float,
        default=10.0,
        help="wall-clock ticks per second for the scripted simulation",
    )

    stats = sub.add_parser("stats", help="reference statistics pipeline")
    stats_sub = stats.add_subparsers(dest="stats_command", required=True)
    build = stats_sub.add_parser("build", help="build the reference table from CSVs")
    build.add_argument(
        "--in", dest="inputs", required=True, help="comma-separated dataset files"
    )
    build.add_argument("--out", required=True, help="output reference table csv")
    build.add_argument(
        "--kinds",
        default=None,
        help="comma-separated dataset kinds (gym,obesity,medical); default: sniff headers",
    )
    gap = stats_sub.add_parser("gap", help="male/female mean gap at an age")
    gap.add_argument("--age", type=int, required=True)
    gap.add_argument("--table", default="table.csv")

    sim = sub.add_parser("sim", help="classroom simulator")
    sim_sub = sim.add_subparsers(dest="sim_command", required=True)
    run = sim_sub.add_parser("run", help="run a scenario without a host")
    run.add_argument("--scenario", required=True)
    run.add_argument("--until", type=int, required=True, help="virtual time, ms")
    run.add_argument("--dump-frames", action="store_true")

    report = sub.add_parser("report", help="attendance rows for one course")
    report.add_argument("--course", required=True)
    report.add_argument("--data-dir", default=".")

    validate = sub.add_parser("validate", help="check roster files")
    validate.add_argument("--roster-dir", required=True)

    return parser


_KIND_ALIASES = {
    "gym": DatasetKind.GYM_MEMBERS,
    "obesity": DatasetKind.OBESITY_CLASSIFICATION,
    "medical": DatasetKind.MEDICAL_COST,
}


def sniff_schema(path: Path) -> DatasetSchema:
    """Pick the dataset schema whose mapped columns all appear in the header."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
    header = next(csv.reader(io.StringIO(header_line)), [])
    for schema in DEFAULT_SCHEMAS.values():
        if all(
            column in header
            for column in (schema.age_column, schema.gender_column, schema.value_column)
        ):
            return schema
    raise ValidationError(f"{path.name}: header matches no known dataset layout")


def _cmd_stats_build(args: argparse.Namespace) -> int:
    paths = [Path(p.strip()) for p in args.inputs.split(",") if p.strip()]
    if not paths:
        raise ValidationError("--in needs at least one file")
    schemas: list[DatasetSchema] = []
    if args.kinds:
        kinds = [k.strip().lower() for k in args.kinds.split(",")]
        if len(kinds) != len(paths):
            raise ValidationError("--kinds count must match --in count")
        for kind in kinds:
            if kind not in _KIND_ALIASES:
                raise ValidationError(f"unknown dataset kind {kind!r}")
            schemas.append(DEFAULT_SCHEMAS[_KIND_ALIASES[kind]])
    else:
        schemas = [sniff_schema(path) for path in paths]

    batches = []
    total_skipped = 0
    for path, schema in zip(paths, schemas):
        row_errors: list[RowError] = []
        with open(path, encoding="utf-8") as fh:
            batch = ingest_dataset(fh, schema, row_errors)
        total_skipped += len(row_errors)
        batches.append(batch)
        print(
            f"{path.name}: {len(batch)} rows ({schema.kind.value}), "
            f"{len(row_errors)} skipped",
            file=sys.stderr,
        )

    sample = filter_and_merge(batches)
    table = build_reference_table(sample)
    Path(args.out).write_text(table_to_csv(table), encoding="utf-8")
    print(
        f"kept {table.total_count} records "
        f"(male {table.male_count}, female {table.female_count}); wrote {args.out}"
    )
    return EXIT_OK


def _cmd_stats_gap(args: argparse.Namespace) -> int:
    table = table_from_csv(Path(args.table).read_text(encoding="utf-8"))
    gap = gender_gap_percent(table, args.age)
    print(f"age {args.age}: male mean is {gap:.1f}% above female mean")
    return EXIT_OK


def _cmd_sim_run(args: argparse.Namespace) -> int:
    scenario = load_scenario(Path(args.scenario))
    device = DeviceSim(scenario)
    clock = VirtualClock()
    frames = device.run_to(clock, args.until)
    if args.dump_frames:
        for frame in frames:
            sys.stdout.write(encode(frame).decode("ascii"))
    print(f"ran to {args.until} ms: {len(frames)} frames", file=sys.stderr)
    return EXIT_OK


def _cmd_report(args: argparse.Namespace) -> int:
    records = read_attendance(Path(args.data_dir) / ATTENDANCE_CSV)
    rows = sorted(
        (r for r in records if r.course_id == args.course), key=lambda r: r.timestamp
    )
    print("timestamp,course_id,uid,status")
    for record in rows:
        print(",".join(record.csv_row()))
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    store = RosterStore.load(args.roster_dir)
    print(
        f"ok: {len(store.students)} students, {len(store.courses)} courses, "
        f"{len(store.enrollments)} enrollments"
    )
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(
        roster_dir=args.roster_dir,
        data_dir=args.data_dir,
        scenario_path=args.scenario,
        seed=args.seed,
        table_path=args.table,
        pace_hz=args.pace_hz,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "serve":
            return _cmd_serve(args)
        if args.command == "stats" and args.stats_command == "build":
            return _cmd_stats_build(args)
        if args.command == "stats" and args.stats_command == "gap":
            return _cmd_stats_gap(args)
        if args.command == "sim" and args.sim_command == "run":
            return _cmd_sim_run(args)
        if args.command == "report":
            return _cmd_report(args)
        if args.command == "validate":
            return _cmd_validate(args)
        raise ValidationError(f"unknown command {args.command!r}")
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SeatcheckError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
