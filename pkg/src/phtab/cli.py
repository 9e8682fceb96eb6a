"""Command-line surface: validate, run, tune, serve, synth.

Input and output files are UTF-8 comma-separated text with a header row. The
``run`` subcommand writes all output files to a temporary directory and
renames it into place, so a failed run leaves nothing behind. ``serve`` hosts
the calibration service for the explorer UI; it imports only the conversion
math and has no code path to any private data.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import NamedTuple, Optional

from . import calibrate, engine, synth
from .accountant import BudgetAllocation
from .records import (
    GeoLevel,
    PersonRecord,
    PopulationGroupLevel,
    RaceEthCode,
    STATE_FIPS_PR,
    STATE_FIPS_US,
    Tenure,
    UnitRecord,
)
from .tables import (
    CodeConfig,
    ConfigError,
    MEASURED_TABLE_IDS,
    build_table_specs,
    load_default_config,
    stability_factor,
)

PERSON_COLUMNS = ("state_id", "mafid", "age", "races", "hispanic", "relationship")
UNIT_COLUMNS = (
    "state_id",
    "mafid",
    "householder_races",
    "householder_hispanic",
    "tenure",
    "household_type",
)
OUTPUT_COLUMNS = (
    "region",
    "geo",
    "iteration",
    "cell_label",
    "noisy_count",
    "variance",
)


class SchemaError(ValueError):
    """Fatal input problem: the run must not proceed."""


class InputBundle(NamedTuple):
    persons_path: Path
    units_path: Path
    config_path: Optional[Path]
    out_dir: Optional[Path]
    region: str = "us"
    seed: Optional[int] = None
    noiseless: bool = False
    unsafe_test_mode: bool = False


@dataclass
class ValidationReport:
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def load_config(path: Optional[Path]) -> dict:
    config = load_default_config()
    if path is None:
        return config
    with open(path, encoding="utf-8") as handle:
        overrides = json.load(handle)
    config.update(overrides)
    return config


def _parse_csv(path: Path, columns: tuple) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None or tuple(reader.fieldnames) != columns:
            raise SchemaError(
                f"{path}: expected columns {','.join(columns)}, "
                f"got {','.join(reader.fieldnames or ())}"
            )
        return list(reader)


def _parse_race(races: str, hispanic: str, where: str) -> RaceEthCode:
    if hispanic not in ("0", "1"):
        raise SchemaError(f"{where}: hispanic flag must be 0 or 1, got {hispanic!r}")
    try:
        return RaceEthCode.from_names(races, hispanic == "1")
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def read_persons(path: Path, codes: CodeConfig, report: ValidationReport, region: str):
    valid_states = set(STATE_FIPS_PR if region == "pr" else STATE_FIPS_US)
    rows = []
    for number, raw in enumerate(_parse_csv(path, PERSON_COLUMNS), start=2):
        where = f"{path}:{number}"
        try:
            if raw["state_id"] not in valid_states:
                raise SchemaError(
                    f"{where}: state {raw['state_id']!r} invalid for region {region}"
                )
            age = int(raw["age"])
            mafid = int(raw["mafid"])
            if age < 0:
                raise SchemaError(f"{where}: age must be >= 0, got {age}")
            if mafid <= 0:
                raise SchemaError(f"{where}: mafid must be positive, got {mafid}")
            if raw["relationship"] not in codes.relationship_codes:
                raise SchemaError(
                    f"{where}: unknown relationship {raw['relationship']!r}"
                )
            race = _parse_race(raw["races"], raw["hispanic"], where)
            rows.append(
                PersonRecord(raw["state_id"], mafid, age, race, raw["relationship"])
            )
        except SchemaError as exc:
            report.errors.append(str(exc))
        except ValueError as exc:
            report.errors.append(f"{where}: {exc}")
    return tuple(rows)


def read_units(path: Path, codes: CodeConfig, report: ValidationReport, region: str):
    valid_states = set(STATE_FIPS_PR if region == "pr" else STATE_FIPS_US)
    tenures = {t.value for t in Tenure}
    rows = []
    seen_mafids: dict[int, int] = {}
    for number, raw in enumerate(_parse_csv(path, UNIT_COLUMNS), start=2):
        where = f"{path}:{number}"
        try:
            if raw["state_id"] not in valid_states:
                raise SchemaError(
                    f"{where}: state {raw['state_id']!r} invalid for region {region}"
                )
            mafid = int(raw["mafid"])
            if mafid <= 0:
                raise SchemaError(f"{where}: mafid must be positive, got {mafid}")
            if raw["tenure"] not in tenures:
                raise SchemaError(f"{where}: unknown tenure {raw['tenure']!r}")
            if raw["household_type"] not in codes.household_type_codes:
                raise SchemaError(
                    f"{where}: unknown household type {raw['household_type']!r}"
                )
            race = _parse_race(
                raw["householder_races"], raw["householder_hispanic"], where
            )
            seen_mafids[mafid] = seen_mafids.get(mafid, 0) + 1
            rows.append(
                UnitRecord(
                    raw["state_id"],
                    mafid,
                    race,
                    Tenure(raw["tenure"]),
                    raw["household_type"],
                )
            )
        except SchemaError as exc:
            report.errors.append(str(exc))
        except ValueError as exc:
            report.errors.append(f"{where}: {exc}")
    duplicates = sorted(m for m, count in seen_mafids.items() if count > 1)
    if duplicates:
        report.warnings.append(
            f"{path}: {len(duplicates)} duplicated unit MAFIDs "
            f"(dropped at join time): {duplicates[:10]}"
        )
    return tuple(rows)


def validate(bundle: InputBundle) -> tuple[ValidationReport, tuple, tuple]:
    """Check schema and internal consistency; schema problems are fatal,
    consistency findings are reported and the run may proceed."""
    report = ValidationReport()
    config = load_config(bundle.config_path)
    codes = CodeConfig(config["code_lists"])
    try:
        persons = read_persons(bundle.persons_path, codes, report, bundle.region)
        units = read_units(bundle.units_path, codes, report, bundle.region)
    except SchemaError as exc:
        report.errors.append(str(exc))
        return report, (), ()
    unit_mafids = {u.mafid for u in units}
    orphans = sorted({p.mafid for p in persons} - unit_mafids)
    if orphans:
        report.warnings.append(
            f"{len(orphans)} person MAFIDs have no unit record "
            f"(excluded by the join): {orphans[:10]}"
        )
    return report, persons, units


def _build_budgets(config: dict, specs: dict, z) -> BudgetAllocation:
    entries = {}
    for table_id, spec in specs.items():
        table_cfg = config["tables"][table_id]
        explicit = table_cfg.get("budgets", {})
        for level in spec.levels:
            if level.key in explicit:
                try:
                    entries[(table_id, level)] = Decimal(str(explicit[level.key]))
                except InvalidOperation as exc:
                    raise ConfigError(
                        f"{table_id}/{level.key}: bad budget "
                        f"{explicit[level.key]!r}"
                    ) from exc
            else:
                moe = table_cfg["moe_targets"][level.key]
                entries[(table_id, level)] = calibrate.round_rho(
                    calibrate.rho_from_moe(moe, stability_factor(spec), z)
                )
    return BudgetAllocation(entries)


def build_run_config(
    config: dict,
    region: str,
    seed: Optional[int],
    noiseless: bool,
    unsafe_test_mode: bool,
) -> engine.RunConfig:
    codes = CodeConfig(config["code_lists"])
    taus = {
        table_id: config["tables"][table_id]["tau"]
        for table_id in MEASURED_TABLE_IDS
        if "tau" in config["tables"][table_id]
    }
    levels_by_table = {
        table_id: tuple(
            PopulationGroupLevel.from_key(key)
            for key in config["tables"][table_id]["levels"]
            if region != "pr"
            or PopulationGroupLevel.from_key(key).geo_level is not GeoLevel.NATION
        )
        for table_id in MEASURED_TABLE_IDS
    }
    specs = build_table_specs(codes, taus, levels_by_table)
    z = calibrate._as_exact(str(config.get("z", "1.645")), "z")
    budgets = _build_budgets(config, specs, z)
    if "hash_key" in config:
        hash_key = bytes.fromhex(config["hash_key"])
    elif seed is not None:
        hash_key = hashlib.blake2b(str(seed).encode(), digest_size=16).digest()
    else:
        hash_key = os.urandom(16)
    session_total = None
    if "total_rho" in config:
        try:
            session_total = Decimal(str(config["total_rho"]))
        except InvalidOperation as exc:
            raise ConfigError(f"bad total_rho: {config['total_rho']!r}") from exc
    return engine.RunConfig(
        specs=specs,
        budgets=budgets,
        region=engine.Region(region),
        hash_key=hash_key,
        seed=seed,
        noiseless=noiseless,
        unsafe_test_mode=unsafe_test_mode,
        session_total=session_total,
    )


def _variance_text(variance) -> str:
    return str(calibrate.round_rho(variance, 6))


def write_outputs(result: engine.RunResult, out_dir: Path) -> None:
    """Write one file per table plus the ledger, atomically.

    PH5_num is identical to PH4 row-for-row and is not written separately.
    """
    if out_dir.exists():
        raise SchemaError(f"output directory {out_dir} already exists")
    out_dir.parent.mkdir(parents=True, exist_ok=True)
    tmp_dir = Path(tempfile.mkdtemp(dir=out_dir.parent, prefix=".phtab-out-"))
    try:
        for table_id in MEASURED_TABLE_IDS + ("PH8_num",):
            path = tmp_dir / f"{table_id}.csv"
            with open(path, "w", encoding="utf-8") as handle:
                handle.write(",".join(OUTPUT_COLUMNS) + "\n")
                for cell in result.outputs[table_id]:
                    region = "nation" if cell.group.geo == "US" else "state"
                    handle.write(
                        f"{region},{cell.group.geo},{cell.group.iteration.value},"
                        f"{cell.cell.label},{cell.value},"
                        f"{_variance_text(cell.variance)}\n"
                    )
        (tmp_dir / "ledger.csv").write_text(
            result.session.export_ledger(), encoding="utf-8"
        )
        os.replace(tmp_dir, out_dir)
    except BaseException:
        shutil.rmtree(tmp_dir, ignore_errors=True)
        raise


def cmd_validate(args) -> int:
    bundle = InputBundle(
        Path(args.persons), Path(args.units), _maybe(args.config), None, args.region
    )
    report, persons, units = validate(bundle)
    for warning in report.warnings:
        print(f"warning: {warning}")
    for error in report.errors:
        print(f"error: {error}", file=sys.stderr)
    if report.ok:
        print(f"ok: {len(persons)} persons, {len(units)} units")
        return 0
    return 1


def cmd_run(args) -> int:
    if (args.seed is not None or args.noiseless) and not args.unsafe_test_mode:
        print(
            "error: --seed/--noiseless require --unsafe-test-mode", file=sys.stderr
        )
        return 1
    bundle = InputBundle(
        Path(args.persons),
        Path(args.units),
        _maybe(args.config),
        Path(args.out),
        args.region,
        args.seed,
        args.noiseless,
        args.unsafe_test_mode,
    )
    report, persons, units = validate(bundle)
    for warning in report.warnings:
        print(f"warning: {warning}")
    if not report.ok:
        for error in report.errors:
            print(f"error: {error}", file=sys.stderr)
        return 1
    config = load_config(bundle.config_path)
    run_config = build_run_config(
        config, args.region, args.seed, args.noiseless, args.unsafe_test_mode
    )
    result = engine.run_all(run_config, persons, units)
    write_outputs(result, bundle.out_dir)
    guarantee = result.session.guarantee()
    print(
        f"wrote {bundle.out_dir}: rho={guarantee.unbounded_rho} "
        f"(change-one {guarantee.bounded_rho})"
    )
    return 0


def cmd_tune(args) -> int:
    config = load_config(_maybe(args.config))
    z = calibrate._as_exact(str(args.z or config.get("z", "1.645")), "z")
    table = calibrate.build_parameter_table(calibrate.production_targets(config), z)
    lines = ["table,level,tau,moe_target,rho_unbounded,rho_bounded,sigma2,moe"]
    for row in table.rows:
        tau = "" if row.tau is None else row.tau
        lines.append(
            f"{row.table_id},{row.level.key},{tau},{row.moe_target},"
            f"{row.rho_unbounded},{row.rho_bounded},"
            f"{calibrate.round_rho(row.sigma2, 4)},{row.moe_achieved}"
        )
    lines.append(f"total,,,,{table.total_unbounded},{table.total_bounded},,")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


class _CalibrationHandler(BaseHTTPRequestHandler):
    """JSON calibration service; stateless, no private-data access."""

    def _send(self, status: int, payload: dict) -> None:
        body = json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.send_header("Access-Control-Allow-Headers", "Content-Type")
        self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
        self.end_headers()
        self.wfile.write(body)

    def do_OPTIONS(self):  # noqa: N802 - stdlib naming
        self._send(204, {})

    def do_GET(self):  # noqa: N802
        if self.path == "/healthz":
            self._send(200, {"status": "ok"})
        elif self.path == "/api/preset/production":
            rows = [
                {
                    "table": t.table_id,
                    "level": t.level.key,
                    "tau": t.tau,
                    "moe": t.moe,
                }
                for t in calibrate.production_targets()
            ]
            self._send(200, {"z": "1.645", "rows": rows})
        else:
            self._send(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):  # noqa: N802
        if self.path != "/api/calibrate":
            self._send(404, {"error": f"unknown path {self.path}"})
            return
        try:
            length = int(self.headers.get("Content-Length", "0"))
            payload = json.loads(self.rfile.read(length) or b"{}")
            self._send(200, calibrate.calibrate_rows(payload))
        except (json.JSONDecodeError, calibrate.CalibrationRequestError) as exc:
            self._send(400, {"error": str(exc)})

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass


def make_server(port: int) -> ThreadingHTTPServer:
    return ThreadingHTTPServer(("127.0.0.1", port), _CalibrationHandler)


def cmd_serve(args) -> int:
    server = make_server(args.port)
    host, port = server.server_address[:2]
    print(f"serving calibration API on http://{host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def cmd_synth(args) -> int:
    codes = CodeConfig(load_config(_maybe(args.config))["code_lists"])
    dataset = synth.generate(args.households, seed=args.seed, region=args.region)
    persons = dataset.person_view()
    units = dataset.unit_view(codes)
    with open(args.out_persons, "w", encoding="utf-8") as handle:
        handle.write(",".join(PERSON_COLUMNS) + "\n")
        for p in persons:
            handle.write(
                f"{p.state_id},{p.mafid},{p.age},{p.race_eth.race_names()},"
                f"{int(p.race_eth.hispanic)},{p.relationship}\n"
            )
    with open(args.out_units, "w", encoding="utf-8") as handle:
        handle.write(",".join(UNIT_COLUMNS) + "\n")
        for u in units:
            handle.write(
                f"{u.state_id},{u.mafid},{u.householder_race_eth.race_names()},"
                f"{int(u.householder_race_eth.hispanic)},{u.tenure.value},"
                f"{u.household_type}\n"
            )
    print(f"wrote {len(persons)} persons, {len(units)} units")
    return 0


def _maybe(value) -> Optional[Path]:
    return Path(value) if value else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phtab",
        description="Differentially private person-in-household tabulations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_io(p, with_out=True):
        p.add_argument("--config", help="JSON config overriding the default")
        p.add_argument("--persons", required=True, help="person CSV path")
        p.add_argument("--units", required=True, help="unit CSV path")
        p.add_argument("--region", choices=("us", "pr"), default="us")
        if with_out:
            p.add_argument("--out", required=True, help="output directory")

    p_validate = sub.add_parser("validate", help="check input files")
    add_io(p_validate, with_out=False)
    p_validate.set_defaults(fn=cmd_validate)

    p_run = sub.add_parser("run", help="run all tabulations")
    add_io(p_run)
    p_run.add_argument("--seed", type=int, help="fixed noise seed (test only)")
    p_run.add_argument(
        "--noiseless", action="store_true", help="skip noise (test only)"
    )
    p_run.add_argument("--unsafe-test-mode", action="store_true")
    p_run.set_defaults(fn=cmd_run)

    p_tune = sub.add_parser("tune", help="build the budget parameter table")
    p_tune.add_argument("--config")
    p_tune.add_argument("--out")
    p_tune.add_argument("--z", help="quantile constant (default 1.645)")
    p_tune.set_defaults(fn=cmd_tune)

    p_serve = sub.add_parser("serve", help="host the calibration API")
    p_serve.add_argument("--port", type=int, default=8750)
    p_serve.set_defaults(fn=cmd_serve)

    p_synth = sub.add_parser("synth", help="generate synthetic inputs")
    p_synth.add_argument("--config")
    p_synth.add_argument("--households", type=int, default=100)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--region", choices=("us", "pr"), default="us")
    p_synth.add_argument("--out-persons", required=True)
    p_synth.add_argument("--out-units", required=True)
    p_synth.set_defaults(fn=cmd_synth)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    try:
        return args.fn(args)
    except (SchemaError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # pragma: no cover - last-resort reporting
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
