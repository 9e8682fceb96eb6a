"""Margin-of-error and privacy-budget conversion.

A noisy count with variance sigma2 has a 90% margin of error of at most
floor(z * sigma), so a target MOE pins the budget share:

    rho = (z^2 / 2) * stability^2 / moe^2

Conversions are exact rationals; published budget values are the half-even
6-decimal roundings of the exact conversions, and the change-one figure is
exactly double the rounded add/remove-one figure. ``z`` defaults to 1.645 (the
two-sided 90% normal quantile); 1.64 is also accepted wherever ``z`` appears.
"""

from __future__ import annotations

import math
from decimal import Decimal
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence

from .noise import DomainError
from .records import PopulationGroupLevel
from .tables import MEASURED_TABLE_IDS, TableKind, load_default_config

DEFAULT_Z = Fraction("1.645")

RHO_PLACES = 6

UNIT_STABILITY = 2


class CalibrationRequestError(ValueError):
    """A calibration request row is malformed."""


def _as_exact(value, name: str) -> Fraction:
    if isinstance(value, float):
        raise DomainError(f"{name} must be exact (int, str, Decimal, Fraction)")
    try:
        return Fraction(value)
    except (ValueError, TypeError) as exc:
        raise DomainError(f"{name} is not a number: {value!r}") from exc


def rho_from_moe(moe: int, stability: int, z=DEFAULT_Z) -> Fraction:
    """Exact budget share achieving a 90% MOE of at most ``moe``."""
    if moe < 1:
        raise DomainError(f"moe must be >= 1, got {moe}")
    if stability <= 0:
        raise DomainError(f"stability must be positive, got {stability}")
    z = _as_exact(z, "z")
    if z <= 0:
        raise DomainError(f"z must be positive, got {z}")
    return z * z * stability * stability / Fraction(2 * moe * moe)


def moe_from_rho(rho, stability: int, z=DEFAULT_Z) -> int:
    """Largest 90% MOE of a measurement with budget ``rho``: floor(z * sigma)."""
    rho = _as_exact(rho, "rho")
    if rho <= 0:
        raise DomainError(f"rho must be positive, got {rho}")
    if stability <= 0:
        raise DomainError(f"stability must be positive, got {stability}")
    z = _as_exact(z, "z")
    squared = z * z * stability * stability / (2 * rho)
    return math.isqrt(squared.numerator // squared.denominator)


def round_rho(value, places: int = RHO_PLACES) -> Decimal:
    """Half-even decimal rounding of an exact rational, for published budgets."""
    frac = Fraction(value) * 10**places
    quotient, remainder = divmod(frac.numerator, frac.denominator)
    double = 2 * remainder
    if double > frac.denominator or (double == frac.denominator and quotient % 2):
        quotient += 1
    return Decimal(quotient).scaleb(-places)


class MoeTarget(NamedTuple):
    """One row of a tuning scenario: a table/level with its accuracy target."""

    table_id: str
    level: PopulationGroupLevel
    moe: int
    tau: Optional[int]  # None for unit-only tables

    @property
    def stability(self) -> int:
        return UNIT_STABILITY if self.tau is None else 2 * self.tau + 2


class ParameterRow(NamedTuple):
    table_id: str
    level: PopulationGroupLevel
    tau: Optional[int]
    stability: int
    moe_target: int
    rho_unbounded: Decimal
    rho_bounded: Decimal
    sigma2: Fraction
    moe_achieved: int


class ParameterTable(NamedTuple):
    rows: tuple[ParameterRow, ...]
    total_unbounded: Decimal
    total_bounded: Decimal


def build_parameter_table(targets: Sequence[MoeTarget], z=DEFAULT_Z) -> ParameterTable:
    """Convert MOE targets into published budget rows plus exact totals."""
    rows = []
    for target in targets:
        stability = target.stability
        rho = round_rho(rho_from_moe(target.moe, stability, z))
        sigma2 = Fraction(stability * stability) / (2 * Fraction(rho))
        rows.append(
            ParameterRow(
                table_id=target.table_id,
                level=target.level,
                tau=target.tau,
                stability=stability,
                moe_target=target.moe,
                rho_unbounded=rho,
                rho_bounded=2 * rho,
                sigma2=sigma2,
                moe_achieved=moe_from_rho(rho, stability, z),
            )
        )
    total = sum((row.rho_unbounded for row in rows), Decimal(0))
    return ParameterTable(tuple(rows), total, 2 * total)


def production_targets(config: Optional[dict] = None) -> tuple[MoeTarget, ...]:
    """The MOE targets of the production parameterization, in table order."""
    config = config or load_default_config()
    targets = []
    for table_id in MEASURED_TABLE_IDS:
        table_cfg = config["tables"][table_id]
        tau = table_cfg.get("tau")
        for level_key in table_cfg["levels"]:
            level = PopulationGroupLevel.from_key(level_key)
            targets.append(
                MoeTarget(table_id, level, table_cfg["moe_targets"][level_key], tau)
            )
    return tuple(targets)


def _table_kind(table_id: str) -> TableKind:
    if table_id not in MEASURED_TABLE_IDS:
        raise CalibrationRequestError(f"unknown table: {table_id!r}")
    if table_id in ("PH1_denom", "PH5_denom", "PH8_denom"):
        return TableKind.UNIT_ONLY
    return TableKind.PERSON_JOIN


def calibrate_rows(payload: dict) -> dict:
    """Answer one calibration request (the serve-mode JSON contract).

    Each request row names a table and level plus exactly one of ``moe`` (a
    positive integer target) or ``rho`` (a decimal-string budget); person-join
    tables also need ``tau``. The response carries the derived budget pair,
    variance, and achieved MOE per row, plus exact totals.
    """
    if not isinstance(payload, dict):
        raise CalibrationRequestError("request body must be a JSON object")
    try:
        z = _as_exact(str(payload.get("z", "1.645")), "z")
    except DomainError as exc:
        raise CalibrationRequestError(str(exc)) from exc
    if z <= 0:
        raise CalibrationRequestError("z must be positive")
    raw_rows = payload.get("rows")
    if not isinstance(raw_rows, list):
        raise CalibrationRequestError("request must carry a list of rows")

    rows = []
    total = Decimal(0)
    for index, raw in enumerate(raw_rows):
        if not isinstance(raw, dict):
            raise CalibrationRequestError(f"row {index} must be an object")
        table_id = raw.get("table")
        kind = _table_kind(table_id)
        try:
            level = PopulationGroupLevel.from_key(str(raw.get("level")))
        except ValueError as exc:
            raise CalibrationRequestError(str(exc)) from exc

        tau = raw.get("tau")
        if kind is TableKind.PERSON_JOIN:
            if not isinstance(tau, int) or tau < 1:
                raise CalibrationRequestError(
                    f"row {index}: {table_id} requires an integer tau >= 1"
                )
            stability = 2 * tau + 2
        else:
            if tau is not None:
                raise CalibrationRequestError(
                    f"row {index}: {table_id} does not take a truncation threshold"
                )
            stability = UNIT_STABILITY

        has_moe = raw.get("moe") is not None
        has_rho = raw.get("rho") is not None
        if has_moe == has_rho:
            raise CalibrationRequestError(
                f"row {index}: provide exactly one of moe or rho"
            )
        try:
            if has_moe:
                moe = raw["moe"]
                if not isinstance(moe, int) or moe < 1:
                    raise CalibrationRequestError(
                        f"row {index}: moe must be an integer >= 1"
                    )
                rho = round_rho(rho_from_moe(moe, stability, z))
            else:
                rho = round_rho(_as_exact(str(raw["rho"]), "rho"))
                if rho <= 0:
                    raise CalibrationRequestError(f"row {index}: rho must be > 0")
        except DomainError as exc:
            raise CalibrationRequestError(f"row {index}: {exc}") from exc

        sigma2 = Fraction(stability * stability) / (2 * Fraction(rho))
        total += rho
        rows.append(
            {
                "table": table_id,
                "level": level.key,
                "tau": tau,
                "stability": stability,
                "moe": moe_from_rho(rho, stability, z),
                "rho_unbounded": str(rho),
                "rho_bounded": str(2 * rho),
                "sigma2": str(round_rho(sigma2, 4)),
            }
        )
    return {
        "z": str(payload.get("z", "1.645")),
        "rows": rows,
        "totals": {
            "rho_unbounded": str(total),
            "rho_bounded": str(2 * total),
        },
    }
