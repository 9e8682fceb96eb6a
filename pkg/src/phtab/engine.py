"""Orchestration of the tabulation runs.

Runs the nine measured tables under a single privacy session, one noisy
measurement per (table, population group level), then derives PH8_num from
PH7 and aliases PH5_num to PH4 as postprocessing. Output domains come from
the static geography and iteration lists, never from the data, so every
(group, cell) pair appears exactly once per table even when its true count is
zero. No cross-table or cross-level reconciliation is performed and negative
noisy counts pass through unmodified.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import Decimal
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

from .accountant import BudgetAllocation, PrivacySession
from .noise import NoisyCell
from .records import (
    Attribution,
    GeoLevel,
    ITERATIONS_BY_LEVEL,
    NATION_GEO,
    PopulationGroup,
    PopulationGroupLevel,
    STATE_FIPS_PR,
    STATE_FIPS_US,
    classify_iteration,
)
from .tables import (
    BasisCell,
    MEASURED_TABLE_IDS,
    TableKind,
    TableSpec,
    stability_factor,
)
from .transform import filter_rows, truncate_and_join


class MissingInput(ValueError):
    """A derived table's inputs are absent."""


class Region(str, enum.Enum):
    US = "us"
    PUERTO_RICO = "pr"


@dataclass(frozen=True)
class RunConfig:
    """Everything one run needs: table specs, budgets, region, and randomness."""

    specs: dict
    budgets: BudgetAllocation
    region: Region = Region.US
    hash_key: bytes = b""
    seed: Optional[int] = None
    noiseless: bool = False
    unsafe_test_mode: bool = False
    session_total: Optional[Decimal] = None  # defaults to the budget sum

    def __post_init__(self):
        for spec in self.specs.values():
            if self.region is Region.PUERTO_RICO:
                nation = [
                    lvl for lvl in spec.levels if lvl.geo_level is GeoLevel.NATION
                ]
                if nation:
                    raise ValueError(
                        f"{spec.table_id}: nation levels are not tabulated for "
                        "Puerto Rico"
                    )
            for level in spec.levels:
                self.budgets.rho_for(spec.table_id, level)


class CountVector(NamedTuple):
    """Pre-noise counts over the full (group, cell) domain of one level."""

    level_index: int
    level: PopulationGroupLevel
    keys: tuple  # (PopulationGroup, cell label) in canonical order
    counts: tuple


@lru_cache(maxsize=None)
def enumerate_groups(
    level: PopulationGroupLevel, region: Region
) -> tuple[PopulationGroup, ...]:
    """All population groups of a level, in canonical output order."""
    if level.geo_level is GeoLevel.NATION:
        geos: tuple = (NATION_GEO,)
    elif region is Region.PUERTO_RICO:
        geos = STATE_FIPS_PR
    else:
        geos = STATE_FIPS_US
    iterations = ITERATIONS_BY_LEVEL[level.iteration_level]
    return tuple(
        PopulationGroup(geo, iteration) for geo in geos for iteration in iterations
    )


_UNSET = object()


def build_count_vector(
    rows: Sequence,
    spec: TableSpec,
    level_index: int,
    level: PopulationGroupLevel,
    region: Region,
) -> CountVector:
    """Group-by count over one level with explicit zeros for absent groups."""
    use_householder = spec.attribution is Attribution.HOUSEHOLDER
    iteration_level = level.iteration_level
    nation = level.geo_level is GeoLevel.NATION
    mapper = spec.cell_mapper

    classified: dict = {}
    tallies: dict = {}
    for row in rows:
        race = row.householder_race_eth if use_householder else row.race_eth
        iteration = classified.get(race, _UNSET)
        if iteration is _UNSET:
            iteration = classify_iteration(race, iteration_level)
            classified[race] = iteration
        if iteration is None:
            continue
        key = (
            PopulationGroup(NATION_GEO if nation else row.state_id, iteration),
            mapper(row),
        )
        tallies[key] = tallies.get(key, 0) + 1

    keys = tuple(
        (group, label)
        for group in enumerate_groups(level, region)
        for label in spec.cells
    )
    counts = tuple(tallies.get(key, 0) for key in keys)
    return CountVector(level_index, level, keys, counts)


def _measure_level(
    spec: TableSpec,
    vector: CountVector,
    budgets: BudgetAllocation,
    session: PrivacySession,
) -> list[NoisyCell]:
    rho = budgets.rho_for(spec.table_id, vector.level)
    stream_keys = [
        (group.geo, group.iteration.value, label) for group, label in vector.keys
    ]
    noisy, sigma2 = session.measure(
        spec.table_id,
        vector.level,
        stream_keys,
        vector.counts,
        rho,
        stability_factor(spec),
    )
    return [
        NoisyCell(group, BasisCell(spec.table_id, label), value, sigma2)
        for (group, label), value in zip(vector.keys, noisy)
    ]


def run_person_table(
    spec: TableSpec,
    persons: Sequence,
    units: Sequence,
    budgets: BudgetAllocation,
    tau: int,
    session: PrivacySession,
    *,
    hash_key: bytes,
    region: Region = Region.US,
) -> list[NoisyCell]:
    """Filter, truncate-and-join, then measure every level of a joined table."""
    if spec.kind is not TableKind.PERSON_JOIN:
        raise ValueError(f"{spec.table_id} is not a person-join table")
    if spec.person_filter is not None:
        persons = filter_rows(persons, spec.person_filter)
    if spec.unit_filter is not None:
        units = filter_rows(units, spec.unit_filter)
    joined = truncate_and_join(persons, units, tau, hash_key)
    cells = []
    for index, level in enumerate(spec.levels, start=1):
        vector = build_count_vector(joined, spec, index, level, region)
        cells.extend(_measure_level(spec, vector, budgets, session))
    return cells


def run_unit_table(
    spec: TableSpec,
    units: Sequence,
    budgets: BudgetAllocation,
    session: PrivacySession,
    *,
    region: Region = Region.US,
) -> list[NoisyCell]:
    """Filter, then measure every level of a unit-only table."""
    if spec.kind is not TableKind.UNIT_ONLY:
        raise ValueError(f"{spec.table_id} is not a unit-only table")
    if spec.unit_filter is not None:
        units = filter_rows(units, spec.unit_filter)
    cells = []
    for index, level in enumerate(spec.levels, start=1):
        vector = build_count_vector(units, spec, index, level, region)
        cells.extend(_measure_level(spec, vector, budgets, session))
    return cells


def derive_ph8_num(ph7_cells: Sequence[NoisyCell]) -> list[NoisyCell]:
    """Postprocess PH7 into PH8_num; no budget is spent.

    Owner-occupied population is the sum of the two owned-tenure cells and the
    total is the sum of all three; variances add because the measurements are
    independent.
    """
    if not ph7_cells:
        raise MissingInput("PH8_num derivation requires PH7 outputs")
    by_group: dict = {}
    order = []
    for cell in ph7_cells:
        if cell.group not in by_group:
            by_group[cell.group] = {}
            order.append(cell.group)
        by_group[cell.group][cell.cell.label] = cell

    derived = []
    for group in order:
        cells = by_group[group]
        try:
            mortgage = cells["owned_with_mortgage"]
            free_clear = cells["owned_free_and_clear"]
            renter = cells["renter_occupied"]
        except KeyError as exc:
            raise MissingInput(
                f"PH7 output for group {group} is missing cell {exc}"
            ) from exc
        owner_value = mortgage.value + free_clear.value
        owner_var = mortgage.variance + free_clear.variance
        derived.append(
            NoisyCell(group, BasisCell("PH8_num", "owner_occupied"), owner_value, owner_var)
        )
        derived.append(
            NoisyCell(
                group, BasisCell("PH8_num", "renter_occupied"), renter.value, renter.variance
            )
        )
        derived.append(
            NoisyCell(
                group,
                BasisCell("PH8_num", "total"),
                owner_value + renter.value,
                owner_var + renter.variance,
            )
        )
    return derived


class RunResult(NamedTuple):
    """Outputs per table plus the session that produced them."""

    outputs: dict
    session: PrivacySession


def run_all(config: RunConfig, persons: Sequence, units: Sequence) -> RunResult:
    """Execute every table under one session and derive the postprocessed tables.

    PH4 doubles as PH5_num: the alias rows are relabeled copies and spend no
    budget, as with PH8_num. Any table failure propagates before any output
    is produced.
    """
    session = PrivacySession(
        total_rho=(
            config.session_total
            if config.session_total is not None
            else config.budgets.total_rho
        ),
        table_stabilities={
            table_id: stability_factor(spec) for table_id, spec in config.specs.items()
        },
        seed=config.seed,
        noiseless=config.noiseless,
        unsafe_test_mode=config.unsafe_test_mode,
    )
    session.register("persons", tuple(persons), neighbor_distance=1)
    session.register("units", tuple(units), neighbor_distance=2)

    outputs: dict = {}
    for table_id in MEASURED_TABLE_IDS:
        spec = config.specs[table_id]
        if spec.kind is TableKind.PERSON_JOIN:
            outputs[table_id] = run_person_table(
                spec,
                session.dataset("persons"),
                session.dataset("units"),
                config.budgets,
                spec.tau,
                session,
                hash_key=config.hash_key,
                region=config.region,
            )
        else:
            outputs[table_id] = run_unit_table(
                spec,
                session.dataset("units"),
                config.budgets,
                session,
                region=config.region,
            )
    outputs["PH8_num"] = derive_ph8_num(outputs["PH7"])
    outputs["PH5_num"] = [
        cell._replace(cell=BasisCell("PH5_num", cell.cell.label))
        for cell in outputs["PH4"]
    ]
    return RunResult(outputs, session)
