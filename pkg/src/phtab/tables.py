"""Table shells: universes, basis cells, and the record-to-cell mappers.

Each published table estimates only its basis, the finest disjoint cells from
which the remaining cells aggregate. Which relationship and household-type
codes feed each cell is data-driven: the code lists and their groupings ship
in a versioned config file (``data/default_config.json``) so the engine stays
generic. ``build_table_specs`` turns a parsed code config into executable
table specifications.
"""

from __future__ import annotations

import enum
import json
from importlib import resources
from typing import Callable, NamedTuple, Optional

from .records import (
    ALL_LEVELS,
    Attribution,
    JoinedRow,
    PopulationGroupLevel,
    Tenure,
    UNATTRIBUTED_LEVELS,
    UnitRecord,
)


class ConfigError(ValueError):
    """A code list or table configuration is malformed."""


class TableKind(str, enum.Enum):
    PERSON_JOIN = "person_join"  # filter-join-transform-measure
    UNIT_ONLY = "unit_only"  # filter-transform-measure


class BasisCell(NamedTuple):
    """One basis cell of a table; labels come from the table's closed list."""

    table_id: str
    label: str


# The nine independently measured tables, in canonical output order.
MEASURED_TABLE_IDS = (
    "PH1_num",
    "PH1_denom",
    "PH2",
    "PH3",
    "PH4",
    "PH5_denom",
    "PH6",
    "PH7",
    "PH8_denom",
)

DERIVED_TABLE_IDS = ("PH8_num", "PH5_num")

PH6_AGE_BANDS = ("under_4", "4_and_5", "6_to_11", "12_to_17")
PH6_FAMILY_TYPES = ("married", "cohabiting", "male_householder", "female_householder")

PH2_CELLS = (
    "opposite_sex_married_couple",
    "same_sex_married_couple",
    "opposite_sex_cohabiting_couple",
    "same_sex_cohabiting_couple",
    "male_householder_alone",
    "male_householder_with_others",
    "female_householder_alone",
    "female_householder_with_others",
)

PH3_CELLS = (
    "householder_partner_or_nonrelative",
    "own_child_in_married_couple",
    "own_child_in_cohabiting_couple",
    "own_child_in_male_householder",
    "own_child_in_female_householder",
    "grandchild",
    "other_relatives",
)

PH7_CELLS = ("owned_with_mortgage", "owned_free_and_clear", "renter_occupied")

PH8_DENOM_CELLS = ("owner_occupied", "renter_occupied")

PH8_NUM_CELLS = ("owner_occupied", "renter_occupied", "total")

AGE_CELLS = ("under_18", "18_and_over")


class CodeConfig:
    """Closed code lists plus the groupings the table mappers rely on."""

    def __init__(self, raw: dict):
        try:
            rel = raw["relationships"]
            hht = raw["household_types"]
            self.householder_code: str = rel["householder"]
            self.spouse_codes = frozenset(rel["spouse"])
            self.partner_codes = frozenset(rel["partner"])
            self.own_child_codes = frozenset(rel["own_child"])
            self.grandchild_codes = frozenset(rel["grandchild"])
            self.other_relative_codes = frozenset(rel["other_relative"])
            self.nonrelative_codes = frozenset(rel["nonrelative"])
            self.household_type_codes = frozenset(hht["codes"])
            self.family_household_types = frozenset(hht["family"])
            self.family_type_of = dict(hht["family_type"])
            self.couple_cell_of = dict(hht["couple_cell"])
        except KeyError as exc:
            raise ConfigError(f"code_lists config missing key: {exc}") from exc

        self.relationship_codes = frozenset(
            {self.householder_code}
            | self.spouse_codes
            | self.partner_codes
            | self.own_child_codes
            | self.grandchild_codes
            | self.other_relative_codes
            | self.nonrelative_codes
        )
        # Population in families: the householder and everyone related to them.
        self.family_relationship_codes = frozenset(
            {self.householder_code}
            | self.spouse_codes
            | self.own_child_codes
            | self.grandchild_codes
            | self.other_relative_codes
        )
        self._check()

    def _check(self) -> None:
        if not self.family_household_types <= self.household_type_codes:
            raise ConfigError("family household types must be listed codes")
        for mapping, name in (
            (self.family_type_of, "family_type"),
            (self.couple_cell_of, "couple_cell"),
        ):
            missing = self.household_type_codes - mapping.keys()
            if missing:
                raise ConfigError(f"{name} mapping missing codes: {sorted(missing)}")
        bad_types = set(self.family_type_of.values()) - set(PH6_FAMILY_TYPES)
        if bad_types:
            raise ConfigError(f"unknown family types: {sorted(bad_types)}")
        bad_cells = set(self.couple_cell_of.values()) - set(PH2_CELLS)
        if bad_cells:
            raise ConfigError(f"unknown couple cells: {sorted(bad_cells)}")


class TableSpec(NamedTuple):
    """Everything needed to run one table: universe, basis, levels, threshold."""

    table_id: str
    kind: TableKind
    attribution: Attribution
    levels: tuple[PopulationGroupLevel, ...]
    cells: tuple[str, ...]
    cell_mapper: Callable
    person_filter: Optional[Callable]
    unit_filter: Optional[Callable]
    tau: Optional[int]

    def cell(self, label: str) -> BasisCell:
        return BasisCell(self.table_id, label)


def load_default_config() -> dict:
    """Load the config file shipped with the package."""
    text = resources.files("phtab.data").joinpath("default_config.json").read_text()
    return json.loads(text)


def _age_cell(row: JoinedRow) -> str:
    return "under_18" if row.age < 18 else "18_and_over"


def _single_cell(_row) -> str:
    return "total"


def build_table_specs(
    codes: CodeConfig,
    taus: dict[str, int],
    levels_by_table: Optional[dict[str, tuple[PopulationGroupLevel, ...]]] = None,
) -> dict[str, TableSpec]:
    """Build the nine measured table specs from a code config.

    Args:
        codes: Parsed code lists.
        taus: Truncation threshold per person-join table id.
        levels_by_table: Population group levels per table; defaults to all six
            levels, except the uniterated tables which carry only the
            unattributed levels.
    """

    def ph2_cell(row: JoinedRow) -> str:
        return codes.couple_cell_of[row.household_type]

    own_child_cell = {
        "married": "own_child_in_married_couple",
        "cohabiting": "own_child_in_cohabiting_couple",
        "male_householder": "own_child_in_male_householder",
        "female_householder": "own_child_in_female_householder",
    }

    def ph3_cell(row: JoinedRow) -> str:
        rel = row.relationship
        if rel in codes.own_child_codes:
            return own_child_cell[codes.family_type_of[row.household_type]]
        if rel in codes.grandchild_codes:
            return "grandchild"
        if rel in codes.other_relative_codes:
            return "other_relatives"
        return "householder_partner_or_nonrelative"

    def ph6_cell(row: JoinedRow) -> str:
        family = codes.family_type_of[row.household_type]
        age = row.age
        if age < 4:
            band = "under_4"
        elif age <= 5:
            band = "4_and_5"
        elif age <= 11:
            band = "6_to_11"
        else:
            band = "12_to_17"
        return f"{family}/{band}"

    def ph7_cell(row: JoinedRow) -> str:
        if row.tenure is Tenure.MORTGAGE:
            return "owned_with_mortgage"
        if row.tenure is Tenure.FREE_AND_CLEAR:
            return "owned_free_and_clear"
        return "renter_occupied"

    def ph8_cell(unit: UnitRecord) -> str:
        return "renter_occupied" if unit.tenure is Tenure.RENTED else "owner_occupied"

    def under_18(person) -> bool:
        return person.age < 18

    def own_child_under_18(person) -> bool:
        return person.age < 18 and person.relationship in codes.own_child_codes

    def family_member(person) -> bool:
        return person.relationship in codes.family_relationship_codes

    def family_unit(unit) -> bool:
        return unit.household_type in codes.family_household_types

    def levels_for(table_id: str, default: tuple) -> tuple:
        if levels_by_table and table_id in levels_by_table:
            return tuple(levels_by_table[table_id])
        return default

    specs = {
        "PH1_num": TableSpec(
            "PH1_num",
            TableKind.PERSON_JOIN,
            Attribution.HOUSEHOLDER,
            levels_for("PH1_num", ALL_LEVELS),
            AGE_CELLS,
            _age_cell,
            None,
            None,
            taus.get("PH1_num"),
        ),
        "PH1_denom": TableSpec(
            "PH1_denom",
            TableKind.UNIT_ONLY,
            Attribution.HOUSEHOLDER,
            levels_for("PH1_denom", ALL_LEVELS),
            ("total",),
            _single_cell,
            None,
            None,
            None,
        ),
        "PH2": TableSpec(
            "PH2",
            TableKind.PERSON_JOIN,
            Attribution.HOUSEHOLDER,
            levels_for("PH2", UNATTRIBUTED_LEVELS),
            PH2_CELLS,
            ph2_cell,
            None,
            None,
            taus.get("PH2"),
        ),
        "PH3": TableSpec(
            "PH3",
            TableKind.PERSON_JOIN,
            Attribution.PERSON,
            levels_for("PH3", ALL_LEVELS),
            PH3_CELLS,
            ph3_cell,
            under_18,
            None,
            taus.get("PH3"),
        ),
        "PH4": TableSpec(
            "PH4",
            TableKind.PERSON_JOIN,
            Attribution.HOUSEHOLDER,
            levels_for("PH4", ALL_LEVELS),
            AGE_CELLS,
            _age_cell,
            family_member,
            family_unit,
            taus.get("PH4"),
        ),
        "PH5_denom": TableSpec(
            "PH5_denom",
            TableKind.UNIT_ONLY,
            Attribution.HOUSEHOLDER,
            levels_for("PH5_denom", ALL_LEVELS),
            ("total",),
            _single_cell,
            None,
            family_unit,
            None,
        ),
        "PH6": TableSpec(
            "PH6",
            TableKind.PERSON_JOIN,
            Attribution.HOUSEHOLDER,
            levels_for("PH6", UNATTRIBUTED_LEVELS),
            tuple(f"{ft}/{band}" for ft in PH6_FAMILY_TYPES for band in PH6_AGE_BANDS),
            ph6_cell,
            own_child_under_18,
            None,
            taus.get("PH6"),
        ),
        "PH7": TableSpec(
            "PH7",
            TableKind.PERSON_JOIN,
            Attribution.HOUSEHOLDER,
            levels_for("PH7", ALL_LEVELS),
            PH7_CELLS,
            ph7_cell,
            None,
            None,
            taus.get("PH7"),
        ),
        "PH8_denom": TableSpec(
            "PH8_denom",
            TableKind.UNIT_ONLY,
            Attribution.HOUSEHOLDER,
            levels_for("PH8_denom", ALL_LEVELS),
            PH8_DENOM_CELLS,
            ph8_cell,
            None,
            None,
            None,
        ),
    }
    for spec in specs.values():
        if spec.kind is TableKind.PERSON_JOIN and (spec.tau is None or spec.tau < 1):
            raise ConfigError(f"{spec.table_id} requires a truncation threshold >= 1")
    return specs


def basis_cell(record, spec: TableSpec) -> BasisCell:
    """Map an in-universe record to its unique basis cell in ``spec``."""
    return BasisCell(spec.table_id, spec.cell_mapper(record))


def stability_factor(spec: TableSpec) -> int:
    """The per-table noise-calibration divisor: 2*tau + 2 joined, 2 unit-only."""
    if spec.kind is TableKind.PERSON_JOIN:
        return 2 * spec.tau + 2
    return 2
