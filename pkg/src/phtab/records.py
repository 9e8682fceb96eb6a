"""Domain model for person and housing-unit records.

Defines the two private input record types, the race/ethnicity encoding, the
race and ethnicity iterations and their levels, and the population groups
(geographic entity, iteration) that tabulations are published for.
"""

from __future__ import annotations

import enum
from typing import NamedTuple, Optional


class Race(enum.IntFlag):
    """Major race categories, stored as a 6-bit mask."""

    WHITE = 1
    BLACK = 2
    AIAN = 4
    ASIAN = 8
    NHPI = 16
    SOR = 32


RACE_ORDER = (Race.WHITE, Race.BLACK, Race.AIAN, Race.ASIAN, Race.NHPI, Race.SOR)

RACE_NAMES = {
    Race.WHITE: "white",
    Race.BLACK: "black",
    Race.AIAN: "aian",
    Race.ASIAN: "asian",
    Race.NHPI: "nhpi",
    Race.SOR: "sor",
}

_RACE_BY_NAME = {name: race for race, name in RACE_NAMES.items()}

ALL_RACES_MASK = 0b111111


class RaceEthCode(NamedTuple):
    """Race/ethnicity attribute: a nonempty race mask plus an ethnicity flag."""

    races: int
    hispanic: bool

    def validate(self) -> "RaceEthCode":
        if not 1 <= self.races <= ALL_RACES_MASK:
            raise ValueError(f"race mask must select 1-6 races, got {self.races}")
        return self

    @property
    def race_count(self) -> int:
        return bin(self.races).count("1")

    @classmethod
    def from_names(cls, names: str, hispanic: bool) -> "RaceEthCode":
        """Parse a '+'-separated list of race names (e.g. ``white+black``)."""
        mask = 0
        for name in names.split("+"):
            name = name.strip().lower()
            if name not in _RACE_BY_NAME:
                raise ValueError(f"unknown race name: {name!r}")
            mask |= _RACE_BY_NAME[name]
        return cls(mask, hispanic).validate()

    def race_names(self) -> str:
        return "+".join(RACE_NAMES[r] for r in RACE_ORDER if self.races & r)


class Iteration(str, enum.Enum):
    """Race and ethnicity iterations a statistic may be categorized by."""

    STAR = "*"
    A = "A"  # white alone
    B = "B"  # black alone
    C = "C"  # aian alone
    D = "D"  # asian alone
    E = "E"  # nhpi alone
    F = "F"  # sor alone
    G = "G"  # two or more major races
    H = "H"  # hispanic or latino
    I = "I"  # white alone, not hispanic  # noqa: E741

    def __str__(self) -> str:  # pragma: no cover - repr convenience
        return self.value


_ALONE_ITERATION = {
    Race.WHITE: Iteration.A,
    Race.BLACK: Iteration.B,
    Race.AIAN: Iteration.C,
    Race.ASIAN: Iteration.D,
    Race.NHPI: Iteration.E,
    Race.SOR: Iteration.F,
}


class IterationLevel(str, enum.Enum):
    """Groupings of iterations into mutually exclusive families."""

    UNATTRIBUTED = "unattributed"
    AG = "a_g"
    HI = "h_i"


ITERATIONS_BY_LEVEL = {
    IterationLevel.UNATTRIBUTED: (Iteration.STAR,),
    IterationLevel.AG: (
        Iteration.A,
        Iteration.B,
        Iteration.C,
        Iteration.D,
        Iteration.E,
        Iteration.F,
        Iteration.G,
    ),
    IterationLevel.HI: (Iteration.H, Iteration.I),
}


class GeoLevel(str, enum.Enum):
    NATION = "nation"
    STATE = "state"


class PopulationGroupLevel(NamedTuple):
    """A (geography level, iteration level) pair naming a family of groups."""

    geo_level: GeoLevel
    iteration_level: IterationLevel

    @property
    def key(self) -> str:
        """Stable string key used in config files, budgets, and the ledger."""
        return f"{self.geo_level.value}_{self.iteration_level.value}"

    @classmethod
    def from_key(cls, key: str) -> "PopulationGroupLevel":
        for level in ALL_LEVELS:
            if level.key == key:
                return level
        raise ValueError(f"unknown population group level key: {key!r}")


ALL_LEVELS = (
    PopulationGroupLevel(GeoLevel.NATION, IterationLevel.UNATTRIBUTED),
    PopulationGroupLevel(GeoLevel.NATION, IterationLevel.AG),
    PopulationGroupLevel(GeoLevel.NATION, IterationLevel.HI),
    PopulationGroupLevel(GeoLevel.STATE, IterationLevel.UNATTRIBUTED),
    PopulationGroupLevel(GeoLevel.STATE, IterationLevel.AG),
    PopulationGroupLevel(GeoLevel.STATE, IterationLevel.HI),
)

UNATTRIBUTED_LEVELS = (ALL_LEVELS[0], ALL_LEVELS[3])


class PopulationGroup(NamedTuple):
    """A concrete (geographic entity, iteration) pair."""

    geo: str  # "US" for the nation, otherwise a 2-digit state FIPS code
    iteration: Iteration


class Tenure(str, enum.Enum):
    MORTGAGE = "mortgage"
    FREE_AND_CLEAR = "free_and_clear"
    RENTED = "rented"


class Attribution(str, enum.Enum):
    """Whose race/ethnicity a table iterates by."""

    HOUSEHOLDER = "householder"
    PERSON = "person"


class PersonRecord(NamedTuple):
    """One row per person living in an occupied housing unit."""

    state_id: str
    mafid: int
    age: int
    race_eth: RaceEthCode
    relationship: str

    def validate(self) -> "PersonRecord":
        if self.age < 0:
            raise ValueError(f"age must be nonnegative, got {self.age}")
        if self.mafid <= 0:
            raise ValueError(f"mafid must be positive, got {self.mafid}")
        self.race_eth.validate()
        return self


class UnitRecord(NamedTuple):
    """One row per occupied housing unit, keyed by MAFID."""

    state_id: str
    mafid: int
    householder_race_eth: RaceEthCode
    tenure: Tenure
    household_type: str

    def validate(self) -> "UnitRecord":
        if self.mafid <= 0:
            raise ValueError(f"mafid must be positive, got {self.mafid}")
        self.householder_race_eth.validate()
        return self


class JoinedRow(NamedTuple):
    """A person row augmented with the attributes of its housing unit.

    Geography comes from the unit side: a household geolocates its members.
    """

    state_id: str
    mafid: int
    age: int
    race_eth: RaceEthCode
    relationship: str
    householder_race_eth: RaceEthCode
    tenure: Tenure
    household_type: str


NATION_GEO = "US"

# 50 states plus the District of Columbia.
STATE_FIPS_US = (
    "01", "02", "04", "05", "06", "08", "09", "10", "11", "12",
    "13", "15", "16", "17", "18", "19", "20", "21", "22", "23",
    "24", "25", "26", "27", "28", "29", "30", "31", "32", "33",
    "34", "35", "36", "37", "38", "39", "40", "41", "42", "44",
    "45", "46", "47", "48", "49", "50", "51", "53", "54", "55",
    "56",
)

STATE_FIPS_PR = ("72",)


def classify_iteration(
    race_eth: RaceEthCode, level: IterationLevel
) -> Optional[Iteration]:
    """Return the single iteration within ``level`` that a record belongs to.

    Every record belongs to the ``*`` iteration. Within A-G, a record with one
    major race maps to that race's iteration and a record with two or more maps
    to G. Within H-I, Hispanic records map to H and white-alone non-Hispanic
    records map to I; all other records map to no iteration in the level.
    """
    if level is IterationLevel.UNATTRIBUTED:
        return Iteration.STAR
    if level is IterationLevel.AG:
        if race_eth.race_count == 1:
            return _ALONE_ITERATION[Race(race_eth.races)]
        return Iteration.G
    if level is IterationLevel.HI:
        if race_eth.hispanic:
            return Iteration.H
        if race_eth.races == Race.WHITE:
            return Iteration.I
        return None
    raise ValueError(f"unknown iteration level: {level!r}")


def map_population_group(
    record, level: PopulationGroupLevel, attribution: Attribution
) -> Optional[PopulationGroup]:
    """Map a record to its population group within ``level``, if any.

    ``record`` is any row carrying ``state_id`` plus the attributed
    race/ethnicity: the householder's for householder-attributed tables, the
    person's own otherwise. Each record maps to at most one group per level.
    """
    if attribution is Attribution.HOUSEHOLDER:
        race_eth = record.householder_race_eth
    else:
        race_eth = record.race_eth
    iteration = classify_iteration(race_eth, level.iteration_level)
    if iteration is None:
        return None
    geo = NATION_GEO if level.geo_level is GeoLevel.NATION else record.state_id
    return PopulationGroup(geo, iteration)
