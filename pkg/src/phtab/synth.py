"""Synthetic base-person datasets for tests and demos.

Both private inputs are modeled as views of a single underlying person list:
the person view is a row-for-row projection (1-stable), and the unit view is
recomputed per household from its members, so adding or removing one person
changes at most one unit row into another (2-stable). Neighbor mutations
produce the add/remove and change-one dataset pairs the stability and
sensitivity harnesses need.
"""

from __future__ import annotations

import random
from typing import NamedTuple, Optional, Sequence

from .records import PersonRecord, RaceEthCode, STATE_FIPS_PR, STATE_FIPS_US, Tenure, UnitRecord
from .tables import CodeConfig


class BasePersonRow(NamedTuple):
    """One underlying person, carrying the unit attributes derivable from them."""

    state_id: str
    mafid: int
    age: int
    race_eth: RaceEthCode
    relationship: str
    sex: str  # "male" | "female"; only surfaces through the household type
    tenure: Tenure


class BasePersonDataset(NamedTuple):
    rows: tuple[BasePersonRow, ...]

    def person_view(self) -> tuple[PersonRecord, ...]:
        """Project each underlying person to a person record. 1-stable."""
        return tuple(
            PersonRecord(r.state_id, r.mafid, r.age, r.race_eth, r.relationship)
            for r in self.rows
        )

    def unit_view(self, codes: CodeConfig) -> tuple[UnitRecord, ...]:
        """Recompute one unit record per occupied household. 2-stable."""
        households: dict[int, list[BasePersonRow]] = {}
        for row in self.rows:
            households.setdefault(row.mafid, []).append(row)
        return tuple(
            _derive_unit(mafid, members, codes)
            for mafid, members in households.items()
        )


def _derive_unit(
    mafid: int, members: Sequence[BasePersonRow], codes: CodeConfig
) -> UnitRecord:
    # Householder: first member (by occurrence) with the householder code,
    # else the first member outright.
    householder = next(
        (m for m in members if m.relationship == codes.householder_code), members[0]
    )
    others = [m for m in members if m is not householder]
    spouse = next((m for m in others if m.relationship in codes.spouse_codes), None)
    partner = next((m for m in others if m.relationship in codes.partner_codes), None)
    relative_present = any(
        m.relationship in codes.family_relationship_codes
        and m.relationship != codes.householder_code
        for m in others
    )

    if spouse is not None:
        same = spouse.relationship == "same_sex_spouse"
        household_type = "married_same_sex" if same else "married_opposite_sex"
    elif partner is not None:
        same = partner.relationship == "same_sex_partner"
        base = "cohabiting_same_sex" if same else "cohabiting_opposite_sex"
        household_type = f"{base}_family" if relative_present else f"{base}_nonfamily"
    elif not others:
        household_type = f"{householder.sex}_alone"
    elif relative_present:
        household_type = f"{householder.sex}_family"
    else:
        household_type = f"{householder.sex}_nonfamily"

    return UnitRecord(
        state_id=householder.state_id,
        mafid=mafid,
        householder_race_eth=householder.race_eth,
        tenure=householder.tenure,
        household_type=household_type,
    )


_MEMBER_RELATIONSHIPS = (
    ("opposite_sex_spouse", 14),
    ("same_sex_spouse", 2),
    ("opposite_sex_partner", 6),
    ("same_sex_partner", 2),
    ("biological_child", 30),
    ("adopted_child", 4),
    ("stepchild", 4),
    ("grandchild", 8),
    ("sibling", 5),
    ("parent", 5),
    ("parent_in_law", 2),
    ("child_in_law", 2),
    ("other_relative", 6),
    ("roommate_or_housemate", 6),
    ("foster_child", 2),
    ("other_nonrelative", 2),
)

DEFAULT_SIZE_WEIGHTS = {1: 20, 2: 28, 3: 18, 4: 14, 5: 8, 6: 5, 7: 3, 9: 2, 12: 2}


def _random_race_eth(rng: random.Random) -> RaceEthCode:
    if rng.random() < 0.82:
        mask = 1 << rng.randrange(6)
    else:
        mask = rng.randrange(1, 64)
    return RaceEthCode(mask, rng.random() < 0.2)


def _random_member(
    rng: random.Random, state_id: str, mafid: int, tenure: Tenure, relationship=None
) -> BasePersonRow:
    if relationship is None:
        codes, weights = zip(*_MEMBER_RELATIONSHIPS)
        relationship = rng.choices(codes, weights=weights)[0]
    if relationship in ("biological_child", "adopted_child", "stepchild", "grandchild",
                        "foster_child"):
        age = rng.randrange(0, 26)
    elif relationship == "householder":
        age = rng.randrange(18, 95)
    else:
        age = rng.randrange(15, 95)
    return BasePersonRow(
        state_id=state_id,
        mafid=mafid,
        age=age,
        race_eth=_random_race_eth(rng),
        relationship=relationship,
        sex=rng.choice(("male", "female")),
        tenure=tenure,
    )


def generate(
    n_households: int,
    size_dist: Optional[dict[int, float]] = None,
    seed: int = 0,
    region: str = "us",
) -> BasePersonDataset:
    """Generate a deterministic synthetic base-person dataset.

    The default household size distribution includes sizes above the
    production truncation thresholds so truncation paths get exercised.
    """
    rng = random.Random(seed)
    sizes, weights = zip(*sorted((size_dist or DEFAULT_SIZE_WEIGHTS).items()))
    states = STATE_FIPS_PR if region == "pr" else STATE_FIPS_US
    rows: list[BasePersonRow] = []
    for index in range(n_households):
        mafid = 1000 + index
        state_id = rng.choice(states)
        tenure = rng.choice(tuple(Tenure))
        size = rng.choices(sizes, weights=weights)[0]
        rows.append(_random_member(rng, state_id, mafid, tenure, "householder"))
        for _ in range(size - 1):
            rows.append(_random_member(rng, state_id, mafid, tenure))
    return BasePersonDataset(tuple(rows))


class EmptyDataset(ValueError):
    """The requested mutation needs at least one row."""


def neighbor(
    dataset: BasePersonDataset, mode: str, seed: int = 0
) -> BasePersonDataset:
    """Produce a neighboring dataset.

    ``add`` and ``remove`` yield add/remove-one neighbors; ``modify`` replaces
    one row wholesale (possibly moving the person to another or a brand-new
    household), yielding a change-one neighbor.
    """
    rng = random.Random(seed)
    rows = list(dataset.rows)
    if mode == "add":
        rows.insert(rng.randrange(len(rows) + 1), _random_row(rng, rows))
    elif mode == "remove":
        if not rows:
            raise EmptyDataset("cannot remove from an empty dataset")
        rows.pop(rng.randrange(len(rows)))
    elif mode == "modify":
        if not rows:
            raise EmptyDataset("cannot modify an empty dataset")
        rows[rng.randrange(len(rows))] = _random_row(rng, rows)
    else:
        raise ValueError(f"unknown neighbor mode: {mode!r}")
    return BasePersonDataset(tuple(rows))


def _random_row(rng: random.Random, rows: Sequence[BasePersonRow]) -> BasePersonRow:
    # Reuse an existing household (and its state/tenure) most of the time;
    # otherwise open a fresh household, occasionally above any mafid seen.
    if rows and rng.random() < 0.7:
        anchor = rows[rng.randrange(len(rows))]
        mafid, state_id, tenure = anchor.mafid, anchor.state_id, anchor.tenure
    else:
        mafid = (max((r.mafid for r in rows), default=1000)) + rng.randrange(1, 5)
        state_id = rng.choice(STATE_FIPS_US)
        tenure = rng.choice(tuple(Tenure))
    relationship = rng.choice(
        ("householder",) + tuple(code for code, _ in _MEMBER_RELATIONSHIPS)
    )
    return _random_member(rng, state_id, mafid, tenure, relationship)
