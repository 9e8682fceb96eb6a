"""Independent brute-force tabulator.

Reimplements the whole noiseless pipeline from the table shells with plain
dictionaries and loops: filter, keep-first-tau-by-hash, join, group-by count,
explicit zero rows, and the PH8_num derivation. Shares nothing with the
engine besides the record types and the code-list config; the truncation
ordering is recomputed from the documented serialization contract
(str() of each record field joined by 0x1f, then the occurrence index).
"""

from __future__ import annotations

import hashlib
from collections import Counter

from phtab.records import NATION_GEO, STATE_FIPS_PR, STATE_FIPS_US, Tenure

AG_BY_MASK = {1: "A", 2: "B", 4: "C", 8: "D", 16: "E", 32: "F"}

LEVEL_KEYS = (
    "nation_unattributed",
    "nation_a_g",
    "nation_h_i",
    "state_unattributed",
    "state_a_g",
    "state_h_i",
)


def iterations_of(race_eth):
    """Every iteration a race/eth code belongs to, keyed by level."""
    ag = AG_BY_MASK.get(race_eth.races, "G")
    hi = "H" if race_eth.hispanic else ("I" if race_eth.races == 1 else None)
    return {"unattributed": "*", "a_g": ag, "h_i": hi}


def order_key(row, occurrence, hash_key):
    data = "\x1f".join([str(f) for f in row] + [str(occurrence)]).encode()
    return (hashlib.blake2b(data, digest_size=8, key=hash_key).digest(), data)


def keep_first_tau(persons, tau, hash_key):
    households = {}
    for row in persons:
        households.setdefault(row.mafid, []).append(row)
    kept = []
    for members in households.values():
        if len(members) <= tau:
            kept.extend(members)
        else:
            seen = Counter()
            ranked = []
            for row in members:
                ranked.append((order_key(row, seen[row], hash_key), row))
                seen[row] += 1
            ranked.sort()
            kept.extend(row for _, row in ranked[:tau])
    return kept


def join(persons, units):
    mafid_counts = Counter(u.mafid for u in units)
    unique_units = {u.mafid: u for u in units if mafid_counts[u.mafid] == 1}
    return [
        (p, unique_units[p.mafid]) for p in persons if p.mafid in unique_units
    ]


def ph2_cell(unit, codes):
    h = unit.household_type
    if h.startswith("married_"):
        return f"{h.removeprefix('married_')}_married_couple"
    if h.startswith("cohabiting_"):
        sex = "same_sex" if "same_sex" in h else "opposite_sex"
        return f"{sex}_cohabiting_couple"
    side = "male" if h.startswith("male") else "female"
    return (
        f"{side}_householder_alone" if h.endswith("_alone")
        else f"{side}_householder_with_others"
    )


def family_type(unit):
    h = unit.household_type
    if h.startswith("married"):
        return "married"
    if h.startswith("cohabiting"):
        return "cohabiting"
    return "male_householder" if h.startswith("male") else "female_householder"


def ph3_cell(person, unit, codes):
    rel = person.relationship
    if rel in codes.own_child_codes:
        ft = family_type(unit)
        short = {"married": "married_couple", "cohabiting": "cohabiting_couple"}.get(
            ft, ft
        )
        return f"own_child_in_{short}"
    if rel in codes.grandchild_codes:
        return "grandchild"
    if rel in codes.other_relative_codes:
        return "other_relatives"
    return "householder_partner_or_nonrelative"


def ph6_cell(person, unit, codes):
    age = person.age
    if age < 4:
        band = "under_4"
    elif age <= 5:
        band = "4_and_5"
    elif age <= 11:
        band = "6_to_11"
    else:
        band = "12_to_17"
    return f"{family_type(unit)}/{band}"


def ph7_cell(person, unit, codes):
    return {
        Tenure.MORTGAGE: "owned_with_mortgage",
        Tenure.FREE_AND_CLEAR: "owned_free_and_clear",
        Tenure.RENTED: "renter_occupied",
    }[unit.tenure]


def age_cell(person, unit, codes):
    return "under_18" if person.age < 18 else "18_and_over"


PERSON_TABLES = {
    # table -> (person filter, unit filter, cell fn, cells, person-iterated?, levels)
    "PH1_num": (None, None, age_cell, ("under_18", "18_and_over"), False, LEVEL_KEYS),
    "PH2": (
        None,
        None,
        lambda p, u, c: ph2_cell(u, c),
        (
            "opposite_sex_married_couple",
            "same_sex_married_couple",
            "opposite_sex_cohabiting_couple",
            "same_sex_cohabiting_couple",
            "male_householder_alone",
            "male_householder_with_others",
            "female_householder_alone",
            "female_householder_with_others",
        ),
        False,
        ("nation_unattributed", "state_unattributed"),
    ),
    "PH3": (
        lambda p, c: p.age < 18,
        None,
        ph3_cell,
        (
            "householder_partner_or_nonrelative",
            "own_child_in_married_couple",
            "own_child_in_cohabiting_couple",
            "own_child_in_male_householder",
            "own_child_in_female_householder",
            "grandchild",
            "other_relatives",
        ),
        True,
        LEVEL_KEYS,
    ),
    "PH4": (
        lambda p, c: p.relationship in c.family_relationship_codes,
        lambda u, c: u.household_type in c.family_household_types,
        age_cell,
        ("under_18", "18_and_over"),
        False,
        LEVEL_KEYS,
    ),
    "PH6": (
        lambda p, c: p.age < 18 and p.relationship in c.own_child_codes,
        None,
        ph6_cell,
        tuple(
            f"{ft}/{band}"
            for ft in ("married", "cohabiting", "male_householder", "female_householder")
            for band in ("under_4", "4_and_5", "6_to_11", "12_to_17")
        ),
        False,
        ("nation_unattributed", "state_unattributed"),
    ),
    "PH7": (
        None,
        None,
        ph7_cell,
        ("owned_with_mortgage", "owned_free_and_clear", "renter_occupied"),
        False,
        LEVEL_KEYS,
    ),
}

UNIT_TABLES = {
    # table -> (unit filter, cell fn, cells, levels)
    "PH1_denom": (None, lambda u, c: "total", ("total",), LEVEL_KEYS),
    "PH5_denom": (
        lambda u, c: u.household_type in c.family_household_types,
        lambda u, c: "total",
        ("total",),
        LEVEL_KEYS,
    ),
    "PH8_denom": (
        None,
        lambda u, c: "owner_occupied" if u.tenure != Tenure.RENTED else "renter_occupied",
        ("owner_occupied", "renter_occupied"),
        LEVEL_KEYS,
    ),
}

ITERATION_LISTS = {
    "unattributed": ("*",),
    "a_g": ("A", "B", "C", "D", "E", "F", "G"),
    "h_i": ("H", "I"),
}


def domain(level_key, cells, region):
    geo_level, _, iter_level = level_key.partition("_")
    geos = (
        (NATION_GEO,)
        if geo_level == "nation"
        else (STATE_FIPS_PR if region == "pr" else STATE_FIPS_US)
    )
    return [
        (geo, it, cell)
        for geo in geos
        for it in ITERATION_LISTS[iter_level]
        for cell in cells
    ]


def tabulate(persons, units, codes, taus, region="us", hash_key=b""):
    """Full noiseless tabulation: {(table, geo, iteration, cell): count}."""
    out = {}

    for table, (pf, uf, cell_fn, cells, by_person, levels) in PERSON_TABLES.items():
        kept_p = [p for p in persons if pf is None or pf(p, codes)]
        kept_u = [u for u in units if uf is None or uf(u, codes)]
        pairs = join(keep_first_tau(kept_p, taus[table], hash_key), kept_u)
        for level_key in levels:
            if region == "pr" and level_key.startswith("nation"):
                continue
            geo_level, _, iter_level = level_key.partition("_")
            tallies = Counter()
            for p, u in pairs:
                subject = p.race_eth if by_person else u.householder_race_eth
                iteration = iterations_of(subject)[iter_level]
                if iteration is None:
                    continue
                geo = NATION_GEO if geo_level == "nation" else u.state_id
                tallies[(geo, iteration, cell_fn(p, u, codes))] += 1
            for key in domain(level_key, cells, region):
                out[(table,) + key] = tallies.get(key, 0)

    for table, (uf, cell_fn, cells, levels) in UNIT_TABLES.items():
        kept_u = [u for u in units if uf is None or uf(u, codes)]
        for level_key in levels:
            if region == "pr" and level_key.startswith("nation"):
                continue
            geo_level, _, iter_level = level_key.partition("_")
            tallies = Counter()
            for u in kept_u:
                iteration = iterations_of(u.householder_race_eth)[iter_level]
                if iteration is None:
                    continue
                geo = NATION_GEO if geo_level == "nation" else u.state_id
                tallies[(geo, iteration, cell_fn(u, codes))] += 1
            for key in domain(level_key, cells, region):
                out[(table,) + key] = tallies.get(key, 0)

    # PH8_num derives from PH7 by summing the owned cells.
    for level_key in LEVEL_KEYS:
        if region == "pr" and level_key.startswith("nation"):
            continue
        for geo, it, _ in domain(level_key, ("x",), region):
            mortgage = out[("PH7", geo, it, "owned_with_mortgage")]
            free_clear = out[("PH7", geo, it, "owned_free_and_clear")]
            renter = out[("PH7", geo, it, "renter_occupied")]
            out[("PH8_num", geo, it, "owner_occupied")] = mortgage + free_clear
            out[("PH8_num", geo, it, "renter_occupied")] = renter
            out[("PH8_num", geo, it, "total")] = mortgage + free_clear + renter

    return out
