"""Stability-tracked dataset transformations.

Datasets are multisets of immutable rows (tuples). A transformation with
stability ``c`` amplifies the multiset symmetric difference between any two
input datasets by at most a factor of ``c``; stabilities multiply under
composition. The truncate-and-join operator bounds the join's fan-out by
keeping at most ``tau`` person rows per household (chosen by a keyed hash
ordering) and dropping every unit row whose MAFID is not unique, which makes
it (2*tau + 2)-stable with respect to the underlying person data.
"""

from __future__ import annotations

import hashlib
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, NamedTuple, Sequence

from .records import JoinedRow, PersonRecord, UnitRecord

logger = logging.getLogger(__name__)

_FIELD_SEP = b"\x1f"


@dataclass(frozen=True)
class StableTransform:
    """A dataset transformation with a declared stability factor."""

    stability: int
    apply: Callable[[tuple], tuple]

    def __post_init__(self):
        if self.stability < 1:
            raise ValueError("stability must be a positive integer")

    def then(self, other: "StableTransform") -> "StableTransform":
        """Compose; the combined stability is the product of the factors."""
        first, second = self.apply, other.apply
        return StableTransform(
            stability=self.stability * other.stability,
            apply=lambda rows: second(first(rows)),
        )

    def __call__(self, rows: tuple) -> tuple:
        return self.apply(rows)


class TruncationPolicy(NamedTuple):
    """Left-side person threshold; the right side always drops non-unique keys."""

    tau: int

    @property
    def stability(self) -> int:
        return 2 * self.tau + 2


def filter_rows(rows: Sequence, predicate: Callable) -> tuple:
    """Keep rows satisfying ``predicate``. 1-stable."""
    return tuple(row for row in rows if predicate(row))


def map_rows(rows: Sequence, fn: Callable) -> tuple:
    """Apply ``fn`` to every row, one output per input. 1-stable."""
    return tuple(fn(row) for row in rows)


def filter_transform(predicate: Callable) -> StableTransform:
    return StableTransform(1, lambda rows: filter_rows(rows, predicate))


def map_transform(fn: Callable) -> StableTransform:
    return StableTransform(1, lambda rows: map_rows(rows, fn))


def serialize_record(row: tuple, occurrence: int) -> bytes:
    """Canonical byte encoding of a row plus its per-duplicate occurrence index.

    Identical duplicate rows get distinct occurrence indices so they hash
    apart; the encoding includes every field (MAFID included).
    """
    parts = [str(field).encode() for field in row]
    parts.append(str(occurrence).encode())
    return _FIELD_SEP.join(parts)


def truncation_order_key(row: tuple, occurrence: int, hash_key: bytes):
    """Sort key for within-household truncation: keyed 64-bit hash of the
    serialized record, ties broken by the serialized bytes themselves."""
    data = serialize_record(row, occurrence)
    digest = hashlib.blake2b(data, digest_size=8, key=hash_key).digest()
    return (digest, data)


def truncate_persons(
    persons: Sequence[PersonRecord], tau: int, hash_key: bytes
) -> tuple[PersonRecord, ...]:
    """Keep at most ``tau`` person rows per MAFID, first by hash ordering."""
    if tau < 1:
        raise ValueError(f"tau must be >= 1, got {tau}")
    by_household: dict[int, list] = {}
    for row in persons:
        by_household.setdefault(row.mafid, []).append(row)
    kept: list = []
    truncated_households = dropped_rows = 0
    for members in by_household.values():
        if len(members) <= tau:
            kept.extend(members)
            continue
        truncated_households += 1
        dropped_rows += len(members) - tau
        seen: Counter = Counter()
        decorated = []
        for row in members:
            occurrence = seen[row]
            seen[row] += 1
            decorated.append((truncation_order_key(row, occurrence, hash_key), row))
        decorated.sort(key=lambda pair: pair[0])
        kept.extend(row for _, row in decorated[:tau])
    if truncated_households:
        # Run-log diagnostic only; this count never reaches the DP outputs.
        logger.info(
            "truncation at tau=%d dropped %d rows across %d households",
            tau,
            dropped_rows,
            truncated_households,
        )
    return tuple(kept)


def drop_non_unique_units(units: Sequence[UnitRecord]) -> tuple[UnitRecord, ...]:
    """Drop every unit row whose MAFID appears more than once."""
    multiplicity = Counter(row.mafid for row in units)
    return tuple(row for row in units if multiplicity[row.mafid] == 1)


def truncate_and_join(
    persons: Sequence[PersonRecord],
    units: Sequence[UnitRecord],
    tau: int,
    hash_key: bytes,
) -> tuple[JoinedRow, ...]:
    """Inner join persons to units on MAFID after truncating both sides.

    Households with more than ``tau`` persons contribute exactly ``tau`` rows;
    unit rows with duplicated MAFIDs are all dropped. The joined row carries
    the unit's geography. (2*tau + 2)-stable in the underlying person data.
    """
    kept_persons = truncate_persons(persons, tau, hash_key)
    unit_by_mafid = {row.mafid: row for row in drop_non_unique_units(units)}
    joined = []
    for person in kept_persons:
        unit = unit_by_mafid.get(person.mafid)
        if unit is None:
            continue
        joined.append(
            JoinedRow(
                state_id=unit.state_id,
                mafid=person.mafid,
                age=person.age,
                race_eth=person.race_eth,
                relationship=person.relationship,
                householder_race_eth=unit.householder_race_eth,
                tenure=unit.tenure,
                household_type=unit.household_type,
            )
        )
    return tuple(joined)


def symmetric_difference_size(a: Iterable, b: Iterable) -> int:
    """Size of the multiset symmetric difference of two row collections."""
    counts = Counter(a)
    counts.subtract(Counter(b))
    return sum(abs(delta) for delta in counts.values())
