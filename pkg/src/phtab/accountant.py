"""Privacy-loss accounting under zero-concentrated differential privacy.

Budgets are exact decimals, never binary floats, so the ledger balances to the
last digit. A :class:`PrivacySession` guards the private inputs: it holds the
registered datasets with their neighbor distances, and every noisy
measurement debits the session's budget through a single primitive. Privacy
loss is accounted with respect to add/remove-one neighbors; the reported
guarantee also includes the change-one figure, which is exactly double.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence

from .noise import NoiseScale, noise_stream, sample_dgauss
from .records import PopulationGroupLevel


class BudgetError(Exception):
    """Base class for budget accounting failures."""


class BudgetExceeded(BudgetError):
    """A spend would push the ledger past the session total."""


class DeltaMismatch(BudgetError):
    """The claimed stability factor contradicts the table's query structure."""


class PrivacyGuarantee(NamedTuple):
    """Privacy loss under both neighbor definitions."""

    unbounded_rho: Decimal

    @property
    def bounded_rho(self) -> Decimal:
        return 2 * self.unbounded_rho


def compose(rhos: Iterable) -> PrivacyGuarantee:
    """Sequential composition: losses add."""
    total = sum((_as_decimal(r) for r in rhos), Decimal(0))
    return PrivacyGuarantee(total)


def scale_by_stability(rho, stability: int):
    """Privacy loss of a rho-mechanism behind a stability-b transformation: b^2 * rho."""
    if stability < 1:
        raise ValueError(f"stability must be >= 1, got {stability}")
    return _as_decimal(rho) * stability * stability


def bounded_sensitivity_check(stability: int, bounded: bool = True) -> float:
    """Worst-case L2 shift of a count vector behind a stability-``stability``
    transformation: one cell can drop and another rise by the full factor under
    change-one neighbors, hence sqrt(2)*stability; add/remove-one neighbors
    move at most ``stability`` rows in total."""
    if stability <= 0:
        raise ValueError(f"stability must be positive, got {stability}")
    return math.sqrt(2) * stability if bounded else float(stability)


def _as_decimal(value) -> Decimal:
    if isinstance(value, float):
        raise BudgetError(
            "budgets must be exact decimals; pass Decimal, int, or str"
        )
    return Decimal(value)


class BudgetAllocation:
    """Per-(table, level) budget shares with an exact total."""

    def __init__(self, entries: dict):
        self.entries: dict = {}
        for (table_id, level), rho in entries.items():
            rho = _as_decimal(rho)
            if rho <= 0:
                raise BudgetError(f"rho for {table_id}/{level} must be > 0")
            key = level.key if isinstance(level, PopulationGroupLevel) else level
            self.entries[(table_id, key)] = rho

    @property
    def total_rho(self) -> Decimal:
        return sum(self.entries.values(), Decimal(0))

    def rho_for(self, table_id: str, level: PopulationGroupLevel) -> Decimal:
        try:
            return self.entries[(table_id, level.key)]
        except KeyError:
            raise BudgetError(
                f"no budget configured for {table_id}/{level.key}"
            ) from None

    def guarantee(self) -> PrivacyGuarantee:
        return compose(self.entries.values())


class LedgerEntry(NamedTuple):
    table_id: str
    level: str
    rho: Decimal
    stability: int
    sigma2: Fraction


@dataclass
class PrivacySession:
    """Budget ledger and sole gateway to the private datasets.

    All noisy measurements flow through :meth:`measure`; the engine never adds
    noise or reads budgets on its own. Fixed seeds and the noiseless mode are
    test facilities and refuse to run unless ``unsafe_test_mode`` is set.
    """

    total_rho: Decimal
    table_stabilities: dict
    seed: Optional[int] = None
    noiseless: bool = False
    unsafe_test_mode: bool = False
    ledger: list = field(default_factory=list)
    _datasets: dict = field(default_factory=dict)
    _distances: dict = field(default_factory=dict)

    def __post_init__(self):
        self.total_rho = _as_decimal(self.total_rho)
        if self.total_rho <= 0:
            raise BudgetError("session total rho must be positive")
        self.remaining = self.total_rho
        if (self.seed is not None or self.noiseless) and not self.unsafe_test_mode:
            raise BudgetError(
                "fixed seeds and noiseless runs require unsafe_test_mode"
            )

    def register(self, name: str, rows: tuple, neighbor_distance: int) -> None:
        """Register a private dataset with its add/remove neighbor distance."""
        if name in self._datasets:
            raise BudgetError(f"dataset {name!r} already registered")
        self._datasets[name] = tuple(rows)
        self._distances[name] = neighbor_distance

    def dataset(self, name: str) -> tuple:
        return self._datasets[name]

    def neighbor_distance(self, name: str) -> int:
        return self._distances[name]

    def spend(
        self, table_id: str, level: PopulationGroupLevel, rho, stability: int
    ) -> NoiseScale:
        """Debit ``rho`` and return the noise scale for one measurement.

        Raises:
            DeltaMismatch: If ``stability`` is not the factor implied by the
                table's query structure (2*tau+2 joined, 2 unit-only).
            BudgetExceeded: If ``rho`` exceeds the remaining budget.
        """
        rho = _as_decimal(rho)
        if rho <= 0:
            raise BudgetError(f"rho must be positive, got {rho}")
        expected = self.table_stabilities.get(table_id)
        if expected is None:
            raise BudgetError(f"unknown table {table_id!r}")
        if stability != expected:
            raise DeltaMismatch(
                f"{table_id} requires stability {expected}, got {stability}"
            )
        if rho > self.remaining:
            raise BudgetExceeded(
                f"spend of {rho} exceeds remaining budget {self.remaining}"
            )
        scale = NoiseScale.from_budget(rho, stability)
        self.remaining -= rho
        self.ledger.append(
            LedgerEntry(table_id, level.key, rho, stability, scale.sigma2)
        )
        return scale

    def measure(
        self,
        table_id: str,
        level: PopulationGroupLevel,
        keys: Sequence,
        counts: Sequence[int],
        rho,
        stability: int,
    ) -> tuple[list[int], Fraction]:
        """Spend, then return the noisy vector and the variance used.

        Noise streams are keyed by (table, level, key) so seeded runs are
        reproducible regardless of measurement scheduling.
        """
        scale = self.spend(table_id, level, rho, stability)
        if self.noiseless:
            return list(counts), scale.sigma2
        if self.seed is None:
            rng = noise_stream(None)
            noisy = [v + sample_dgauss(scale.sigma2, rng) for v in counts]
        else:
            noisy = [
                v + sample_dgauss(
                    scale.sigma2, noise_stream(self.seed, table_id, level.key, key)
                )
                for key, v in zip(keys, counts)
            ]
        return noisy, scale.sigma2

    def spent(self) -> Decimal:
        return sum((entry.rho for entry in self.ledger), Decimal(0))

    def guarantee(self) -> PrivacyGuarantee:
        return compose(entry.rho for entry in self.ledger)

    def export_ledger(self) -> str:
        """CSV audit record: one line per spend with its variance."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["table", "level", "rho", "stability", "sigma2"])
        for entry in self.ledger:
            writer.writerow(
                [
                    entry.table_id,
                    entry.level,
                    str(entry.rho),
                    entry.stability,
                    f"{entry.sigma2.numerator}/{entry.sigma2.denominator}",
                ]
            )
        guarantee = self.guarantee()
        writer.writerow(["total_unbounded", "", str(guarantee.unbounded_rho), "", ""])
        writer.writerow(["total_bounded", "", str(guarantee.bounded_rho), "", ""])
        return buf.getvalue()
