"""Differentially private tabulation of person-in-household statistics.

Counts of people by household characteristics are protected by exact discrete
Gaussian noise calibrated through a stability-tracked private join, with
privacy loss accounted as zero-concentrated differential privacy.
"""

from .accountant import (
    BudgetAllocation,
    BudgetExceeded,
    DeltaMismatch,
    PrivacyGuarantee,
    PrivacySession,
    compose,
    scale_by_stability,
)
from .calibrate import MoeTarget, build_parameter_table, moe_from_rho, rho_from_moe
from .engine import Region, RunConfig, run_all
from .noise import NoisyCell, dgauss_pmf, sample_dgauss, vector_discrete_gaussian
from .records import (
    Iteration,
    PersonRecord,
    PopulationGroup,
    PopulationGroupLevel,
    RaceEthCode,
    UnitRecord,
    classify_iteration,
    map_population_group,
)
from .tables import BasisCell, TableSpec, build_table_specs
from .transform import symmetric_difference_size, truncate_and_join

__version__ = "1.0.0"

__all__ = [
    "BasisCell",
    "BudgetAllocation",
    "BudgetExceeded",
    "DeltaMismatch",
    "Iteration",
    "MoeTarget",
    "NoisyCell",
    "PersonRecord",
    "PopulationGroup",
    "PopulationGroupLevel",
    "PrivacyGuarantee",
    "PrivacySession",
    "RaceEthCode",
    "Region",
    "RunConfig",
    "TableSpec",
    "UnitRecord",
    "build_parameter_table",
    "build_table_specs",
    "classify_iteration",
    "compose",
    "dgauss_pmf",
    "map_population_group",
    "moe_from_rho",
    "rho_from_moe",
    "run_all",
    "sample_dgauss",
    "scale_by_stability",
    "symmetric_difference_size",
    "truncate_and_join",
    "vector_discrete_gaussian",
]
