"""MOE/budget conversion and the production parameter table."""

from decimal import Decimal
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from phtab.calibrate import (
    CalibrationRequestError,
    MoeTarget,
    build_parameter_table,
    calibrate_rows,
    moe_from_rho,
    production_targets,
    rho_from_moe,
    round_rho,
)
from phtab.noise import DomainError
from phtab.records import PopulationGroupLevel

NATION_STAR = PopulationGroupLevel.from_key("nation_unattributed")


class TestRhoFromMoe:
    def test_person_table_nation(self):
        assert round_rho(rho_from_moe(500, 22)) == Decimal("0.002619")

    def test_person_table_state_ag(self):
        assert round_rho(rho_from_moe(68, 22)) == Decimal("0.141622")

    def test_unit_table_state(self):
        assert round_rho(rho_from_moe(200, 2)) == Decimal("0.000135")

    def test_alternate_quantile_constant(self):
        # z=1.64 reproduces the 1.3448 * stability^2 / moe^2 form.
        assert rho_from_moe(500, 22, z="1.64") == Fraction("1.3448") * 484 / 250_000
        assert round_rho(rho_from_moe(500, 22, z="1.64")) == Decimal("0.002604")

    def test_rejects_bad_inputs(self):
        with pytest.raises(DomainError):
            rho_from_moe(0, 22)
        with pytest.raises(DomainError):
            rho_from_moe(100, 0)
        with pytest.raises(DomainError):
            rho_from_moe(100, 22, z="-1")

    @given(st.integers(min_value=1, max_value=10**6))
    def test_strictly_decreasing_in_moe(self, moe):
        assert rho_from_moe(moe, 22) > rho_from_moe(moe + 1, 22)

    @given(st.integers(min_value=1, max_value=40))
    def test_strictly_increasing_in_stability(self, stability):
        assert rho_from_moe(300, stability) < rho_from_moe(300, stability + 1)


class TestMoeFromRho:
    def test_round_trip_of_exact_budget_is_identity(self):
        for moe in (1, 2, 20, 68, 200, 499, 500, 123_456):
            for stability in (2, 14, 22):
                assert moe_from_rho(rho_from_moe(moe, stability), stability) == moe

    def test_published_budgets_achieve_at_most_the_target(self):
        # Published budgets are rounded; the achieved MOE never exceeds the
        # target (floor arithmetic; rounding up a budget only tightens it).
        assert moe_from_rho(Decimal("0.141622"), 22) == 67
        assert moe_from_rho(Decimal("0.000022"), 2) == 495

    def test_infinite_budget_gives_zero_moe(self):
        assert moe_from_rho(Fraction(10**18), 22) == 0

    def test_rejects_nonpositive_rho(self):
        with pytest.raises(DomainError):
            moe_from_rho(Decimal("0"), 22)

    @given(
        st.integers(min_value=1, max_value=100_000),
        st.sampled_from([2, 4, 6, 8, 14, 22, 42]),
    )
    def test_round_trip_never_exceeds_target(self, moe, stability):
        assert moe_from_rho(rho_from_moe(moe, stability), stability) <= moe


class TestRounding:
    def test_half_even(self):
        assert round_rho(Fraction(5, 10**7)) == Decimal("0.000000")
        assert round_rho(Fraction(15, 10**7)) == Decimal("0.000002")
        assert round_rho(Fraction(25, 10**7)) == Decimal("0.000002")

    def test_exact_values_unchanged(self):
        assert round_rho(Fraction(2619, 10**6)) == Decimal("0.002619")


class TestParameterTable:
    def test_bounded_is_double_rounded_unbounded(self):
        table = build_parameter_table(production_targets())
        for row in table.rows:
            assert row.rho_bounded == 2 * row.rho_unbounded

    def test_single_row_total(self):
        table = build_parameter_table([MoeTarget("PH1_num", NATION_STAR, 500, 10)])
        assert table.total_unbounded == Decimal("0.002619")
        assert table.total_bounded == Decimal("0.005238")

    def test_full_production_total(self):
        table = build_parameter_table(production_targets())
        assert len(table.rows) == 46
        assert table.total_unbounded == Decimal("1.257281")
        assert table.total_bounded == Decimal("2.514562")


class TestCalibrateRows:
    def test_moe_row(self):
        response = calibrate_rows(
            {
                "rows": [
                    {
                        "table": "PH1_num",
                        "level": "nation_unattributed",
                        "tau": 10,
                        "moe": 500,
                    }
                ]
            }
        )
        row = response["rows"][0]
        assert row["rho_unbounded"] == "0.002619"
        assert row["rho_bounded"] == "0.005238"
        assert row["stability"] == 22
        assert row["moe"] == 500
        assert response["totals"]["rho_unbounded"] == "0.002619"

    def test_rho_row(self):
        response = calibrate_rows(
            {
                "rows": [
                    {
                        "table": "PH8_denom",
                        "level": "state_a_g",
                        "rho": "0.00117",
                    }
                ]
            }
        )
        assert response["rows"][0]["moe"] == 68

    def test_totals_are_exact_sums(self):
        rows = [
            {"table": t.table_id, "level": t.level.key, "tau": t.tau, "moe": t.moe}
            for t in production_targets()
        ]
        response = calibrate_rows({"rows": rows})
        assert response["totals"]["rho_unbounded"] == "1.257281"
        assert response["totals"]["rho_bounded"] == "2.514562"

    def test_zero_moe_rejected(self):
        with pytest.raises(CalibrationRequestError):
            calibrate_rows(
                {
                    "rows": [
                        {
                            "table": "PH1_num",
                            "level": "nation_unattributed",
                            "tau": 10,
                            "moe": 0,
                        }
                    ]
                }
            )

    def test_moe_and_rho_together_rejected(self):
        with pytest.raises(CalibrationRequestError):
            calibrate_rows(
                {
                    "rows": [
                        {
                            "table": "PH1_num",
                            "level": "nation_unattributed",
                            "tau": 10,
                            "moe": 10,
                            "rho": "1",
                        }
                    ]
                }
            )

    def test_person_table_requires_tau(self):
        with pytest.raises(CalibrationRequestError):
            calibrate_rows(
                {
                    "rows": [
                        {
                            "table": "PH1_num",
                            "level": "nation_unattributed",
                            "moe": 10,
                        }
                    ]
                }
            )

    def test_unit_table_refuses_tau(self):
        with pytest.raises(CalibrationRequestError):
            calibrate_rows(
                {
                    "rows": [
                        {
                            "table": "PH1_denom",
                            "level": "nation_unattributed",
                            "tau": 5,
                            "moe": 10,
                        }
                    ]
                }
            )

    def test_unknown_table_and_level(self):
        with pytest.raises(CalibrationRequestError):
            calibrate_rows(
                {"rows": [{"table": "PH99", "level": "nation_unattributed", "moe": 1}]}
            )
        with pytest.raises(CalibrationRequestError):
            calibrate_rows(
                {"rows": [{"table": "PH1_num", "level": "moon", "tau": 1, "moe": 1}]}
            )
