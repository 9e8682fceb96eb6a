"""Generator determinism and neighbor-harness stability bounds."""

import pytest

from phtab import synth
from phtab.transform import symmetric_difference_size, truncate_and_join

from util import default_codes

CODES = default_codes()


class TestGenerate:
    def test_empty(self):
        dataset = synth.generate(0, seed=1)
        assert dataset.person_view() == ()
        assert dataset.unit_view(CODES) == ()

    def test_deterministic_under_seed(self):
        assert synth.generate(25, seed=9) == synth.generate(25, seed=9)
        assert synth.generate(25, seed=9) != synth.generate(25, seed=10)

    def test_size_mass_above_tau_produces_truncation(self):
        dataset = synth.generate(30, size_dist={12: 1}, seed=3)
        sizes = {}
        for row in dataset.rows:
            sizes[row.mafid] = sizes.get(row.mafid, 0) + 1
        assert all(size == 12 for size in sizes.values())
        joined = truncate_and_join(
            dataset.person_view(), dataset.unit_view(CODES), tau=10, hash_key=b"k"
        )
        assert len(joined) == 30 * 10

    def test_one_unit_row_per_household(self):
        dataset = synth.generate(50, seed=4)
        units = dataset.unit_view(CODES)
        mafids = [u.mafid for u in units]
        assert len(mafids) == len(set(mafids)) == 50

    def test_household_types_are_valid_codes(self):
        dataset = synth.generate(200, seed=5)
        types = {u.household_type for u in dataset.unit_view(CODES)}
        assert types <= CODES.household_type_codes
        assert len(types) > 4  # generator exercises a spread of compositions

    def test_region_pr(self):
        dataset = synth.generate(20, seed=6, region="pr")
        assert {r.state_id for r in dataset.rows} == {"72"}


class TestNeighbor:
    def test_remove_changes_base_by_one(self):
        base = synth.generate(10, seed=7)
        removed = synth.neighbor(base, "remove", seed=8)
        assert symmetric_difference_size(base.rows, removed.rows) == 1
        assert symmetric_difference_size(
            base.person_view(), removed.person_view()
        ) == 1

    def test_add_changes_base_by_one(self):
        base = synth.generate(10, seed=9)
        added = synth.neighbor(base, "add", seed=10)
        assert symmetric_difference_size(base.rows, added.rows) == 1

    def test_modify_changes_base_by_at_most_two(self):
        base = synth.generate(10, seed=11)
        changed = synth.neighbor(base, "modify", seed=12)
        assert symmetric_difference_size(base.rows, changed.rows) <= 2
        assert len(changed.rows) == len(base.rows)

    def test_empty_dataset_rejected(self):
        empty = synth.BasePersonDataset(())
        with pytest.raises(synth.EmptyDataset):
            synth.neighbor(empty, "remove")
        with pytest.raises(synth.EmptyDataset):
            synth.neighbor(empty, "modify")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            synth.neighbor(synth.generate(1, seed=1), "swap")

    @pytest.mark.parametrize("mode,bound", [("add", 2), ("remove", 2), ("modify", 4)])
    def test_unit_view_stability(self, mode, bound):
        for trial in range(300):
            base = synth.generate(6, size_dist={1: 1, 2: 2, 4: 1}, seed=trial)
            other = synth.neighbor(base, mode, seed=trial + 1000)
            diff = symmetric_difference_size(
                base.unit_view(CODES), other.unit_view(CODES)
            )
            assert diff <= bound, f"{mode} trial {trial}: unit views differ by {diff}"

    @pytest.mark.parametrize("tau", [1, 6])
    def test_joined_view_stability_add_to_full_household(self, tau):
        # Adding to a household already at size tau still moves the join by
        # at most 2*tau + 2 rows.
        for trial in range(200):
            base = synth.generate(4, size_dist={tau: 1}, seed=trial)
            other = synth.neighbor(base, "add", seed=trial + 5000)
            j1 = truncate_and_join(
                base.person_view(), base.unit_view(CODES), tau, b"k"
            )
            j2 = truncate_and_join(
                other.person_view(), other.unit_view(CODES), tau, b"k"
            )
            assert symmetric_difference_size(j1, j2) <= 2 * tau + 2
