"""Shared builders and statistical oracles for the test suite."""

from __future__ import annotations

import math

import numpy as np
from scipy import stats

from phtab.noise import dgauss_pmf
from phtab.records import PersonRecord, RaceEthCode, Tenure, UnitRecord
from phtab.tables import CodeConfig, build_table_specs, load_default_config

WHITE = RaceEthCode(0b000001, False)
BLACK = RaceEthCode(0b000010, False)
ASIAN = RaceEthCode(0b001000, False)
NHPI = RaceEthCode(0b010000, False)
WHITE_BLACK = RaceEthCode(0b000011, False)
HISPANIC_SOR = RaceEthCode(0b100000, True)


def person(state="06", mafid=1, age=30, race=WHITE, rel="householder"):
    return PersonRecord(state, mafid, age, race, rel)


def unit(
    state="06",
    mafid=1,
    race=WHITE,
    tenure=Tenure.MORTGAGE,
    htype="married_opposite_sex",
):
    return UnitRecord(state, mafid, race, tenure, htype)


def default_codes() -> CodeConfig:
    return CodeConfig(load_default_config()["code_lists"])


def default_specs(taus=None):
    config = load_default_config()
    effective = {
        t: config["tables"][t]["tau"]
        for t in config["tables"]
        if "tau" in config["tables"][t]
    }
    if taus:
        effective.update(taus)
    return build_table_specs(default_codes(), effective)


def chi_square_gof(samples, sigma2, min_expected=5.0):
    """Chi-square test of sampler draws against the pmf over [-5s, 5s]."""
    sigma = math.sqrt(float(sigma2))
    lo, hi = -math.ceil(5 * sigma), math.ceil(5 * sigma)
    support = range(lo, hi + 1)
    n = len(samples)
    expected = {x: n * dgauss_pmf(x, sigma2) for x in support}
    observed = {x: 0 for x in support}
    for value in samples:
        observed[min(max(value, lo), hi)] += 1

    # Merge tails until every bin has enough mass.
    xs = sorted(support)
    bins = []
    acc_obs = acc_exp = 0.0
    for x in xs:
        acc_obs += observed[x]
        acc_exp += expected[x]
        if acc_exp >= min_expected:
            bins.append((acc_obs, acc_exp))
            acc_obs = acc_exp = 0.0
    if bins and acc_exp > 0:
        obs, exp = bins[-1]
        bins[-1] = (obs + acc_obs, exp + acc_exp)
    obs = np.array([b[0] for b in bins])
    exp = np.array([b[1] for b in bins])
    exp *= obs.sum() / exp.sum()
    return stats.chisquare(obs, exp).pvalue
