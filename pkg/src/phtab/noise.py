"""Discrete Gaussian sampling and the vector noise mechanism.

Sampling is exact: a discrete Laplace proposal is thinned by a
Bernoulli(exp(-x)) acceptance test, all in integer arithmetic, so the output
distribution is the discrete Gaussian itself rather than a floating-point
approximation. The variance is carried as an exact rational throughout so
reported variances are bit-reproducible.
"""

from __future__ import annotations

import hashlib
import math
import random
from fractions import Fraction
from typing import NamedTuple, Optional, Sequence, Union

from .records import PopulationGroup
from .tables import BasisCell

Sigma2 = Union[int, Fraction]


class DomainError(ValueError):
    """A noise parameter is outside its legal domain."""


class NoiseScale(NamedTuple):
    """An exact noise variance and how it was derived."""

    sigma2: Fraction
    rho: Optional[Fraction] = None
    stability: Optional[int] = None

    @classmethod
    def from_budget(cls, rho, stability: int) -> "NoiseScale":
        """Variance for a budget share: sigma2 = stability^2 / (2 * rho)."""
        rho = _as_fraction(rho)
        if rho <= 0:
            raise DomainError(f"rho must be positive, got {rho}")
        if stability <= 0:
            raise DomainError(f"stability must be positive, got {stability}")
        return cls(Fraction(stability * stability, 1) / (2 * rho), rho, stability)


class NoisyCell(NamedTuple):
    """One output row: a population group, basis cell, noisy count, variance."""

    group: PopulationGroup
    cell: BasisCell
    value: int
    variance: Fraction


def _as_fraction(value) -> Fraction:
    if isinstance(value, float):
        raise DomainError(
            "binary floats are not accepted for privacy parameters; "
            "pass Fraction, Decimal, int, or str"
        )
    return Fraction(value)


def _validate_sigma2(sigma2) -> Fraction:
    sigma2 = Fraction(sigma2)
    if sigma2 <= 0:
        raise DomainError(f"sigma2 must be positive, got {sigma2}")
    return sigma2


def dgauss_pmf(x: int, sigma2) -> float:
    """Probability the discrete Gaussian with variance ``sigma2`` equals ``x``.

    The normalizer is a symmetric series truncated once terms fall below
    1e-18 of the running sum, well inside 1e-12 relative error.
    """
    sigma2 = float(_validate_sigma2(sigma2))
    inv = 1.0 / (2.0 * sigma2)
    total = 1.0
    y = 1
    while True:
        term = 2.0 * math.exp(-y * y * inv)
        total += term
        if term < 1e-18 * total:
            break
        y += 1
    return math.exp(-x * x * inv) / total


def _bernoulli(num: int, den: int, rng) -> bool:
    """Bernoulli(num/den) draw; 0 <= num <= den."""
    return rng.randrange(den) < num


def _bernoulli_exp1(num: int, den: int, rng) -> bool:
    """Bernoulli(exp(-num/den)) draw for 0 <= num/den <= 1."""
    k = 1
    while _bernoulli(num, den * k, rng):
        k += 1
    return k % 2 == 1


def _bernoulli_exp(num: int, den: int, rng) -> bool:
    """Bernoulli(exp(-num/den)) draw for num/den >= 0."""
    while num > den:
        if not _bernoulli_exp1(1, 1, rng):
            return False
        num -= den
    return _bernoulli_exp1(num, den, rng)


def _geometric_exp(num: int, den: int, rng) -> int:
    """Geometric(1 - exp(-num/den)) draw (number of failures); num/den > 0."""
    while True:
        shift = rng.randrange(den)
        if _bernoulli_exp(shift, den, rng):
            break
    blocks = 0
    while _bernoulli_exp(1, 1, rng):
        blocks += 1
    return (blocks * den + shift) // num


def _dlaplace(scale: int, rng) -> int:
    """Discrete Laplace draw with integer scale >= 1."""
    while True:
        negative = rng.randrange(2)
        magnitude = _geometric_exp(1, scale, rng)
        if negative and magnitude == 0:
            continue
        return -magnitude if negative else magnitude


def sample_dgauss(sigma2, rng=None) -> int:
    """Draw one exact sample from the discrete Gaussian with variance ``sigma2``.

    Args:
        sigma2: Positive variance, exact (int, Fraction, Decimal, or str).
        rng: Source of randomness exposing ``randrange``; defaults to the OS
            entropy pool.
    """
    sigma2 = _validate_sigma2(sigma2)
    if rng is None:
        rng = random.SystemRandom()
    num, den = sigma2.numerator, sigma2.denominator
    scale = math.isqrt(num // den) + 1
    # Acceptance probability exp(-(|y| - sigma2/scale)^2 / (2 sigma2)) expressed
    # over a common integer denominator.
    bias_den = 2 * num * den * scale * scale
    while True:
        y = _dlaplace(scale, rng)
        deviation = abs(y) * scale * den - num
        if _bernoulli_exp(deviation * deviation, bias_den, rng):
            return y


def vector_discrete_gaussian(
    values: Sequence[int], rho, stability: int, rng=None, streams=None
) -> list[int]:
    """Add i.i.d. discrete Gaussian noise of variance stability^2/(2*rho).

    Args:
        values: Integer vector to protect.
        rho: Positive budget share (exact; floats rejected).
        stability: Positive stability factor of the preceding transformation.
        rng: Shared randomness source; ignored when ``streams`` is given.
        streams: Optional per-component randomness sources, matched by index,
            for scheduling-independent reproducibility.
    """
    scale = NoiseScale.from_budget(rho, stability)
    if streams is not None:
        if len(streams) != len(values):
            raise DomainError("one stream per vector component required")
        return [v + sample_dgauss(scale.sigma2, s) for v, s in zip(values, streams)]
    if rng is None:
        rng = random.SystemRandom()
    return [v + sample_dgauss(scale.sigma2, rng) for v in values]


def moe_from_sigma(sigma: float, z: float = 1.645) -> int:
    """90% margin of error for noise of standard deviation ``sigma``: floor(z*sigma)."""
    if sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    return math.floor(z * sigma)


def moe_from_sigma2(sigma2, z: Fraction = Fraction("1.645")) -> int:
    """Exact floor(z * sqrt(sigma2)) via integer square root."""
    sigma2 = _validate_sigma2(sigma2)
    scaled = Fraction(z) ** 2 * sigma2
    return math.isqrt(scaled.numerator // scaled.denominator)


def noise_stream(seed: Optional[int], *parts) -> random.Random:
    """Deterministic randomness stream keyed by structured identifiers.

    With ``seed`` None, returns an OS-entropy source (production mode). With a
    seed, the stream depends only on (seed, parts), never on scheduling.
    """
    if seed is None:
        return random.SystemRandom()
    material = b"\x1e".join(
        [str(seed).encode()] + [str(part).encode() for part in parts]
    )
    digest = hashlib.blake2b(material, digest_size=16).digest()
    return random.Random(int.from_bytes(digest, "big"))
